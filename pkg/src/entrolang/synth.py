"""Synthetic language families with controllable divergence.

Languages are order-1 character Markov chains. Every transition row is a
cyclic shift of one shared skewed base vector (two adjacent heavy slots
plus a thin uniform tail) and each language's shift assignment is a
bijection on alphabet positions, which buys two properties at once: all
sources have exactly equal conditional entropy (cross-entropy differences
then measure divergence only) and all transition tables are doubly
stochastic, so the stationary and hence unigram distribution is uniform
for every language regardless of divergence.

An edge at depth d perturbs its parent by re-deriving exactly
round(A * delta ** EDGE_EXPONENTS[d-1]) row shifts (a cyclic rotation of the
selected images keeps the assignment a bijection and moves every selected
row). delta = 0 leaves the table untouched, delta = 1 draws a fresh
assignment. The exponent schedule is tuned so that at delta = 0.3 sibling,
cousin and cross-family vector distances land inside the default clustering
windows with double-digit margins; a flat per-edge rate cannot do that
because the epsilon decay demands sibling:cousin:cross distance ratios far
steeper than path lengths alone provide.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import ClusterParams, induce_tree
from .corpus import Corpus, SplitCorpus, collate, split
from .metrics import compare_trees
from .ngram import NGramLM
from .tokenizer import train_tokenizer
from .tree import TreeNode, leaf
from .vectors import (EntropyMatrix, build_entropy_matrix, language_vectors,
                      minmax_normalize, write_matrix_tsv)

log = logging.getLogger(__name__)

ALPHABET_BASE = 0x4E00  # CJK block: 20k+ printable, tokenizer-safe chars
MAX_ALPHABET = 20992

# Perturbed-row counts per edge: round(A * delta ** EDGE_EXPONENTS[depth-1]),
# deeper edges reusing the last entry. Depth 1 separates families by roughly
# a third of the alphabet; depths 2 and 3 are a few rows each, sized so the
# cousin distance clears one epsilon step but not the one above it.
EDGE_EXPONENTS = (1.0, 3.92, 4.16)

HEAVY_MASS = 0.98  # mass split over each row's two heavy successor slots


@dataclass(frozen=True)
class PlantedWorld:
    tree: TreeNode
    alphabet: str
    sources: dict[str, np.ndarray]
    delta: float
    seed: int

    def __post_init__(self) -> None:
        a = len(self.alphabet)
        for lang, table in self.sources.items():
            if table.shape != (a, a):
                raise ValueError(f"source table for {lang!r} is not {a}x{a}")
            if not np.allclose(table.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError(f"source rows for {lang!r} do not sum to 1")

    @property
    def langs(self) -> list[str]:
        return self.tree.leaves()


def _base_row(alphabet_size: int) -> np.ndarray:
    """Skewed stochastic vector: two adjacent heavy slots plus a thin tail.

    Two successors, not one: a single heavy slot makes each chain a
    near-deterministic walk over one permutation, and short cycles then trap
    test streams for ~1/tail-mass steps, blowing up per-row visit variance.
    Branching by two mixes in O(log A) steps so visit counts concentrate,
    while contexts stay dense enough (about A * 2^k order-k histories) for
    the smoothed higher-order estimates to be tight.
    """
    block = min(2, alphabet_size - 1)
    p = np.full(alphabet_size, (1.0 - HEAVY_MASS) / (alphabet_size - block))
    p[:block] = HEAVY_MASS / block
    return p


def _edge_rows(alphabet_size: int, delta: float, depth: int) -> int:
    q = EDGE_EXPONENTS[min(depth, len(EDGE_EXPONENTS)) - 1]
    if delta == 0.0:
        return 0
    return min(alphabet_size, max(1, round(alphabet_size * delta ** q)))


def _perturb(shifts: np.ndarray, n_rows: int, rng: np.random.Generator,
             pool: np.ndarray | None = None) -> np.ndarray:
    """Re-derive n_rows row shifts; `pool` marks positions no edge has used.

    Spending each position at most once across the whole tree makes every
    pairwise diff-row count an exact constant (path sums, no union overlap),
    which is what pins the distance ratios the exponent schedule relies on.
    When the pool runs dry the draw falls back to all positions: counts are
    then merely approximate, which only happens at extreme deltas.
    """
    if n_rows <= 0:
        return shifts.copy()
    a = len(shifts)
    if n_rows >= a:
        if pool is not None:
            pool[:] = False
        return rng.permutation(a)
    # Rotating the images of the selected positions keeps the assignment a
    # bijection and changes every selected row (images are distinct). A
    # bijection cannot differ from its parent in exactly one position, so a
    # request for 1 row moves 2.
    take = max(2, n_rows)
    if pool is not None and int(pool.sum()) >= take:
        pos = rng.choice(np.flatnonzero(pool), size=take, replace=False)
        pool[pos] = False
    else:
        pos = rng.choice(a, size=take, replace=False)
    child = shifts.copy()
    child[pos] = np.roll(shifts[pos], 1)
    return child


def generate_world(planted_tree: TreeNode, alphabet_size: int, delta: float,
                   seed: int) -> PlantedWorld:
    """Plant Markov sources on a tree's leaves, diverging along edges.

    Raises:
        ValueError: alphabet_size out of range, delta outside [0, 1], or a
            malformed tree (duplicate leaf labels).
    """
    if not 2 <= alphabet_size <= MAX_ALPHABET:
        raise ValueError(f"alphabet_size must be in [2, {MAX_ALPHABET}], got {alphabet_size}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [0, 1], got {delta}")
    leaves = planted_tree.leaves()
    if len(set(leaves)) != len(leaves):
        raise ValueError("planted tree has duplicate leaf labels")
    rng = np.random.default_rng(seed)
    alphabet = "".join(chr(ALPHABET_BASE + i) for i in range(alphabet_size))
    p0 = _base_row(alphabet_size)
    cols = np.arange(alphabet_size)[None, :]

    def to_table(shifts: np.ndarray) -> np.ndarray:
        # Row c = p0 cyclically shifted by shifts[c], so its heavy slots sit
        # at {shifts[c], shifts[c]+1}. The shift assignment being a bijection
        # then gives every column exactly two heavy predecessors: the table
        # stays doubly stochastic and the stationary distribution uniform.
        return p0[(cols - shifts[:, None]) % alphabet_size]

    sources: dict[str, np.ndarray] = {}
    pool = np.ones(alphabet_size, dtype=bool)

    def descend(node: TreeNode, shifts: np.ndarray, depth: int) -> None:
        if node.is_leaf():
            sources[node.label] = to_table(shifts)
            return
        for child in node.children:
            child_shifts = _perturb(shifts, _edge_rows(alphabet_size, delta, depth + 1),
                                    rng, pool=pool)
            descend(child, child_shifts, depth + 1)

    descend(planted_tree, rng.permutation(alphabet_size), 0)
    return PlantedWorld(planted_tree.copy(), alphabet, sources, delta, seed)


def table_tv(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over rows of the total variation distance between transition rows."""
    return float(np.abs(a - b).sum(axis=1).mean() / 2.0)


def sample_corpus(world: PlantedWorld, lang: str, n_chars: int, seed: int) -> Corpus:
    """One stationary-start chain of n_chars, collated into instances.

    Raises:
        ValueError: unknown lang or n_chars < 1.
    """
    if lang not in world.sources:
        raise ValueError(f"unknown lang {lang!r}; world has {sorted(world.sources)}")
    if n_chars < 1:
        raise ValueError(f"n_chars must be >= 1, got {n_chars}")
    a = len(world.alphabet)
    rng = np.random.default_rng(seed)
    cum = np.cumsum(world.sources[lang], axis=1)
    cum[:, -1] = 1.0 + 1e-12  # guard the u ~ 1.0 edge
    rows = cum.tolist()
    us = rng.random(n_chars)
    state = int(rng.integers(a))
    out = []
    for t in range(n_chars):
        state = bisect_right(rows[state], us[t])
        out.append(state)
    text = "".join(world.alphabet[i] for i in out)
    return collate(Corpus(lang, [text], provenance=f"synth seed={seed}"))


def diagonal_dominant(matrix: EntropyMatrix) -> bool:
    """True when every row's minimum sits on the diagonal (ties count)."""
    row_min = matrix.values.min(axis=1)
    diag = np.diagonal(matrix.values)
    return bool(np.all(diag == row_min))


def planted_eight() -> TreeNode:
    """Fixture: 8 languages, two families of two subfamilies of two."""
    def family(f: str) -> TreeNode:
        return TreeNode(f"fam_{f}", [
            TreeNode(f"sub_{f}a", [leaf(f + "aa"), leaf(f + "ab")]),
            TreeNode(f"sub_{f}b", [leaf(f + "ba"), leaf(f + "bb")]),
        ])
    return TreeNode("Root", [family("f"), family("g")])


@dataclass(frozen=True)
class RecoveryParams:
    seeds: tuple[int, ...] = tuple(range(20))
    alphabet_size: int = 900
    order: int = 4
    alpha: float = 0.01
    cluster: ClusterParams = field(default_factory=ClusterParams)
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    out_dir: str | None = None
    jobs: int = 1


def recovery_experiment(planted_tree: TreeNode, sizes: int | dict[str, int],
                        delta: float, params: RecoveryParams = RecoveryParams()) -> list[dict]:
    """Full pipeline per seed against a planted world; one report row per seed.

    sizes is either one character count for every language or a per-language
    mapping. Each row carries {seed, rf, lca_mae, matrix, diagonal_dominant};
    matrix is the entropy-matrix TSV path (null unless out_dir is set).
    """
    langs = planted_tree.leaves()
    if isinstance(sizes, int):
        sizes = {lang: sizes for lang in langs}
    missing = sorted(set(langs) - set(sizes))
    if missing:
        raise ValueError(f"sizes missing languages: {missing}")
    out_dir = Path(params.out_dir) if params.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    report: list[dict] = []
    for s in params.seeds:
        world = generate_world(planted_tree, params.alphabet_size, delta, seed=s)
        splits: dict[str, SplitCorpus] = {}
        for i, lang in enumerate(langs):
            sample = sample_corpus(world, lang, sizes[lang], seed=s * 1000 + i + 1)
            splits[lang] = split(sample, ratios=params.ratios, seed=s * 1000 + i + 1, floor=1)
        models = []
        for lang in langs:
            tok = train_tokenizer(Corpus(lang, splits[lang].train))
            model = NGramLM(tok, lang, order=params.order, alpha=params.alpha)
            model.fit(splits[lang].train)
            models.append(model)
        tests = [Corpus(lang, splits[lang].test) for lang in langs]
        matrix = build_entropy_matrix(models, tests, jobs=params.jobs)
        vectors = minmax_normalize(language_vectors(matrix, mode="row"))
        induced = induce_tree(vectors, params.cluster)
        scored = compare_trees(planted_tree, induced)
        matrix_path = None
        if out_dir is not None:
            matrix_path = f"matrix_seed{s}.tsv"  # relative: reports relocate with out_dir
            write_matrix_tsv(matrix, out_dir / matrix_path)
        row = {
            "seed": s,
            "rf": scored.rf,
            "lca_mae": scored.lca_mae,
            "matrix": matrix_path,
            "diagonal_dominant": diagonal_dominant(matrix),
        }
        log.debug("recovery seed=%s rf=%s lca_mae=%.4f", s, row["rf"], row["lca_mae"])
        report.append(row)
    return report
