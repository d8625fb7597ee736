"""Cross-entropy matrices and dense language vectors.

The n x n entropy matrix holds cross_entropy(model of L_i, test corpus of
L_j) in nats per token; row i is the vector for language L_i. Vectors can be
min-max normalized per dimension and concatenated with external inventories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus
from .lm import LanguageModel, cross_entropy


@dataclass(frozen=True)
class EntropyMatrix:
    langs: tuple[str, ...]
    values: np.ndarray  # shape (n, n), row = model language, column = corpus language

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        n = len(self.langs)
        if vals.shape != (n, n):
            raise ValueError(f"matrix shape {vals.shape} does not match {n} languages")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite entropy matrix entry")
        if np.any(vals <= 0):
            raise ValueError("entropy matrix entries must be > 0")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "langs", tuple(self.langs))


@dataclass(frozen=True)
class VectorSet:
    langs: tuple[str, ...]
    vectors: np.ndarray  # shape (n, dim)
    source: str = "entropy"  # entropy | external | concat

    def __post_init__(self) -> None:
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape[0] != len(self.langs):
            raise ValueError(f"vector array shape {vecs.shape} does not match {len(self.langs)} languages")
        if not np.all(np.isfinite(vecs)):
            raise ValueError("non-finite vector entry")
        if len(set(self.langs)) != len(self.langs):
            raise ValueError("duplicate language in vector set")
        vecs.flags.writeable = False
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "langs", tuple(self.langs))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.langs)


def build_entropy_matrix(models: Sequence[LanguageModel],
                         test_corpora: Sequence[Corpus],
                         jobs: int = 1) -> EntropyMatrix:
    """Score every model on every test corpus.

    Row and column order follow the model order; corpora may arrive in any
    order but must cover exactly the same language set. Cells are independent
    pure evaluations, so the result does not depend on scheduling.

    Raises:
        ValueError: language mismatch between models and corpora, or fewer
            than one language.
    """
    if not models:
        raise ValueError("need at least one model")
    langs = [m.lang for m in models]
    if len(set(langs)) != len(langs):
        raise ValueError(f"duplicate model languages: {langs}")
    by_lang = {c.lang: c for c in test_corpora}
    if set(by_lang) != set(langs) or len(test_corpora) != len(langs):
        raise ValueError(f"model languages {sorted(langs)} do not match corpus languages {sorted(by_lang)}")
    corpora = [by_lang[lang] for lang in langs]
    n = len(langs)
    values = np.zeros((n, n))
    cells = [(i, j) for i in range(n) for j in range(n)]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for (i, j), val in zip(cells, pool.map(
                    lambda ij: cross_entropy(models[ij[0]], corpora[ij[1]]), cells)):
                values[i, j] = val
    else:
        for i, j in cells:
            values[i, j] = cross_entropy(models[i], corpora[j])
    return EntropyMatrix(langs=tuple(langs), values=values)


def language_vectors(matrix: EntropyMatrix, mode: str = "row") -> VectorSet:
    """Extract per-language vectors from the entropy matrix.

    mode "row" (default) takes row i for L_i; "column" takes column i;
    "row+column" concatenates both.
    """
    if mode == "row":
        vecs = matrix.values.copy()
    elif mode == "column":
        vecs = matrix.values.T.copy()
    elif mode == "row+column":
        vecs = np.concatenate([matrix.values, matrix.values.T], axis=1)
    else:
        raise ValueError(f"unknown vector mode {mode!r}: expected row, column, or row+column")
    return VectorSet(langs=matrix.langs, vectors=vecs, source="entropy")


def minmax_normalize(vs: VectorSet) -> VectorSet:
    """Rescale each dimension to [0, 1]; constant dimensions map to zeros."""
    if len(vs) < 2:
        raise ValueError("min-max normalization needs at least 2 languages")
    lo = vs.vectors.min(axis=0)
    hi = vs.vectors.max(axis=0)
    span = hi - lo
    constant = span == 0
    span = np.where(constant, 1.0, span)
    out = (vs.vectors - lo) / span
    out[:, constant] = 0.0
    return VectorSet(langs=vs.langs, vectors=out, source=vs.source)


def concat_vectors(a: VectorSet, b: VectorSet) -> VectorSet:
    """Per-language concatenation a ++ b; language order follows a.

    Raises:
        ValueError: empty operand or language-set mismatch.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("cannot concatenate an empty vector set")
    if set(a.langs) != set(b.langs):
        raise ValueError(f"language sets differ: {sorted(set(a.langs) ^ set(b.langs))}")
    order = {lang: i for i, lang in enumerate(b.langs)}
    b_rows = b.vectors[[order[lang] for lang in a.langs]]
    return VectorSet(langs=a.langs, vectors=np.concatenate([a.vectors, b_rows], axis=1),
                     source="concat")


def load_external_vectors(path: str | Path) -> VectorSet:
    """Read a delimited vector file with header `lang,f1,...,fk` (or tabs).

    Missing or non-numeric cells are hard errors naming (row, column); this
    toolkit does not impute.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"vector file not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines()
             if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"empty vector file: {path}")
    delim = "\t" if "\t" in lines[0] else ","
    header = lines[0].split(delim)
    if not header or header[0] != "lang":
        raise ValueError(f"{path}: first header column must be 'lang', got {header[:1]}")
    feature_names = header[1:]
    if not feature_names:
        raise ValueError(f"{path}: no feature columns in header")
    langs: list[str] = []
    rows: list[list[float]] = []
    for line in lines[1:]:
        cells = line.split(delim)
        lang = cells[0]
        if lang in langs:
            raise ValueError(f"{path}: duplicate language row {lang!r}")
        row: list[float] = []
        for k, name in enumerate(feature_names):
            cell = cells[k + 1].strip() if k + 1 < len(cells) else ""
            if cell == "":
                raise ValueError(f"missing value at ({lang}, {name})")
            try:
                row.append(float(cell))
            except ValueError:
                raise ValueError(f"non-numeric value at ({lang}, {name}): {cell!r}") from None
        langs.append(lang)
        rows.append(row)
    if not langs:
        raise ValueError(f"{path}: no language rows")
    return VectorSet(langs=tuple(langs), vectors=np.asarray(rows), source="external")


def format_sig9(x: float) -> str:
    """9 significant digits, the TSV export precision."""
    if x != x or math.isinf(x):
        raise ValueError(f"cannot format non-finite value {x}")
    return f"{x:.9g}"


def write_vectors_tsv(vs: VectorSet, path: str | Path,
                      comment: str | None = None) -> None:
    """Write `lang<TAB>f1...` TSV with 9-significant-digit values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("lang\t" + "\t".join(f"f{k + 1}" for k in range(vs.dim)))
    for lang, row in zip(vs.langs, vs.vectors):
        lines.append(lang + "\t" + "\t".join(format_sig9(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_matrix_tsv(matrix: EntropyMatrix, path: str | Path,
                     comment: str | None = None) -> None:
    write_vectors_tsv(language_vectors(matrix, mode="row"), path, comment=comment)


def read_matrix_tsv(path: str | Path) -> EntropyMatrix:
    """Read a square matrix TSV written by write_matrix_tsv (columns follow rows)."""
    vs = load_external_vectors(path)
    n = len(vs.langs)
    if vs.dim != n:
        raise ValueError(f"{path}: expected a square {n}x{n} matrix, got dim {vs.dim}")
    return EntropyMatrix(langs=vs.langs, values=vs.vectors)
