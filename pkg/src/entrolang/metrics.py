"""Tree agreement metrics: rooted Robinson-Foulds distance and LCA-depth MAE.

The raw functions score trees exactly as given, unary chains included, so
depth bookkeeping stays honest in tests. compare_trees() is the reporting
entry point and suppresses unary nodes first, so formatting quirks in a gold
tree cannot inflate depths.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .tree import TreeNode, suppress_unary
from .vectors import format_sig9


def _leaf_labels(tree: TreeNode) -> list[str]:
    labels = tree.leaves()
    seen: set[str] = set()
    for lab in labels:
        if lab in seen:
            raise ValueError(f"duplicate leaf label {lab!r}")
        seen.add(lab)
    return labels


def clades(tree: TreeNode) -> set[frozenset[str]]:
    """Nontrivial clades: leaf set of every internal node, excluding
    singletons and the full leaf set."""
    all_leaves = frozenset(_leaf_labels(tree))
    out: set[frozenset[str]] = set()
    for node in tree.walk():
        if node.is_leaf():
            continue
        cl = frozenset(node.leaves())
        if len(cl) >= 2 and cl != all_leaves:
            out.add(cl)
    return out


def _require_same_leaves(t1: TreeNode, t2: TreeNode) -> frozenset[str]:
    s1 = frozenset(_leaf_labels(t1))
    s2 = frozenset(_leaf_labels(t2))
    if s1 != s2:
        only1 = sorted(s1 - s2)
        only2 = sorted(s2 - s1)
        raise ValueError(
            f"trees have different leaf sets: only in first {only1}, only in second {only2}"
        )
    return s1


def rf_distance(t1: TreeNode, t2: TreeNode) -> int:
    """Rooted RF: size of the symmetric difference of nontrivial clade sets."""
    _require_same_leaves(t1, t2)
    return len(clades(t1) ^ clades(t2))


def lca_depth(tree: TreeNode, a: str, b: str) -> int:
    """Depth of the lowest common ancestor of leaves a and b; root depth 0.

    Raises:
        ValueError: a == b, or either leaf is missing from the tree.
    """
    if a == b:
        raise ValueError("lca_depth needs two distinct leaves")

    def path_to(label: str) -> list[TreeNode] | None:
        stack: list[tuple[TreeNode, list[TreeNode]]] = [(tree, [tree])]
        while stack:
            node, path = stack.pop()
            if node.is_leaf() and node.label == label:
                return path
            for child in node.children:
                stack.append((child, path + [child]))
        return None

    path_a = path_to(a)
    if path_a is None:
        raise ValueError(f"unknown leaf {a!r}")
    path_b = path_to(b)
    if path_b is None:
        raise ValueError(f"unknown leaf {b!r}")
    depth = -1
    for x, y in zip(path_a, path_b):
        if x is not y:
            break
        depth += 1
    return depth


def pair_lca_depths(tree: TreeNode) -> dict[frozenset[str], int]:
    """LCA depth for every unordered leaf pair, one traversal."""
    _leaf_labels(tree)
    depths: dict[frozenset[str], int] = {}

    def rec(node: TreeNode, depth: int) -> list[str]:
        if node.is_leaf():
            return [node.label]
        per_child = [rec(c, depth + 1) for c in node.children]
        for i in range(len(per_child)):
            for j in range(i + 1, len(per_child)):
                for x in per_child[i]:
                    for y in per_child[j]:
                        depths[frozenset((x, y))] = depth
        return [lab for leaves in per_child for lab in leaves]

    rec(tree, 0)
    return depths


def lca_mae(t1: TreeNode, t2: TreeNode) -> float:
    """Mean |depth difference| of LCAs over all C(n,2) unordered leaf pairs.

    Raises:
        ValueError: leaf-set mismatch or fewer than 2 leaves.
    """
    leaves = _require_same_leaves(t1, t2)
    if len(leaves) < 2:
        raise ValueError(f"lca_mae needs at least 2 leaves, got {len(leaves)}")
    d1 = pair_lca_depths(t1)
    d2 = pair_lca_depths(t2)
    total = sum(abs(d1[pair] - d2[pair]) for pair in d1)
    return total / len(d1)


@dataclass(frozen=True)
class TreeReport:
    rf: int
    lca_mae: float
    n_leaves: int
    leaf_set_hash: str

    def __post_init__(self) -> None:
        if self.rf < 0:
            raise ValueError(f"rf must be >= 0, got {self.rf}")
        if self.lca_mae < 0:
            raise ValueError(f"lca_mae must be >= 0, got {self.lca_mae}")


def leaf_set_hash(labels: frozenset[str] | set[str]) -> str:
    return hashlib.sha256("\n".join(sorted(labels)).encode("utf-8")).hexdigest()


def compare_trees(gold: TreeNode, candidate: TreeNode) -> TreeReport:
    """Score a candidate tree against gold after suppressing unary nodes."""
    gold = suppress_unary(gold)
    candidate = suppress_unary(candidate)
    leaves = _require_same_leaves(gold, candidate)
    return TreeReport(
        rf=rf_distance(gold, candidate),
        lca_mae=lca_mae(gold, candidate),
        n_leaves=len(leaves),
        leaf_set_hash=leaf_set_hash(leaves),
    )


def report_json(report: TreeReport, gold_name: str, candidate_name: str,
                extra: dict | None = None) -> str:
    """Compare report as JSON; `metrics` carries exactly the mae and rf keys."""
    payload = {
        "gold": gold_name,
        "candidate": candidate_name,
        "n_leaves": report.n_leaves,
        "leaf_set_hash": report.leaf_set_hash,
        "metrics": {"mae": report.lca_mae, "rf": report.rf},
    }
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_tsv_line(report: TreeReport, gold_name: str, candidate_name: str) -> str:
    return f"{gold_name}\t{candidate_name}\t{report.rf}\t{format_sig9(report.lca_mae)}\n"
