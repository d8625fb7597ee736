"""Rooted labeled trees: Newick parsing/writing, pruning, JSON export.

Leaves carry language codes; internal nodes carry optional labels (induced
trees use `Cluster_L{level}_{k}` / `Unsplit_L{level}_{k}` with root `Root`).
Functions treat trees as immutable and return new nodes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator


class TreeNode:

    __slots__ = ("label", "children")

    def __init__(self, label: str = "", children: list["TreeNode"] | None = None):
        self.label = label
        self.children = list(children) if children else []

    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list[str]:
        """Leaf labels in tree order."""
        if self.is_leaf():
            return [self.label]
        out: list[str] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def walk(self) -> Iterator["TreeNode"]:
        """All nodes, preorder."""
        yield self
        for child in self.children:
            yield from child.walk()

    def copy(self) -> "TreeNode":
        return TreeNode(self.label, [c.copy() for c in self.children])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TreeNode):
            return NotImplemented
        return self.label == other.label and self.children == other.children

    def __hash__(self) -> int:
        return hash((self.label, tuple(self.children)))

    def __repr__(self) -> str:
        return f"TreeNode({write_newick(self)!r})"


TypologyTree = TreeNode


def leaf(label: str) -> TreeNode:
    return TreeNode(label)


def _min_leaf(node: TreeNode) -> str:
    return min(node.leaves())


def canonical(tree: TreeNode) -> TreeNode:
    """Copy with children everywhere ordered by smallest leaf label."""
    if tree.is_leaf():
        return TreeNode(tree.label)
    kids = sorted((canonical(c) for c in tree.children), key=_min_leaf)
    return TreeNode(tree.label, kids)


class NewickError(ValueError):

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


_RESERVED = set("(),;:[]'")


def parse_newick(text: str) -> TreeNode:
    """Parse one `;`-terminated Newick string.

    Accepts optional internal labels, optional branch lengths (discarded),
    bracket comments (skipped), and single-quoted labels. Leaf labels must be
    unique.

    Raises:
        NewickError: malformed input, with the offending position.
        ValueError: duplicate leaf labels or empty input.
    """
    if not text or not text.strip():
        raise ValueError("empty Newick input")
    pos = 0
    n = len(text)

    def skip_space() -> None:
        nonlocal pos
        while pos < n:
            c = text[pos]
            if c.isspace():
                pos += 1
            elif c == "[":
                end = text.find("]", pos + 1)
                if end == -1:
                    raise NewickError("unterminated [comment]", pos)
                pos = end + 1
            else:
                return

    def read_label() -> str:
        nonlocal pos
        skip_space()
        if pos < n and text[pos] == "'":
            start = pos
            pos += 1
            out: list[str] = []
            while pos < n:
                if text[pos] == "'":
                    if pos + 1 < n and text[pos + 1] == "'":
                        out.append("'")
                        pos += 2
                        continue
                    pos += 1
                    return "".join(out)
                out.append(text[pos])
                pos += 1
            raise NewickError("unterminated quoted label", start)
        start = pos
        while pos < n and not text[pos].isspace() and text[pos] not in _RESERVED:
            pos += 1
        return text[start:pos]

    def skip_branch_length() -> None:
        nonlocal pos
        skip_space()
        if pos < n and text[pos] == ":":
            pos += 1
            skip_space()
            start = pos
            while pos < n and (text[pos].isdigit() or text[pos] in ".+-eE"):
                pos += 1
            if pos == start:
                raise NewickError("expected branch length after ':'", pos)

    def subtree() -> TreeNode:
        nonlocal pos
        skip_space()
        if pos >= n:
            raise NewickError("unexpected end of input", pos)
        if text[pos] == "(":
            open_pos = pos
            pos += 1
            children = [subtree()]
            skip_space()
            while pos < n and text[pos] == ",":
                pos += 1
                children.append(subtree())
                skip_space()
            if pos >= n or text[pos] != ")":
                raise NewickError(f"unbalanced parentheses (opened at {open_pos})", pos)
            pos += 1
            label = read_label()
            skip_branch_length()
            return TreeNode(label, children)
        label = read_label()
        if not label:
            raise NewickError("expected a label", pos)
        skip_branch_length()
        return TreeNode(label)

    root = subtree()
    skip_space()
    if pos >= n or text[pos] != ";":
        raise NewickError("expected ';' terminator", pos)
    pos += 1
    skip_space()
    if pos < n:
        raise NewickError("trailing content after ';'", pos)
    seen: set[str] = set()
    for name in root.leaves():
        if not name:
            raise ValueError("Newick tree contains an unlabeled leaf")
        if name in seen:
            raise ValueError(f"duplicate leaf label {name!r}")
        seen.add(name)
    return root


def _format_label(label: str) -> str:
    if label and not any(c in _RESERVED or c.isspace() for c in label):
        return label
    if not label:
        return ""
    return "'" + label.replace("'", "''") + "'"


def write_newick(tree: TreeNode, comment: str | None = None) -> str:
    """Serialize in canonical form (children ordered by smallest leaf label)."""

    def emit(node: TreeNode) -> str:
        if node.is_leaf():
            return _format_label(node.label)
        inner = ",".join(emit(c) for c in sorted(node.children, key=_min_leaf))
        return f"({inner}){_format_label(node.label)}"

    prefix = f"[{comment}]" if comment else ""
    return f"{prefix}{emit(tree)};"


def read_newick_file(path: str | Path) -> TreeNode:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"tree file not found: {path}")
    return parse_newick(path.read_text(encoding="utf-8").strip())


def suppress_unary(tree: TreeNode) -> TreeNode:
    """Collapse chains of single-child internal nodes; the child's node survives."""
    node = tree
    while len(node.children) == 1:
        node = node.children[0]
    if node.is_leaf():
        return TreeNode(node.label)
    return TreeNode(node.label, [suppress_unary(c) for c in node.children])


def prune_tree(tree: TreeNode, keep: set[str]) -> TreeNode:
    """Restrict leaves to `keep`, suppressing any unary nodes that result.

    Raises:
        ValueError: keep is empty or mentions labels not in the tree.
    """
    if not keep:
        raise ValueError("keep set must contain at least one leaf label")
    have = set(tree.leaves())
    unknown = sorted(set(keep) - have)
    if unknown:
        raise ValueError(f"unknown leaf labels in keep set: {unknown}")

    def restrict(node: TreeNode) -> TreeNode | None:
        if node.is_leaf():
            return TreeNode(node.label) if node.label in keep else None
        kids = [r for r in (restrict(c) for c in node.children) if r is not None]
        if not kids:
            return None
        return TreeNode(node.label, kids)

    restricted = restrict(tree)
    assert restricted is not None  # keep is nonempty and validated
    return suppress_unary(restricted)


def tree_to_dict(tree: TreeNode, depth: int = 0) -> dict:
    """Nested {label, depth, children} mapping for JSON export."""
    return {
        "label": tree.label,
        "depth": depth,
        "children": [tree_to_dict(c, depth + 1) for c in tree.children],
    }


def write_tree_json(tree: TreeNode, path: str | Path, extra: dict | None = None) -> None:
    doc = dict(extra or {})
    doc["tree"] = tree_to_dict(tree)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
