"""Newick parsing and writing, canonical form, pruning, JSON export."""

import json
import random

import pytest

from entrolang.tree import (NewickError, TreeNode, canonical, leaf,
                            parse_newick, prune_tree, read_newick_file,
                            suppress_unary, tree_to_dict, write_newick,
                            write_tree_json)


def random_tree(rng, n_leaves, quoted=False):
    labels = [f"l{i:03d}" for i in range(n_leaves)]
    if quoted:
        labels[0] = "two words"
        if n_leaves > 1:
            labels[1] = "it's(odd),yes"
    nodes = [leaf(name) for name in labels]
    counter = 0
    while len(nodes) > 1:
        take = rng.randint(2, min(4, len(nodes)))
        rng.shuffle(nodes)
        group = [nodes.pop() for _ in range(take)]
        label = f"n{counter}" if rng.random() < 0.5 else ""
        counter += 1
        nodes.append(TreeNode(label, group))
    return nodes[0]


class TestParse:
    def test_plain_binary_tree(self):
        t = parse_newick("((a,b)x,(c,d)y)root;")
        assert t.label == "root"
        assert t.leaves() == ["a", "b", "c", "d"]
        assert [c.label for c in t.children] == ["x", "y"]

    def test_branch_lengths_are_discarded(self):
        t = parse_newick("(a:0.1,b:2e-3)n:1.5;")
        assert write_newick(t) == "(a,b)n;"

    def test_comments_are_skipped(self):
        t = parse_newick("[made upstream](a,[inner]b);")
        assert write_newick(t) == "(a,b);"

    def test_quoted_labels(self):
        t = parse_newick("('two words','it''s')x;")
        assert t.leaves() == ["two words", "it's"]

    def test_whitespace_is_insignificant(self):
        a = parse_newick("((a,b) , c) ;")
        b = parse_newick("((a,b),c);")
        assert a == b

    def test_single_leaf(self):
        assert parse_newick("abc;") == leaf("abc")


class TestParseErrors:
    @pytest.mark.parametrize("text,message", [
        ("(a,b;", "unbalanced parentheses (opened at 0) at position 4"),
        ("(a,b)", "expected ';' terminator at position 5"),
        ("(a,b);x", "trailing content after ';' at position 6"),
        ("(a,[b);", "unterminated [comment] at position 3"),
        ("('a,b);", "unterminated quoted label at position 1"),
        ("(a,b):;", "expected branch length after ':' at position 6"),
        ("(,a);", "expected a label at position 1"),
    ])
    def test_position_reporting(self, text, message):
        with pytest.raises(NewickError) as err:
            parse_newick(text)
        assert str(err.value) == message

    def test_newick_error_is_a_value_error_with_pos(self):
        with pytest.raises(ValueError):
            parse_newick("(a,b)")
        try:
            parse_newick("(a,b)")
        except NewickError as e:
            assert e.pos == 5

    def test_empty_input(self):
        with pytest.raises(ValueError, match="empty Newick input"):
            parse_newick("   ")

    def test_duplicate_leaves(self):
        with pytest.raises(ValueError, match="duplicate leaf label 'a'"):
            parse_newick("(a,(b,a));")


class TestWrite:
    def test_children_are_ordered_by_smallest_leaf(self):
        t = TreeNode("", [TreeNode("", [leaf("d"), leaf("b")]), leaf("a")])
        assert write_newick(t) == "(a,(b,d));"

    def test_labels_needing_quotes_are_quoted(self):
        t = TreeNode("", [leaf("two words"), leaf("it's")])
        assert write_newick(t) == "('it''s','two words');"

    def test_comment_prefix(self):
        t = TreeNode("", [leaf("a"), leaf("b")])
        assert write_newick(t, comment="config_hash=abc") == "[config_hash=abc](a,b);"

    def test_round_trip_random_trees(self):
        rng = random.Random(0)
        for trial in range(120):
            t = random_tree(rng, rng.randint(1, 16), quoted=trial % 5 == 0)
            text = write_newick(t)
            back = parse_newick(text)
            assert back == canonical(t)
            assert write_newick(back) == text


class TestCanonical:
    def test_orders_nested_children(self):
        t = TreeNode("r", [TreeNode("x", [leaf("z"), leaf("m")]), leaf("a")])
        c = canonical(t)
        assert [k.label for k in c.children] == ["a", "x"]
        assert [k.label for k in c.children[1].children] == ["m", "z"]

    def test_does_not_mutate_the_input(self):
        t = TreeNode("r", [leaf("b"), leaf("a")])
        canonical(t)
        assert [k.label for k in t.children] == ["b", "a"]


class TestSuppressUnary:
    def test_collapses_single_child_chains(self):
        t = TreeNode("Root", [TreeNode("X", [TreeNode("Y", [leaf("a"), leaf("b")])])])
        out = suppress_unary(t)
        assert out.label == "Y"
        assert out.leaves() == ["a", "b"]

    def test_collapses_chains_below_branching_nodes(self):
        t = TreeNode("r", [TreeNode("u", [leaf("a")]), leaf("b")])
        out = suppress_unary(t)
        assert write_newick(out) == "(a,b)r;"

    def test_leaf_passthrough(self):
        assert suppress_unary(leaf("a")) == leaf("a")


class TestPrune:
    def test_keeps_subset_and_suppresses_unary(self):
        t = parse_newick("((a,b)x,(c,d)y)r;")
        out = prune_tree(t, {"a", "c"})
        assert write_newick(out) == "(a,c)r;"

    def test_whole_subtree_removal(self):
        t = parse_newick("((a,b)x,(c,d)y)r;")
        out = prune_tree(t, {"c", "d"})
        assert write_newick(out) == "(c,d)y;"

    def test_empty_keep_set(self):
        with pytest.raises(ValueError, match="at least one leaf label"):
            prune_tree(leaf("a"), set())

    def test_unknown_labels(self):
        t = parse_newick("(a,b);")
        with pytest.raises(ValueError, match=r"unknown leaf labels in keep set: \['z'\]"):
            prune_tree(t, {"a", "z"})


class TestNodeBasics:
    def test_equality_and_hash_are_structural(self):
        a = parse_newick("((a,b)x,c);")
        b = parse_newick("((a,b)x,c);")
        assert a == b
        assert hash(a) == hash(b)
        assert a != parse_newick("((a,b)y,c);")

    def test_copy_is_deep(self):
        t = parse_newick("((a,b),c);")
        dup = t.copy()
        dup.children[0].children[0].label = "z"
        assert t.leaves() == ["a", "b", "c"]

    def test_walk_is_preorder(self):
        t = parse_newick("((a,b)x,c)r;")
        assert [n.label for n in t.walk()] == ["r", "x", "a", "b", "c"]


def test_tree_to_dict_tracks_depth():
    t = parse_newick("((a,b)x,c)r;")
    d = tree_to_dict(t)
    assert d["label"] == "r" and d["depth"] == 0
    assert d["children"][0]["depth"] == 1
    assert d["children"][0]["children"][0] == {"label": "a", "depth": 2, "children": []}


def test_write_tree_json(tmp_path):
    t = parse_newick("(a,b)r;")
    p = tmp_path / "tree.json"
    write_tree_json(t, p, extra={"config_hash": "deadbeef"})
    doc = json.loads(p.read_text(encoding="utf-8"))
    assert doc["config_hash"] == "deadbeef"
    assert doc["tree"]["label"] == "r"
    assert p.read_text(encoding="utf-8").endswith("\n")


def test_read_newick_file(tmp_path):
    p = tmp_path / "tree.nwk"
    p.write_text("(a,b)r;\n", encoding="utf-8")
    assert write_newick(read_newick_file(p)) == "(a,b)r;"
    with pytest.raises(FileNotFoundError, match="tree file not found"):
        read_newick_file(tmp_path / "nope.nwk")
