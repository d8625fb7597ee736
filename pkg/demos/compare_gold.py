"""
Scoring an induced tree against a reference tree
================================================

The two comparison metrics and the bookkeeping around them: Robinson-Foulds
distance counts the clades the trees disagree on, and the LCA-depth MAE
measures how far pairwise join depths drift. Reference trees usually cover
more languages than an experiment does, so the gold tree is pruned to the
shared leaf set first.
"""

from entrolang.metrics import clades, compare_trees, lca_depth
from entrolang.tree import parse_newick, prune_tree, write_newick

# A reference tree over six languages. Branch lengths and inner comments are
# accepted and ignored; only the shape matters to these metrics.
gold_full = parse_newick(
    "(((deu:0.2,eng:0.3)west,(dan,swe)north)germanic,(fra,spa)romance)Root;")
print("gold, all languages:   ", write_newick(gold_full))

# The experiment only produced five of the six, and it got one thing wrong:
# it paired deu with dan instead of eng. Prune the gold tree to the shared
# leaves before comparing; unary wrappers left behind by pruning are
# suppressed automatically.
candidate = parse_newick("(((deu,dan)x,eng)y,(fra,spa)z)Root;")
gold = prune_tree(gold_full, candidate.leaves())
print("gold, pruned to shared:", write_newick(gold))

# The clade sets drive the RF distance: each tree contributes the proper
# subsets of languages its internal nodes group together.
gold_clades = clades(gold)
cand_clades = clades(candidate)
print("\nclades only in gold:     ",
      sorted(sorted(c) for c in gold_clades - cand_clades))
print("clades only in candidate:",
      sorted(sorted(c) for c in cand_clades - gold_clades))

report = compare_trees(gold, candidate)
print(f"\nrf distance: {report.rf}")
print(f"lca mae:     {report.lca_mae:.4f}")

# The MAE averages |depth difference| of the lowest common ancestor over all
# language pairs. Only the two pairs touched by the swap move: deu now joins
# dan at depth 2 and eng at depth 1, the mirror image of the gold tree.
for pair in (("deu", "eng"), ("deu", "dan"), ("deu", "fra")):
    print(f"gold lca depth {pair}: {lca_depth(gold, *pair)}   "
          f"candidate: {lca_depth(candidate, *pair)}")
