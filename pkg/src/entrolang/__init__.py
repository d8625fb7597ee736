"""Language vectors from cross-lingual cross-entropy, and typology trees.

Train a monolingual character-level LM per language, score every model on
every language's held-out text, and read each row of the resulting entropy
matrix as that language's dense vector. Recursive density clustering over
the normalized vectors yields a hierarchical typology tree that can be
scored against a gold tree with Robinson-Foulds distance and LCA-depth MAE.
"""

from .clustering import ClusterParams, agglomerative_tree, dbscan, induce_tree
from .corpus import Corpus, SplitCorpus, collate, load_corpus, split
from .lm import LMConfig, NeuralConfig, UniformLM, cross_entropy, perplexity
from .metrics import (TreeReport, clades, compare_trees, lca_depth, lca_mae,
                      rf_distance)
from .ngram import NGramLM
from .synth import (PlantedWorld, RecoveryParams, generate_world, planted_eight,
                    recovery_experiment, sample_corpus)
from .tokenizer import CharTokenizer, train_tokenizer
from .tree import TreeNode, TypologyTree, parse_newick, prune_tree, write_newick
from .vectors import (EntropyMatrix, VectorSet, build_entropy_matrix,
                      concat_vectors, language_vectors, load_external_vectors,
                      minmax_normalize)

__version__ = "0.1.0"

__all__ = [
    "ClusterParams", "agglomerative_tree", "dbscan", "induce_tree",
    "Corpus", "SplitCorpus", "collate", "load_corpus", "split",
    "LMConfig", "NeuralConfig", "UniformLM", "cross_entropy", "perplexity",
    "TreeReport", "clades", "compare_trees", "lca_depth", "lca_mae", "rf_distance",
    "NGramLM",
    "PlantedWorld", "RecoveryParams", "generate_world", "planted_eight",
    "recovery_experiment", "sample_corpus",
    "CharTokenizer", "train_tokenizer",
    "TreeNode", "TypologyTree", "parse_newick", "prune_tree", "write_newick",
    "EntropyMatrix", "VectorSet", "build_entropy_matrix", "concat_vectors",
    "language_vectors", "load_external_vectors", "minmax_normalize",
    "__version__",
]
