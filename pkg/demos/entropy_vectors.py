"""
Language vectors from cross-entropy, end to end on a toy corpus
===============================================================

Three tiny "languages" built from skewed character inventories. A character
model is fit per language, every model scores every language's held-out text,
and the rows of the resulting cross-entropy matrix become language vectors.
Languages sharing characters (aaa/bbb share "ab", bbb/ccc share "h") should
end up closer than the disjoint pairs.
"""

import random

from entrolang.corpus import Corpus, collate, split
from entrolang.ngram import NGramLM
from entrolang.tokenizer import train_tokenizer
from entrolang.vectors import (build_entropy_matrix, language_vectors,
                               minmax_normalize)

POOLS = {
    "aaa": "aabbccddee ",
    "bbb": "aabbffgghh ",
    "ccc": "hhiijjkkll ",
}

# Sample sentences per language, pack them into instances of at most 256
# characters, and carve off held-out text. The floor of 1 keeps the usual
# minimum validation/test sizes out of the way at toy scale.
splits = {}
for lang, pool in POOLS.items():
    rng = random.Random(lang)
    sentences = ["".join(rng.choice(pool) for _ in range(rng.randint(30, 60)))
                 for _ in range(400)]
    corpus = collate(Corpus(lang=lang, instances=sentences), max_chars=256)
    splits[lang] = split(corpus, seed=0, floor=1)
    print(f"{lang}: {len(splits[lang].train)} train / "
          f"{len(splits[lang].val)} val / {len(splits[lang].test)} test instances")

# One tokenizer and one order-3 model per language, trained on its own split.
models = []
tests = []
for lang, sc in splits.items():
    tokenizer = train_tokenizer(Corpus(lang=lang, instances=sc.train))
    models.append(NGramLM(tokenizer, lang=lang, order=3).fit(sc.train))
    tests.append(Corpus(lang=lang, instances=sc.test))

# Every model scores every language's test text: entry (i, j) is how hard
# language j's text is for language i's model, in nats per character.
matrix = build_entropy_matrix(models, tests)
print("\ncross-entropy matrix (rows = models, columns = corpora):")
print("      " + "  ".join(f"{lang:>6}" for lang in matrix.langs))
for lang, row in zip(matrix.langs, matrix.values):
    print(f"{lang:>6}" + "  ".join(f"{x:6.3f}" for x in row))

# The diagonal should be the row minimum: a language's own model reads it
# best. Off-diagonal asymmetry is expected; the matrix is not a metric.
vectors = minmax_normalize(language_vectors(matrix, mode="row"))
print("\nmin-max normalized row vectors:")
for lang, row in zip(vectors.langs, vectors.vectors):
    print(f"{lang:>6}" + "  ".join(f"{x:6.3f}" for x in row))
