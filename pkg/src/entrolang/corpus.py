"""Corpus loading, instance collation, and deterministic train/val/test splitting.

A corpus is a list of text instances for one language. Raw input is one
sentence per line; sentences are collated into newline-joined instances of
bounded character length before modeling.
"""

from __future__ import annotations

import os
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_MAX_SENTENCES = 1_000_000
DEFAULT_MAX_CHARS = 1024
DEFAULT_RATIOS = (0.7, 0.2, 0.1)
DEFAULT_FLOOR = 1500

_LANG_RE = re.compile(r"^[a-z]{3}$")


@dataclass
class Corpus:
    """Text instances for one language.

    Args:
        lang: ISO 639-3 style code, three lowercase letters.
        instances: nonempty text instances, in order.
        provenance: where the text came from (path or URI-ish tag).
    """

    lang: str
    instances: list[str] = field(default_factory=list)
    provenance: str = ""

    def __post_init__(self) -> None:
        if not _LANG_RE.match(self.lang):
            raise ValueError(f"invalid language code {self.lang!r}: expected three lowercase letters")
        for i, inst in enumerate(self.instances):
            if not inst:
                raise ValueError(f"empty instance at index {i} in corpus {self.lang!r}")

    def __len__(self) -> int:
        return len(self.instances)


@dataclass
class SplitCorpus:
    """Disjoint train/val/test instance lists produced by `split`."""

    lang: str
    train: list[str]
    val: list[str]
    test: list[str]
    seed: int

    @property
    def total(self) -> int:
        return len(self.train) + len(self.val) + len(self.test)


def load_corpus(path: str | Path, lang: str, max_sentences: int = DEFAULT_MAX_SENTENCES,
                provenance: str | None = None) -> Corpus:
    """Read a one-sentence-per-line UTF-8 file, dropping blank lines.

    Keeps at most `max_sentences` sentences (the first ones, in file order).

    Raises:
        FileNotFoundError: unreadable path.
        ValueError: undecodable content or no usable sentences.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ValueError(f"corpus file {path} is not valid UTF-8: {e}") from None
    sentences: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        sentences.append(line)
        if len(sentences) >= max_sentences:
            break
    if not sentences:
        raise ValueError(f"no usable sentences in {path}")
    return Corpus(lang=lang, instances=sentences,
                  provenance=provenance if provenance is not None else str(path))


def collate(corpus: Corpus, max_chars: int = DEFAULT_MAX_CHARS) -> Corpus:
    """Greedily pack sentences into newline-joined instances of <= max_chars chars.

    Consecutive sentences are joined with a single newline while the running
    length stays within `max_chars`. A single sentence longer than `max_chars`
    is hard-split into max_chars-sized chunks, each its own instance.
    Character counts are Unicode code points.
    """
    if max_chars < 1:
        raise ValueError(f"max_chars must be >= 1, got {max_chars}")
    out: list[str] = []
    buf: list[str] = []
    buf_len = 0

    def flush() -> None:
        nonlocal buf, buf_len
        if buf:
            out.append("\n".join(buf))
            buf = []
            buf_len = 0

    for sent in corpus.instances:
        n = len(sent)
        if n > max_chars:
            flush()
            for start in range(0, n, max_chars):
                out.append(sent[start:start + max_chars])
            continue
        cost = n if not buf else n + 1
        if buf_len + cost <= max_chars:
            buf.append(sent)
            buf_len += cost
        else:
            flush()
            buf.append(sent)
            buf_len = n
    flush()
    return Corpus(lang=corpus.lang, instances=out, provenance=corpus.provenance)


def split(corpus: Corpus, ratios: tuple[float, float, float] = DEFAULT_RATIOS,
          seed: int = 0, floor: int = DEFAULT_FLOOR) -> SplitCorpus:
    """Shuffle instances with a seeded PRNG and split into train/val/test.

    Sizes are test = round(ratios[2] * N) and val = round(ratios[1] * N) with
    train taking the remainder. When either rounded share falls below `floor`,
    val and test are both clamped to exactly `floor`.

    Raises:
        ValueError: bad ratios, or N < 2 * floor + 1 ("corpus too small to split").
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three nonnegative numbers summing to 1, got {ratios}")
    n = len(corpus.instances)
    if n < 2 * floor + 1:
        raise ValueError(f"corpus too small to split: {n} instances, need at least {2 * floor + 1}")
    n_test = round(ratios[2] * n)
    n_val = round(ratios[1] * n)
    if n_test < floor or n_val < floor:
        n_test = floor
        n_val = floor
    n_train = n - n_val - n_test
    shuffled = list(corpus.instances)
    random.Random(seed).shuffle(shuffled)
    return SplitCorpus(
        lang=corpus.lang,
        train=shuffled[:n_train],
        val=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
        seed=seed,
    )


def escape_instance(instance: str) -> str:
    """Escape an instance for one-per-line storage (backslash, then newline)."""
    return instance.replace("\\", "\\\\").replace("\n", "\\n")


def unescape_instance(line: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(line):
        c = line[i]
        if c == "\\" and i + 1 < len(line):
            nxt = line[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(c)
        i += 1
    return "".join(out)


def write_split(sc: SplitCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Write `<lang>.train.txt`, `<lang>.val.txt`, `<lang>.test.txt` under out_dir.

    One instance per line; internal newlines are escaped as \\n.
    Returns the mapping from split name to file path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for name, instances in (("train", sc.train), ("val", sc.val), ("test", sc.test)):
        p = out_dir / f"{sc.lang}.{name}.txt"
        tmp = out_dir / f".{sc.lang}.{name}.txt.tmp"
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            for inst in instances:
                f.write(escape_instance(inst) + "\n")
        os.replace(tmp, p)
        paths[name] = p
    return paths


def read_split_file(path: str | Path, lang: str) -> Corpus:
    """Read one split file written by `write_split` back into a Corpus."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"split file not found: {path}")
    instances = [unescape_instance(line) for line in
                 path.read_text(encoding="utf-8").splitlines()]
    return Corpus(lang=lang, instances=instances, provenance=str(path))
