"""Interpolated character n-gram language model with additive smoothing.

The model mixes maximum-likelihood estimates of orders 1..n, each smoothed
with additive alpha over the full token vocabulary:

    P(x | ctx) = sum_k lambda_k * (count_k(ctx_k, x) + alpha) / (total_k(ctx_k) + alpha * V)

where ctx_k is the last k-1 tokens. Near an instance start, components whose
context length exceeds the available history fold onto the longest available
context, so every token is predicted and the mixture weights still sum to 1.

Counts live in sorted packed-key numpy arrays so corpus-level scoring is a
handful of vectorized lookups; a vocabulary/order combination too large to
pack into 62-bit keys falls back to plain dict tables.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tokenizer import CharTokenizer

FORMAT_VERSION = 1
_PACK_LIMIT = 2 ** 62


def default_lambdas(order: int) -> tuple[float, ...]:
    """Interpolation weights proportional to (n, n-1, ..., 1)."""
    total = order * (order + 1) / 2
    return tuple((order - k) / total for k in range(order))


class NGramLM:

    def __init__(self, tokenizer: CharTokenizer, lang: str, order: int = 4,
                 alpha: float = 0.01, lambdas: Sequence[float] | None = None):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        if lambdas is None:
            lambdas = default_lambdas(order)
        lambdas = tuple(float(x) for x in lambdas)
        if len(lambdas) != order:
            raise ValueError(f"expected {order} interpolation weights, got {len(lambdas)}")
        if any(x < 0 for x in lambdas) or abs(sum(lambdas) - 1.0) > 1e-9:
            raise ValueError(f"interpolation weights must be >= 0 and sum to 1, got {lambdas}")
        self.tokenizer = tokenizer
        self.lang = lang
        self.order = order
        self.alpha = float(alpha)
        self.lambdas = lambdas
        self._v = len(tokenizer)
        self._packed = self._v ** order <= _PACK_LIMIT
        self._fitted = False
        # tail weight applied when a component folds onto the longest
        # available context: tail[c] = sum of lambdas[c:]
        self._tail = tuple(float(sum(lambdas[c:])) for c in range(order))
        self._tables: list = []

    @property
    def fitted(self) -> bool:
        return self._fitted

    @property
    def vocab_size(self) -> int:
        return self._v

    def fit(self, instances: Iterable[str]) -> "NGramLM":
        """Count n-grams of orders 1..order over the training instances.

        The model is immutable after fit; calling fit twice raises.
        """
        if self._fitted:
            raise ValueError("model is immutable after fit")
        id_arrays = []
        for inst in instances:
            ids = self.tokenizer.encode(inst, truncate=True, pad=False)
            if ids:
                id_arrays.append(np.asarray(ids, dtype=np.int64))
        if not id_arrays:
            raise ValueError("cannot fit on an empty training corpus")
        if self._packed:
            self._fit_packed(id_arrays)
        else:
            self._fit_dict(id_arrays)
        self._fitted = True
        return self

    def _fit_packed(self, id_arrays: list[np.ndarray]) -> None:
        v = self._v
        for c in range(self.order):
            powers = v ** np.arange(c, -1, -1, dtype=np.int64)
            chunks = []
            for ids in id_arrays:
                if len(ids) <= c:
                    continue
                win = np.lib.stride_tricks.sliding_window_view(ids, c + 1)
                chunks.append(win @ powers)
            if chunks:
                keys, counts = np.unique(np.concatenate(chunks), return_counts=True)
            else:
                keys = np.empty(0, dtype=np.int64)
                counts = np.empty(0, dtype=np.int64)
            ctx = keys // v
            ctx_keys, starts = np.unique(ctx, return_index=True)
            ctx_totals = np.add.reduceat(counts, starts) if len(counts) else np.empty(0, dtype=np.int64)
            for arr in (keys, counts, ctx_keys, ctx_totals):
                arr.flags.writeable = False
            self._tables.append((keys, counts, ctx_keys, ctx_totals))

    def _fit_dict(self, id_arrays: list[np.ndarray]) -> None:
        for c in range(self.order):
            table: dict[tuple[int, ...], tuple[int, dict[int, int]]] = {}
            for ids in id_arrays:
                lst = ids.tolist()
                for t in range(c, len(lst)):
                    ctx = tuple(lst[t - c:t])
                    entry = table.get(ctx)
                    if entry is None:
                        entry = [0, {}]
                        table[ctx] = entry
                    entry[0] += 1
                    nxt = entry[1]
                    nxt[lst[t]] = nxt.get(lst[t], 0) + 1
            self._tables.append(table)

    def _require_fitted(self) -> None:
        if not self._fitted:
            raise ValueError("model must be fit before scoring")

    def logprob_ids(self, ids: np.ndarray) -> np.ndarray:
        """Natural-log probability of each token in one instance, vectorized."""
        self._require_fitted()
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return np.zeros(0)
        if ids.min() < 0 or ids.max() >= self._v:
            raise ValueError("token id out of range for this model's vocabulary")
        if not self._packed:
            return np.array([self._logprob_one(ids.tolist(), t) for t in range(len(ids))])
        v = self._v
        alpha = self.alpha
        av = alpha * v
        t_total = len(ids)
        probs = np.zeros(t_total)
        for c in range(self.order):
            if t_total <= c:
                break
            keys, counts, ctx_keys, ctx_totals = self._tables[c]
            powers = v ** np.arange(c, -1, -1, dtype=np.int64)
            pk = np.lib.stride_tricks.sliding_window_view(ids, c + 1) @ powers
            cnt = _lookup(keys, counts, pk)
            tot = _lookup(ctx_keys, ctx_totals, pk // v)
            p_c = (cnt + alpha) / (tot + av)
            w = np.full(t_total - c, self.lambdas[c])
            w[0] = self._tail[c]  # position t == c folds the longer components here
            probs[c:] += w * p_c
        return np.log(probs)

    def _component(self, c: int, ctx: tuple[int, ...]) -> tuple[np.ndarray, float]:
        """(count vector over next token, context total) for context length c."""
        v = self._v
        if self._packed:
            keys, counts, ctx_keys, ctx_totals = self._tables[c]
            ck = 0
            for tid in ctx:
                ck = ck * v + tid
            cnt = _lookup(keys, counts, ck * v + np.arange(v, dtype=np.int64))
            tot = float(_lookup(ctx_keys, ctx_totals, np.array([ck], dtype=np.int64))[0])
            return cnt, tot
        entry = self._tables[c].get(ctx)
        cnt = np.zeros(v)
        if entry is None:
            return cnt, 0.0
        for tid, n in entry[1].items():
            cnt[tid] = n
        return cnt, float(entry[0])

    def next_token_dist(self, context: Sequence[int]) -> np.ndarray:
        """Probability of every vocabulary token after the given context."""
        self._require_fitted()
        context = [int(t) for t in context]
        if any(t < 0 or t >= self._v for t in context):
            raise ValueError("token id out of range for this model's vocabulary")
        v = self._v
        av = self.alpha * v
        cmax = min(len(context), self.order - 1)
        dist = np.zeros(v)
        for c in range(cmax + 1):
            ctx = tuple(context[len(context) - c:]) if c else ()
            cnt, tot = self._component(c, ctx)
            w = self.lambdas[c] if c < cmax else self._tail[c]
            dist += w * ((cnt + self.alpha) / (tot + av))
        return dist

    def _logprob_one(self, ids: list[int], t: int) -> float:
        dist = self.next_token_dist(ids[:t][-(self.order - 1):] if self.order > 1 else [])
        return math.log(float(dist[ids[t]]))

    def ngram_windows(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        """Unique (c+1)-token windows and their counts, for inspection and tests."""
        self._require_fitted()
        if not 0 <= c < self.order:
            raise ValueError(f"context length {c} outside 0..{self.order - 1}")
        if self._packed:
            keys, counts, _, _ = self._tables[c]
            return _unpack(keys, c + 1, self._v), counts.copy()
        table = self._tables[c]
        rows = []
        counts = []
        for ctx, (_, nxt) in sorted(table.items()):
            for tid, n in sorted(nxt.items()):
                rows.append(ctx + (tid,))
                counts.append(n)
        return (np.asarray(rows, dtype=np.int64).reshape(len(rows), c + 1),
                np.asarray(counts, dtype=np.int64))

    def save(self, path: str | Path) -> None:
        """Write a versioned count-table file (.npz)."""
        self._require_fitted()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = json.dumps({
            "format_version": FORMAT_VERSION,
            "lang": self.lang,
            "order": self.order,
            "alpha": self.alpha,
            "lambdas": list(self.lambdas),
            "vocab_size": self._v,
        })
        arrays: dict[str, np.ndarray] = {"meta": np.array(meta)}
        for c in range(self.order):
            windows, counts = self.ngram_windows(c)
            arrays[f"windows_{c}"] = windows.astype(np.uint32)
            arrays[f"counts_{c}"] = counts
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path: str | Path, tokenizer: CharTokenizer) -> "NGramLM":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"model file not found: {path}")
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format_version") != FORMAT_VERSION:
                raise ValueError(f"unsupported model format version {meta.get('format_version')!r} in {path}")
            if meta["vocab_size"] != len(tokenizer):
                raise ValueError(
                    f"model {path} was built over a {meta['vocab_size']}-token vocabulary, "
                    f"tokenizer has {len(tokenizer)}")
            model = cls(tokenizer, lang=meta["lang"], order=meta["order"],
                        alpha=meta["alpha"], lambdas=meta["lambdas"])
            for c in range(model.order):
                windows = data[f"windows_{c}"].astype(np.int64)
                counts = data[f"counts_{c}"].astype(np.int64)
                model._load_table(c, windows, counts)
        model._fitted = True
        return model

    def _load_table(self, c: int, windows: np.ndarray, counts: np.ndarray) -> None:
        v = self._v
        if windows.size and windows.max() >= v:
            raise ValueError("count-table token id out of range for vocabulary")
        if self._packed:
            powers = v ** np.arange(c, -1, -1, dtype=np.int64)
            keys = windows @ powers if windows.size else np.empty(0, dtype=np.int64)
            idx = np.argsort(keys, kind="stable")
            keys = keys[idx]
            cnts = counts[idx]
            ctx = keys // v
            ctx_keys, starts = np.unique(ctx, return_index=True)
            ctx_totals = np.add.reduceat(cnts, starts) if len(cnts) else np.empty(0, dtype=np.int64)
            for arr in (keys, cnts, ctx_keys, ctx_totals):
                arr.flags.writeable = False
            self._tables.append((keys, cnts, ctx_keys, ctx_totals))
        else:
            table: dict[tuple[int, ...], list] = {}
            for row, n in zip(windows.tolist(), counts.tolist()):
                ctx, tid = tuple(row[:-1]), row[-1]
                entry = table.setdefault(ctx, [0, {}])
                entry[0] += n
                entry[1][tid] = entry[1].get(tid, 0) + n
            self._tables.append(table)


def _lookup(keys: np.ndarray, vals: np.ndarray, q: np.ndarray) -> np.ndarray:
    """vals for each q present in sorted keys, else 0."""
    if len(keys) == 0:
        return np.zeros(len(q), dtype=np.int64)
    idx = np.searchsorted(keys, q)
    np.clip(idx, 0, len(keys) - 1, out=idx)
    return np.where(keys[idx] == q, vals[idx], 0)


def _unpack(keys: np.ndarray, width: int, v: int) -> np.ndarray:
    out = np.empty((len(keys), width), dtype=np.int64)
    rem = keys.copy()
    for j in range(width - 1, -1, -1):
        out[:, j] = rem % v
        rem //= v
    return out
