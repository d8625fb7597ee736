"""Tiny causal transformer LM in plain numpy, trained by hand-written backprop.

Pre-norm blocks, learned positional embeddings, and a learned BOS vector at
position 0 so every token of an instance is predicted. Instances longer than
the context window are scored and trained in independent non-overlapping
windows (context resets at window starts). Adam with early stopping on
validation cross-entropy: evaluate every eval_every steps, stop after
`patience` evaluations without improvement, restore the best parameters.

Float64 throughout: slow but exactly reproducible and finite-difference
checkable, which is the point of this backend at desk scale.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .lm import NeuralConfig
from .tokenizer import CharTokenizer

FORMAT_VERSION = 1
_NEG = -1e30  # additive mask; large-finite keeps softmax gradients clean


def _gelu(x: np.ndarray) -> np.ndarray:
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + np.tanh(c * (x + 0.044715 * x ** 3)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    c = math.sqrt(2.0 / math.pi)
    u = c * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * c * (1.0 + 3 * 0.044715 * x ** 2)


def _ln_forward(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + 1e-5)
    xhat = (x - mu) * inv
    return g * xhat + b, (xhat, inv, g)


def _ln_backward(dy: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv, g = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dyg = dy * g
    dx = inv * (dyg - dyg.mean(axis=-1, keepdims=True)
                - xhat * (dyg * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


class TinyNeuralLM:

    def __init__(self, tokenizer: CharTokenizer, lang: str,
                 config: NeuralConfig | None = None):
        config = config if config is not None else NeuralConfig()
        if config.embed_dim % config.n_heads != 0:
            raise ValueError(f"embed_dim {config.embed_dim} not divisible by "
                             f"n_heads {config.n_heads}")
        self.tokenizer = tokenizer
        self.lang = lang
        self.config = config
        self._v = len(tokenizer)
        self._fitted = False
        rng = np.random.default_rng(config.seed)
        e, c = config.embed_dim, config.context_len
        self.params: dict[str, np.ndarray] = {
            "tok": rng.normal(0, 0.02, (self._v, e)),
            "pos": rng.normal(0, 0.02, (c, e)),
            "bos": rng.normal(0, 0.02, (e,)),
            "lnfg": np.ones(e), "lnfb": np.zeros(e),
            "wout": rng.normal(0, 0.02, (e, self._v)), "bout": np.zeros(self._v),
        }
        for i in range(config.n_layers):
            self.params.update({
                f"{i}.ln1g": np.ones(e), f"{i}.ln1b": np.zeros(e),
                f"{i}.wq": rng.normal(0, 0.02, (e, e)), f"{i}.bq": np.zeros(e),
                f"{i}.wk": rng.normal(0, 0.02, (e, e)), f"{i}.bk": np.zeros(e),
                f"{i}.wv": rng.normal(0, 0.02, (e, e)), f"{i}.bv": np.zeros(e),
                f"{i}.wo": rng.normal(0, 0.02, (e, e)), f"{i}.bo": np.zeros(e),
                f"{i}.ln2g": np.ones(e), f"{i}.ln2b": np.zeros(e),
                f"{i}.w1": rng.normal(0, 0.02, (e, 4 * e)), f"{i}.b1": np.zeros(4 * e),
                f"{i}.w2": rng.normal(0, 0.02, (4 * e, e)), f"{i}.b2": np.zeros(e),
            })

    # ---- forward/backward ----

    def _embed(self, ids: np.ndarray) -> np.ndarray:
        p = self.params
        bsz, t = ids.shape
        shifted = np.empty_like(ids)
        shifted[:, 1:] = ids[:, :-1]
        shifted[:, 0] = 0
        x = p["tok"][shifted]
        x[:, 0, :] = p["bos"]
        return x + p["pos"][:t][None, :, :]

    def _forward(self, ids: np.ndarray, want_cache: bool):
        p = self.params
        h_n = self.config.n_heads
        bsz, t = ids.shape
        d = self.config.embed_dim // h_n
        scale = 1.0 / math.sqrt(d)
        causal = np.triu(np.full((t, t), _NEG), k=1)
        x = self._embed(ids)
        caches = []
        for i in range(self.config.n_layers):
            y1, c_ln1 = _ln_forward(x, p[f"{i}.ln1g"], p[f"{i}.ln1b"])
            q = (y1 @ p[f"{i}.wq"] + p[f"{i}.bq"]).reshape(bsz, t, h_n, d).transpose(0, 2, 1, 3)
            k = (y1 @ p[f"{i}.wk"] + p[f"{i}.bk"]).reshape(bsz, t, h_n, d).transpose(0, 2, 1, 3)
            v = (y1 @ p[f"{i}.wv"] + p[f"{i}.bv"]).reshape(bsz, t, h_n, d).transpose(0, 2, 1, 3)
            scores = q @ k.transpose(0, 1, 3, 2) * scale + causal
            scores -= scores.max(axis=-1, keepdims=True)
            att = np.exp(scores)
            att /= att.sum(axis=-1, keepdims=True)
            merged = (att @ v).transpose(0, 2, 1, 3).reshape(bsz, t, -1)
            proj = merged @ p[f"{i}.wo"] + p[f"{i}.bo"]
            x2 = x + proj
            y2, c_ln2 = _ln_forward(x2, p[f"{i}.ln2g"], p[f"{i}.ln2b"])
            h_pre = y2 @ p[f"{i}.w1"] + p[f"{i}.b1"]
            h_act = _gelu(h_pre)
            x3 = x2 + h_act @ p[f"{i}.w2"] + p[f"{i}.b2"]
            if want_cache:
                caches.append((x, c_ln1, y1, q, k, v, att, merged, x2, c_ln2, y2, h_pre, h_act))
            x = x3
        yf, c_lnf = _ln_forward(x, p["lnfg"], p["lnfb"])
        logits = yf @ p["wout"] + p["bout"]
        return logits, (caches, yf, c_lnf, ids) if want_cache else None

    def _logprobs(self, ids: np.ndarray) -> np.ndarray:
        """Per-token log P(target) for a (B, T) batch; targets are ids."""
        logits, _ = self._forward(ids, want_cache=False)
        logz = np.log(np.sum(np.exp(logits - logits.max(axis=-1, keepdims=True)),
                             axis=-1)) + logits.max(axis=-1)
        picked = np.take_along_axis(logits, ids[..., None], axis=-1)[..., 0]
        return picked - logz

    def _loss_and_grads(self, ids: np.ndarray, mask: np.ndarray):
        p = self.params
        h_n = self.config.n_heads
        bsz, t = ids.shape
        d = self.config.embed_dim // h_n
        scale = 1.0 / math.sqrt(d)
        logits, cache = self._forward(ids, want_cache=True)
        caches, yf, c_lnf, _ = cache
        shift = logits.max(axis=-1, keepdims=True)
        probs = np.exp(logits - shift)
        probs /= probs.sum(axis=-1, keepdims=True)
        n_pred = mask.sum()
        picked = np.take_along_axis(np.log(probs), ids[..., None], axis=-1)[..., 0]
        loss = -float((picked * mask).sum() / n_pred)

        grads = {key: np.zeros_like(val) for key, val in p.items()}
        dlogits = probs.copy()
        np.add.at(dlogits, (np.arange(bsz)[:, None], np.arange(t)[None, :], ids), -1.0)
        dlogits *= (mask / n_pred)[..., None]
        grads["wout"] += yf.reshape(-1, yf.shape[-1]).T @ dlogits.reshape(-1, self._v)
        grads["bout"] += dlogits.sum(axis=(0, 1))
        dyf = dlogits @ p["wout"].T
        dx, dg, db = _ln_backward(dyf, c_lnf)
        grads["lnfg"] += dg
        grads["lnfb"] += db
        for i in reversed(range(self.config.n_layers)):
            x, c_ln1, y1, q, k, v, att, merged, x2, c_ln2, y2, h_pre, h_act = caches[i]
            # mlp
            dh_act = dx @ p[f"{i}.w2"].T
            grads[f"{i}.w2"] += h_act.reshape(-1, h_act.shape[-1]).T @ dx.reshape(-1, dx.shape[-1])
            grads[f"{i}.b2"] += dx.sum(axis=(0, 1))
            dh_pre = dh_act * _gelu_grad(h_pre)
            dy2 = dh_pre @ p[f"{i}.w1"].T
            grads[f"{i}.w1"] += y2.reshape(-1, y2.shape[-1]).T @ dh_pre.reshape(-1, dh_pre.shape[-1])
            grads[f"{i}.b1"] += dh_pre.sum(axis=(0, 1))
            dx2, dg, db = _ln_backward(dy2, c_ln2)
            dx2 += dx
            grads[f"{i}.ln2g"] += dg
            grads[f"{i}.ln2b"] += db
            # attention
            dmerged = dx2 @ p[f"{i}.wo"].T
            grads[f"{i}.wo"] += merged.reshape(-1, merged.shape[-1]).T @ dx2.reshape(-1, dx2.shape[-1])
            grads[f"{i}.bo"] += dx2.sum(axis=(0, 1))
            dheads = dmerged.reshape(bsz, t, h_n, d).transpose(0, 2, 1, 3)
            datt = dheads @ v.transpose(0, 1, 3, 2)
            dv = att.transpose(0, 1, 3, 2) @ dheads
            dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
            dq = dscores @ k * scale
            dk = dscores.transpose(0, 1, 3, 2) @ q * scale
            dy1 = np.zeros_like(y1)
            for name, grad in (("wq", dq), ("wk", dk), ("wv", dv)):
                flat = grad.transpose(0, 2, 1, 3).reshape(bsz, t, -1)
                grads[f"{i}.{name}"] += y1.reshape(-1, y1.shape[-1]).T @ flat.reshape(-1, flat.shape[-1])
                grads[f"{i}.b{name[1]}"] += flat.sum(axis=(0, 1))
                dy1 += flat @ p[f"{i}.{name}"].T
            dx_ln, dg, db = _ln_backward(dy1, c_ln1)
            grads[f"{i}.ln1g"] += dg
            grads[f"{i}.ln1b"] += db
            dx = dx2 + dx_ln
        # embeddings
        grads["pos"][:t] += dx.sum(axis=0)
        grads["bos"] += dx[:, 0, :].sum(axis=0)
        if t > 1:
            np.add.at(grads["tok"], ids[:, :-1], dx[:, 1:, :])
        return loss, grads

    # ---- training ----

    def _windows(self, instances: Sequence[str]) -> list[np.ndarray]:
        c = self.config.context_len
        out = []
        for inst in instances:
            ids = self.tokenizer.encode(inst, truncate=True, pad=False)
            for start in range(0, len(ids), c):
                out.append(np.asarray(ids[start:start + c], dtype=np.int64))
        return out

    def _batch(self, windows: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        t = max(len(w) for w in windows)
        ids = np.full((len(windows), t), self.tokenizer.pad_id, dtype=np.int64)
        mask = np.zeros((len(windows), t))
        for row, w in enumerate(windows):
            ids[row, :len(w)] = w
            mask[row, :len(w)] = 1.0
        return ids, mask

    def _mean_nll(self, windows: list[np.ndarray]) -> float:
        total, count = 0.0, 0
        for start in range(0, len(windows), self.config.batch_size):
            ids, mask = self._batch(windows[start:start + self.config.batch_size])
            total += float((self._logprobs(ids) * mask).sum())
            count += int(mask.sum())
        return -total / count

    def fit(self, instances: Sequence[str], val_instances: Sequence[str] | None = None,
            checkpoint_dir: str | Path | None = None) -> "TinyNeuralLM":
        """Adam training with optional early stopping on validation NLL.

        Raises:
            ValueError: refit, empty training data, or non-finite loss.
        """
        if self._fitted:
            raise ValueError("model is immutable after fit")
        windows = self._windows(instances)
        if not windows:
            raise ValueError("cannot fit on an empty training corpus")
        val_windows = self._windows(val_instances) if val_instances else None
        cfg = self.config
        rng = np.random.default_rng(cfg.seed + 1)
        m_state = {key: np.zeros_like(val) for key, val in self.params.items()}
        v_state = {key: np.zeros_like(val) for key, val in self.params.items()}
        best: dict[str, np.ndarray] | None = None
        best_val = math.inf
        bad_evals = 0
        step = 0
        ckpts: list[Path] = []
        stop = False
        for _epoch in range(cfg.max_epochs):
            order = rng.permutation(len(windows))
            for start in range(0, len(order), cfg.batch_size):
                batch = [windows[j] for j in order[start:start + cfg.batch_size]]
                ids, mask = self._batch(batch)
                loss, grads = self._loss_and_grads(ids, mask)
                if not math.isfinite(loss):
                    raise ValueError("non-finite loss during neural training")
                step += 1
                bc1 = 1.0 - 0.9 ** step
                bc2 = 1.0 - 0.999 ** step
                for key, grad in grads.items():
                    m_state[key] = 0.9 * m_state[key] + 0.1 * grad
                    v_state[key] = 0.999 * v_state[key] + 0.001 * grad ** 2
                    self.params[key] -= cfg.learning_rate * (m_state[key] / bc1) / (
                        np.sqrt(v_state[key] / bc2) + 1e-8)
                if checkpoint_dir is not None and step % cfg.save_every == 0:
                    ckpts.append(self._checkpoint(checkpoint_dir, step))
                    while len(ckpts) > cfg.keep_checkpoints:
                        ckpts.pop(0).unlink(missing_ok=True)
                if val_windows and step % cfg.eval_every == 0:
                    val_nll = self._mean_nll(val_windows)
                    if val_nll < best_val - 1e-9:
                        best_val = val_nll
                        best = {key: val.copy() for key, val in self.params.items()}
                        bad_evals = 0
                    else:
                        bad_evals += 1
                        if bad_evals >= cfg.patience:
                            stop = True
                            break
            if stop:
                break
        if best is not None:
            self.params = best
        self._fitted = True
        return self

    def _checkpoint(self, directory: str | Path, step: int) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"checkpoint_step{step}.npz"
        np.savez(path, **self.params)
        return path

    # ---- scoring ----

    def next_token_dist(self, context: Sequence[int]) -> np.ndarray:
        ctx = list(context)[-(self.config.context_len - 1):]
        ids = np.asarray(ctx + [0], dtype=np.int64)[None, :]  # trailing slot is predicted
        logits, _ = self._forward(ids, want_cache=False)
        row = logits[0, -1]
        row = row - row.max()
        dist = np.exp(row)
        return dist / dist.sum()

    def logprob_ids(self, ids: np.ndarray) -> np.ndarray:
        """Log-probability of each token, scored in context_len windows."""
        ids = np.asarray(ids, dtype=np.int64)
        c = self.config.context_len
        parts = [self._logprobs(ids[start:start + c][None, :])[0]
                 for start in range(0, len(ids), c)]
        return np.concatenate(parts)

    # ---- persistence ----

    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": FORMAT_VERSION,
            "lang": self.lang,
            "vocab_size": self._v,
            "config": vars(self.config),
        }
        np.savez(Path(path), meta=np.array([json.dumps(meta)]), **self.params)

    @classmethod
    def load(cls, path: str | Path, tokenizer: CharTokenizer) -> "TinyNeuralLM":
        data = np.load(Path(path), allow_pickle=False)
        meta = json.loads(str(data["meta"][0]))
        if meta["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {meta['format_version']}")
        if meta["vocab_size"] != len(tokenizer):
            raise ValueError(
                f"tokenizer vocabulary ({len(tokenizer)}) does not match "
                f"saved model ({meta['vocab_size']})")
        model = cls(tokenizer, meta["lang"], NeuralConfig(**meta["config"]))
        model.params = {key: data[key] for key in model.params}
        model._fitted = True
        return model
