"""Config-driven pipeline commands.

One JSON config file describes a whole run; subcommands execute stages so the
expensive n^2 entropy evaluation can be cached between experiments:

    entrolang ingest  --config run.json      corpora -> split files + manifest
    entrolang train   --config run.json      splits  -> per-language models
    entrolang entropy --config run.json      models  -> matrix.tsv
    entrolang vectors --config run.json      matrix  -> vectors.tsv
    entrolang tree    --config run.json      vectors -> tree.nwk + tree.json
    entrolang compare --config run.json      tree vs gold -> compare.json/.tsv
    entrolang synth   --config run.json      planted-recovery report

Every artifact is written atomically (temp file + rename) and embeds the
config hash: sha256 over the canonical effective config minus out_dir, so a
rerun relocated with --out produces byte-identical files. Errors exit
nonzero with a single `error: ...` line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import __version__
from .clustering import LINKAGES, ClusterParams, agglomerative_tree, induce_tree
from .corpus import (DEFAULT_FLOOR, DEFAULT_MAX_CHARS, DEFAULT_MAX_SENTENCES,
                     collate, load_corpus, read_split_file, split, write_split)
from .lm import LMConfig, NeuralConfig, fit_language_model
from .metrics import compare_trees, report_json, report_tsv_line
from .ngram import NGramLM
from .synth import RecoveryParams, planted_eight, recovery_experiment
from .tokenizer import CharTokenizer, train_tokenizer
from .tree import read_newick_file, tree_to_dict, write_newick
from .vectors import (build_entropy_matrix, concat_vectors, language_vectors,
                      load_external_vectors, minmax_normalize, read_matrix_tsv,
                      write_matrix_tsv, write_vectors_tsv)

_CORPUS_DEFAULTS = {
    "max_sentences": DEFAULT_MAX_SENTENCES,
    "max_chars": DEFAULT_MAX_CHARS,
    "ratios": [0.7, 0.2, 0.1],
    "floor": DEFAULT_FLOOR,
}
_MODEL_DEFAULTS = {"backend": "ngram", "order": 4, "alpha": 0.01, "lambdas": None}
_CLUSTER_DEFAULTS = {
    "method": "dbscan",
    "linkage": "average",
    "epsilon": 0.1,
    "min_samples_fraction": 0.3,
    "max_depth": 8,
    "epsilon_decay": 0.7,
    "metric": "euclidean",
}
_VECTOR_DEFAULTS = {"mode": "row", "normalize": True, "concat": None, "external": None}
_SYNTH_DEFAULTS = {
    "delta": 0.3,
    "chars_per_lang": 200_000,
    "alphabet_size": 900,
    "seeds": list(range(20)),
    "tree": None,
}


class PipelineError(Exception):
    """Raised for config or stage failures; main() turns it into exit 1."""


def _section(raw: dict, key: str, defaults: dict) -> dict:
    given = raw.get(key, {})
    if not isinstance(given, dict):
        raise PipelineError(f"config section {key!r} must be an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise PipelineError(f"unknown keys in config section {key!r}: {unknown}")
    return {**defaults, **given}


@dataclass
class PipelineConfig:
    seed: int
    out_dir: Path
    languages: list[tuple[str, str]]
    corpus: dict
    model: dict
    clustering: dict
    vectors: dict
    gold_tree: str | None
    synth: dict
    hash: str

    @property
    def lm_config(self) -> LMConfig:
        lambdas = self.model["lambdas"]
        return LMConfig(
            backend=self.model["backend"],
            order=self.model["order"],
            alpha=self.model["alpha"],
            lambdas=tuple(lambdas) if lambdas is not None else None,
            neural=NeuralConfig(**self.model.get("neural_config", {})),
        )

    @property
    def cluster_params(self) -> ClusterParams:
        c = self.clustering
        return ClusterParams(
            epsilon=c["epsilon"],
            min_samples_fraction=c["min_samples_fraction"],
            max_depth=c["max_depth"],
            epsilon_decay=c["epsilon_decay"],
            metric=c["metric"],
        )


_TOP_KEYS = {"seed", "out_dir", "languages", "corpus", "model", "clustering",
             "vectors", "gold_tree", "synth"}


def load_config(path: str | Path, seed_override: int | None = None,
                out_override: str | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise PipelineError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise PipelineError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise PipelineError("config root must be a JSON object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise PipelineError(f"unknown top-level config keys: {unknown}")

    seed = seed_override if seed_override is not None else raw.get("seed")
    if not isinstance(seed, int):
        raise PipelineError("config must set an integer seed (or pass --seed)")
    out_dir = out_override if out_override is not None else raw.get("out_dir")
    if not out_dir:
        raise PipelineError("config must set out_dir (or pass --out)")

    languages: list[tuple[str, str]] = []
    for entry in raw.get("languages", []):
        if not isinstance(entry, dict) or set(entry) != {"lang", "path"}:
            raise PipelineError("each languages entry must be {\"lang\": ..., \"path\": ...}")
        languages.append((entry["lang"], entry["path"]))

    corpus = _section(raw, "corpus", _CORPUS_DEFAULTS)
    model_defaults = dict(_MODEL_DEFAULTS)
    model_defaults["neural_config"] = {}
    model = _section(raw, "model", model_defaults)
    if model["backend"] not in ("ngram", "neural"):
        raise PipelineError(f"model backend must be ngram or neural, got {model['backend']!r}")
    clustering = _section(raw, "clustering", _CLUSTER_DEFAULTS)
    if clustering["method"] not in ("dbscan", "agglomerative"):
        raise PipelineError(f"clustering method must be dbscan or agglomerative, "
                            f"got {clustering['method']!r}")
    if clustering["linkage"] not in LINKAGES:
        raise PipelineError(f"clustering linkage must be one of {LINKAGES}, "
                            f"got {clustering['linkage']!r}")
    vectors = _section(raw, "vectors", _VECTOR_DEFAULTS)
    synth = _section(raw, "synth", _SYNTH_DEFAULTS)
    gold_tree = raw.get("gold_tree")

    effective = {
        "seed": seed,
        "languages": [{"lang": lang, "path": p} for lang, p in languages],
        "corpus": corpus,
        "model": model,
        "clustering": clustering,
        "vectors": vectors,
        "gold_tree": gold_tree,
        "synth": synth,
    }
    digest = hashlib.sha256(json.dumps(
        effective, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()

    cfg = PipelineConfig(
        seed=seed, out_dir=Path(out_dir), languages=languages, corpus=corpus,
        model=model, clustering=clustering, vectors=vectors,
        gold_tree=gold_tree, synth=synth, hash=digest,
    )
    for ref in ([p for _, p in languages] + [gold_tree, vectors["external"],
                vectors["concat"], synth["tree"]]):
        if ref is not None and not Path(ref).exists():
            raise PipelineError(f"config references missing path: {ref}")
    return cfg


# ---- output plumbing ----

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_via(path: Path, writer: Callable[[Path], None]) -> None:
    """Atomic variant for writers that insist on writing the file themselves."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".tmp.{path.name}"
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if tmp.exists():
            tmp.unlink()
        raise


def _log_run(cfg: PipelineConfig, command: str) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(cfg.out_dir / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{stamp}\t{command}\tentrolang {__version__}\tconfig_hash={cfg.hash}\n")


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise PipelineError(f"missing {path.name}; run `entrolang {producer}` first")
    return path


def _splits_dir(cfg: PipelineConfig) -> Path:
    return cfg.out_dir / "splits"


def _models_dir(cfg: PipelineConfig) -> Path:
    return cfg.out_dir / "models"


# ---- subcommands ----

def cmd_ingest(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    if not cfg.languages:
        raise PipelineError("config lists no languages to ingest")
    rows = []
    for lang, corpus_path in cfg.languages:
        try:
            corpus = load_corpus(corpus_path, lang, max_sentences=cfg.corpus["max_sentences"])
            corpus = collate(corpus, max_chars=cfg.corpus["max_chars"])
            sc = split(corpus, ratios=tuple(cfg.corpus["ratios"]), seed=cfg.seed,
                       floor=cfg.corpus["floor"])
        except (OSError, ValueError) as e:
            raise PipelineError(f"{lang}: {e}") from None
        write_split(sc, _splits_dir(cfg))
        rows.append((lang, len(sc.train), len(sc.val), len(sc.test)))
    lines = [f"# config_hash={cfg.hash}", "lang\ttrain\tval\ttest"]
    lines += [f"{lang}\t{tr}\t{va}\t{te}" for lang, tr, va, te in rows]
    _atomic_write(cfg.out_dir / "manifest.tsv", "\n".join(lines) + "\n")


def cmd_train(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    if not cfg.languages:
        raise PipelineError("config lists no languages to train on")
    splits_dir = _splits_dir(cfg)
    models_dir = _models_dir(cfg)

    def train_one(lang: str) -> None:
        train_corpus = read_split_file(
            _require(splits_dir / f"{lang}.train.txt", "ingest"), lang)
        val_corpus = read_split_file(
            _require(splits_dir / f"{lang}.val.txt", "ingest"), lang)
        tokenizer = train_tokenizer(train_corpus, max_len=cfg.corpus["max_chars"])
        model = fit_language_model(cfg.lm_config, train_corpus, tokenizer, lang,
                                   val=val_corpus)
        _atomic_via(models_dir / f"{lang}.vocab.tsv", tokenizer.save)
        _atomic_via(models_dir / f"{lang}.npz", model.save)

    jobs = max(1, args.jobs)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(train_one, [lang for lang, _ in cfg.languages]))
    else:
        for lang, _ in cfg.languages:
            train_one(lang)


def _load_models(cfg: PipelineConfig) -> list:
    models = []
    for lang, _ in cfg.languages:
        vocab = _require(_models_dir(cfg) / f"{lang}.vocab.tsv", "train")
        weights = _require(_models_dir(cfg) / f"{lang}.npz", "train")
        tokenizer = CharTokenizer.load(vocab, max_len=cfg.corpus["max_chars"])
        if cfg.model["backend"] == "neural":
            from .neural import TinyNeuralLM
            models.append(TinyNeuralLM.load(weights, tokenizer))
        else:
            models.append(NGramLM.load(weights, tokenizer))
    return models


def cmd_entropy(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    if not cfg.languages:
        raise PipelineError("config lists no languages to evaluate")
    models = _load_models(cfg)
    tests = [read_split_file(_require(_splits_dir(cfg) / f"{lang}.test.txt", "ingest"), lang)
             for lang, _ in cfg.languages]
    matrix = build_entropy_matrix(models, tests, jobs=max(1, args.jobs))
    _atomic_via(cfg.out_dir / "matrix.tsv",
                lambda p: write_matrix_tsv(matrix, p, comment=f"config_hash={cfg.hash}"))


def cmd_vectors(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    external = cfg.vectors["external"]
    if external is not None:
        vs = load_external_vectors(external)
    else:
        matrix = read_matrix_tsv(_require(cfg.out_dir / "matrix.tsv", "entropy"))
        vs = language_vectors(matrix, mode=cfg.vectors["mode"])
    if cfg.vectors["normalize"]:
        vs = minmax_normalize(vs)
    concat_path = getattr(args, "concat", None) or cfg.vectors["concat"]
    if concat_path is not None:
        extra = load_external_vectors(concat_path)
        if cfg.vectors["normalize"]:
            extra = minmax_normalize(extra)
        vs = concat_vectors(vs, extra)
    _atomic_via(cfg.out_dir / "vectors.tsv",
                lambda p: write_vectors_tsv(vs, p, comment=f"config_hash={cfg.hash}"))


def cmd_tree(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    vs = load_external_vectors(_require(cfg.out_dir / "vectors.tsv", "vectors"))
    if cfg.clustering["method"] == "agglomerative":
        tree = agglomerative_tree(vs, linkage=cfg.clustering["linkage"])
    else:
        tree = induce_tree(vs, cfg.cluster_params)
    _atomic_write(cfg.out_dir / "tree.nwk",
                  write_newick(tree, comment=f"config_hash={cfg.hash}") + "\n")
    doc = {"config_hash": cfg.hash, "tree": tree_to_dict(tree)}
    _atomic_write(cfg.out_dir / "tree.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_compare(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    if cfg.gold_tree is None:
        raise PipelineError("config must set gold_tree for compare")
    gold = read_newick_file(cfg.gold_tree)
    candidate = read_newick_file(_require(cfg.out_dir / "tree.nwk", "tree"))
    report = compare_trees(gold, candidate)
    _atomic_write(cfg.out_dir / "compare.json",
                  report_json(report, cfg.gold_tree, "tree.nwk",
                              extra={"config_hash": cfg.hash}))
    tsv = f"# config_hash={cfg.hash}\n" + report_tsv_line(report, cfg.gold_tree, "tree.nwk")
    _atomic_write(cfg.out_dir / "compare.tsv", tsv)


def cmd_synth(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    s = cfg.synth
    planted = read_newick_file(s["tree"]) if s["tree"] is not None else planted_eight()
    params = RecoveryParams(
        seeds=tuple(s["seeds"]),
        alphabet_size=s["alphabet_size"],
        order=cfg.model["order"],
        alpha=cfg.model["alpha"],
        cluster=cfg.cluster_params,
        out_dir=str(cfg.out_dir / "synth"),
        jobs=max(1, args.jobs),
    )
    report = recovery_experiment(planted, s["chars_per_lang"], s["delta"], params)
    doc = {"config_hash": cfg.hash, "report": report}
    _atomic_write(cfg.out_dir / "synth" / "report.json",
                  json.dumps(doc, indent=2, sort_keys=True) + "\n")


_COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "entropy": cmd_entropy,
    "vectors": cmd_vectors,
    "tree": cmd_tree,
    "compare": cmd_compare,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entrolang",
        description="Entropy-based language vectors and typology trees.")
    parser.add_argument("--version", action="version", version=f"entrolang {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--jobs", type=int, default=1, help="worker cap for parallel stages")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the config out_dir")
        if name == "vectors":
            p.add_argument("--concat", default=None,
                           help="TSV of extra per-language features to append")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        _COMMANDS[args.command](cfg, args)
        _log_run(cfg, args.command)
    except (PipelineError, ValueError, OSError) as e:
        message = " ".join(str(e).split()) or e.__class__.__name__
        print(f"error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
