"""End-to-end pipeline commands: determinism, stage wiring, error surface."""

import json
import random

import pytest

from entrolang.cli import main
from entrolang.tree import parse_newick

LANG_POOLS = {
    "aaa": "aabbccddee ",
    "bbb": "aabbffgghh ",
    "ccc": "hhiijjkkll ",
}

ARTIFACTS = ("manifest.tsv", "matrix.tsv", "vectors.tsv", "tree.nwk",
             "tree.json", "compare.json", "compare.tsv")


def write_corpora(root):
    root.mkdir(exist_ok=True)
    paths = {}
    for lang, pool in LANG_POOLS.items():
        rng = random.Random(lang)
        lines = ["".join(rng.choice(pool) for _ in range(rng.randint(30, 60)))
                 for _ in range(120)]
        path = root / f"{lang}.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths[lang] = str(path)
    return paths


def base_config(root, out_dir, **overrides):
    paths = write_corpora(root / "raw")
    gold = root / "gold.nwk"
    gold.write_text("((aaa,bbb)x,ccc)Root;", encoding="utf-8")
    cfg = {
        "seed": 0,
        "out_dir": str(out_dir),
        "languages": [{"lang": lang, "path": p} for lang, p in sorted(paths.items())],
        "corpus": {"max_chars": 256, "floor": 1},
        "model": {"order": 2},
        "gold_tree": str(gold),
    }
    cfg.update(overrides)
    path = root / "run.json"
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path


def run_ok(*argv):
    assert main(list(argv)) == 0


def run_pipeline(config, out=None):
    extra = ["--out", str(out)] if out is not None else []
    for command in ("ingest", "train", "entropy", "vectors", "tree", "compare"):
        run_ok(command, "--config", str(config), *extra)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full run shared by the read-only assertions below."""
    root = tmp_path_factory.mktemp("pipeline")
    out = root / "out"
    config = base_config(root, out)
    run_pipeline(config)
    return root, out, config


class TestFullRun:
    def test_all_artifacts_exist(self, pipeline):
        _, out, _ = pipeline
        for name in ARTIFACTS:
            assert (out / name).is_file(), name
        assert (out / "splits" / "aaa.train.txt").is_file()
        assert (out / "models" / "aaa.vocab.tsv").is_file()
        assert (out / "models" / "aaa.npz").is_file()

    def test_manifest_rows_and_hash_header(self, pipeline):
        _, out, _ = pipeline
        lines = (out / "manifest.tsv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# config_hash=")
        assert lines[1] == "lang\ttrain\tval\ttest"
        rows = [line.split("\t") for line in lines[2:]]
        assert [r[0] for r in rows] == ["aaa", "bbb", "ccc"]
        for _, train, val, test in rows:
            assert int(train) > int(val) >= int(test) >= 1

    def test_artifacts_share_the_config_hash(self, pipeline):
        _, out, _ = pipeline
        manifest_hash = (out / "manifest.tsv").read_text(encoding="utf-8").splitlines()[0]
        digest = manifest_hash.removeprefix("# config_hash=")
        for name in ("matrix.tsv", "vectors.tsv", "compare.tsv"):
            first = (out / name).read_text(encoding="utf-8").splitlines()[0]
            assert first == f"# config_hash={digest}"
        assert (out / "tree.nwk").read_text(encoding="utf-8").startswith(
            f"[config_hash={digest}]")
        assert json.loads((out / "tree.json").read_text(encoding="utf-8"))[
            "config_hash"] == digest

    def test_tree_covers_all_languages(self, pipeline):
        _, out, _ = pipeline
        newick = (out / "tree.nwk").read_text(encoding="utf-8").strip()
        tree = parse_newick(newick)
        assert tree.label == "Root"
        assert tree.leaves() == ["aaa", "bbb", "ccc"]

    def test_compare_metrics_are_exactly_mae_and_rf(self, pipeline):
        _, out, _ = pipeline
        doc = json.loads((out / "compare.json").read_text(encoding="utf-8"))
        assert sorted(doc["metrics"]) == ["mae", "rf"]
        assert doc["n_leaves"] == 3
        assert doc["candidate"] == "tree.nwk"

    def test_rerun_into_fresh_out_dir_is_byte_identical(self, pipeline):
        root, out, config = pipeline
        other = root / "out2"
        run_pipeline(config, out=other)
        for name in ARTIFACTS:
            assert (other / name).read_bytes() == (out / name).read_bytes(), name

    def test_parallel_entropy_matches_serial(self, pipeline):
        _, out, config = pipeline
        before = (out / "matrix.tsv").read_bytes()
        run_ok("entropy", "--config", str(config), "--jobs", "3")
        assert (out / "matrix.tsv").read_bytes() == before

    def test_run_log_records_each_command(self, pipeline):
        _, out, _ = pipeline
        lines = (out / "run.log").read_text(encoding="utf-8").splitlines()
        commands = [line.split("\t")[1] for line in lines]
        assert commands[:6] == ["ingest", "train", "entropy", "vectors",
                                "tree", "compare"]
        assert all("config_hash=" in line for line in lines)

    def test_seed_override_changes_the_hash(self, pipeline, tmp_path):
        root, out, config = pipeline
        run_ok("ingest", "--config", str(config), "--seed", "1",
               "--out", str(tmp_path / "seeded"))
        first = (tmp_path / "seeded" / "manifest.tsv").read_text(
            encoding="utf-8").splitlines()[0]
        original = (out / "manifest.tsv").read_text(encoding="utf-8").splitlines()[0]
        assert first != original


class TestExternalVectors:
    def test_compare_runs_without_the_entropy_stage(self, tmp_path, capsys):
        ext = tmp_path / "features.tsv"
        ext.write_text("lang\tf1\tf2\n"
                       "aaa\t0.0\t0.1\n"
                       "bbb\t0.1\t0.0\n"
                       "ccc\t0.9\t1.0\n", encoding="utf-8")
        out = tmp_path / "out"
        config = base_config(tmp_path, out,
                             vectors={"external": str(ext)},
                             clustering={"epsilon": 0.3,
                                         "min_samples_fraction": 0.3})
        run_ok("vectors", "--config", str(config))
        run_ok("tree", "--config", str(config))
        run_ok("compare", "--config", str(config))
        assert not (out / "matrix.tsv").exists()
        doc = json.loads((out / "compare.json").read_text(encoding="utf-8"))
        assert sorted(doc["metrics"]) == ["mae", "rf"]
        assert doc["metrics"]["rf"] == 0
        assert doc["metrics"]["mae"] == 0.0

    def test_concat_appends_feature_columns(self, tmp_path):
        ext = tmp_path / "features.tsv"
        ext.write_text("lang\tg1\naaa\t0.0\nbbb\t0.5\nccc\t1.0\n", encoding="utf-8")
        out = tmp_path / "out"
        config = base_config(tmp_path, out)
        run_pipeline(config)
        base_lines = (out / "vectors.tsv").read_text(encoding="utf-8").splitlines()
        run_ok("vectors", "--config", str(config), "--concat", str(ext))
        lines = (out / "vectors.tsv").read_text(encoding="utf-8").splitlines()
        # headers stay positional; one extra column carrying the new feature
        assert lines[1] == base_lines[1] + "\tf4"
        appended = {row.split("\t")[0]: row.split("\t")[-1] for row in lines[2:]}
        assert appended == {"aaa": "0", "bbb": "0.5", "ccc": "1"}


class TestSynthCommand:
    def test_report_schema_and_matrix_files(self, tmp_path):
        planted = tmp_path / "planted.nwk"
        planted.write_text("((paa,pab)s,(qaa,qab)u)Root;", encoding="utf-8")
        out = tmp_path / "out"
        config = base_config(
            tmp_path, out,
            languages=[],
            gold_tree=None,
            synth={"tree": str(planted), "alphabet_size": 30,
                   "chars_per_lang": 4000, "delta": 0.6, "seeds": [0, 1]},
        )
        run_ok("synth", "--config", str(config))
        doc = json.loads((out / "synth" / "report.json").read_text(encoding="utf-8"))
        assert sorted(doc) == ["config_hash", "report"]
        assert [row["seed"] for row in doc["report"]] == [0, 1]
        for row in doc["report"]:
            assert sorted(row) == ["diagonal_dominant", "lca_mae", "matrix",
                                   "rf", "seed"]
            assert (out / "synth" / row["matrix"]).is_file()


def expect_error(capsys, argv, fragment):
    assert main(argv) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: ")
    assert err.count("\n") == 1
    assert fragment in err


class TestErrorSurface:
    def test_stage_order_is_enforced(self, tmp_path, capsys):
        config = base_config(tmp_path, tmp_path / "out")
        cases = [
            ("train", "missing aaa.train.txt; run `entrolang ingest` first"),
            ("vectors", "missing matrix.tsv; run `entrolang entropy` first"),
            ("tree", "missing vectors.tsv; run `entrolang vectors` first"),
            ("compare", "missing tree.nwk; run `entrolang tree` first"),
        ]
        for command, fragment in cases:
            expect_error(capsys, [command, "--config", str(config)], fragment)
        run_ok("ingest", "--config", str(config))
        expect_error(capsys, ["entropy", "--config", str(config)],
                     "missing aaa.vocab.tsv; run `entrolang train` first")

    def test_compare_needs_a_gold_tree(self, tmp_path, capsys):
        config = base_config(tmp_path, tmp_path / "out", gold_tree=None)
        expect_error(capsys, ["compare", "--config", str(config)],
                     "config must set gold_tree for compare")

    def test_config_file_problems(self, tmp_path, capsys):
        expect_error(capsys, ["ingest", "--config", str(tmp_path / "nope.json")],
                     "config file not found")
        bad = tmp_path / "bad.json"
        bad.write_text("{", encoding="utf-8")
        expect_error(capsys, ["ingest", "--config", str(bad)],
                     "config is not valid JSON")
        bad.write_text("[1, 2]", encoding="utf-8")
        expect_error(capsys, ["ingest", "--config", str(bad)],
                     "config root must be a JSON object")

    def test_unknown_keys_are_rejected(self, tmp_path, capsys):
        config = base_config(tmp_path, tmp_path / "out", typo="x")
        expect_error(capsys, ["ingest", "--config", str(config)],
                     "unknown top-level config keys: ['typo']")
        config = base_config(tmp_path, tmp_path / "out", model={"ordr": 3})
        expect_error(capsys, ["ingest", "--config", str(config)],
                     "unknown keys in config section 'model': ['ordr']")

    def test_bad_enum_values(self, tmp_path, capsys):
        config = base_config(tmp_path, tmp_path / "out", model={"backend": "rnn"})
        expect_error(capsys, ["ingest", "--config", str(config)],
                     "model backend must be ngram or neural, got 'rnn'")
        config = base_config(tmp_path, tmp_path / "out",
                             clustering={"method": "kmeans"})
        expect_error(capsys, ["ingest", "--config", str(config)],
                     "clustering method must be dbscan or agglomerative, got 'kmeans'")
        config = base_config(tmp_path, tmp_path / "out",
                             clustering={"linkage": "median"})
        expect_error(capsys, ["ingest", "--config", str(config)],
                     "clustering linkage must be one of")

    def test_seed_and_out_dir_are_required(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"out_dir": "x"}), encoding="utf-8")
        expect_error(capsys, ["ingest", "--config", str(path)],
                     "config must set an integer seed (or pass --seed)")
        path.write_text(json.dumps({"seed": 0}), encoding="utf-8")
        expect_error(capsys, ["ingest", "--config", str(path)],
                     "config must set out_dir (or pass --out)")

    def test_missing_referenced_paths(self, tmp_path, capsys):
        config = base_config(tmp_path, tmp_path / "out",
                             gold_tree=str(tmp_path / "absent.nwk"))
        expect_error(capsys, ["compare", "--config", str(config)],
                     "config references missing path")

    def test_malformed_language_entries(self, tmp_path, capsys):
        config = base_config(tmp_path, tmp_path / "out",
                             languages=[{"lang": "aaa"}])
        expect_error(capsys, ["ingest", "--config", str(config)],
                     'each languages entry must be {"lang": ..., "path": ...}')

    def test_error_messages_are_single_line(self, tmp_path, capsys):
        # the languages loop wraps multi-line ValueError messages
        empty = tmp_path / "empty.txt"
        empty.write_text("\n\n", encoding="utf-8")
        config = base_config(tmp_path, tmp_path / "out",
                             languages=[{"lang": "aaa", "path": str(empty)}])
        expect_error(capsys, ["ingest", "--config", str(config)], "aaa:")


def test_missing_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == "entrolang 0.1.0"
