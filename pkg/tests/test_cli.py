import csv
import filecmp
import math

import numpy as np
import pytest

from relmargin import cli
from relmargin.data import load_split, parse_run
from relmargin.embeddings import EmbeddingTable, save_table
from relmargin.evaluation import MetricSpec, read_metrics_csv
from relmargin.stats import bonferroni, paired_tost
from relmargin.trainer import read_telemetry

SMALL = ["--seed", "3"]
SMALL_GEN = ["--n-topics", "4", "--docs-per-topic", "4", "--queries-per-topic", "3", "--dim", "8"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "data"
    assert run("--out", out, *SMALL, "generate", *SMALL_GEN) == 0
    return out


def test_generate_files_and_manifest(generated):
    names = {p.name for p in generated.iterdir()}
    assert {"features.tsv", "oracle.tsv", "triplets.tsv", "qrels.txt", "split.tsv", "baseline.run",
            "generate.cfg"} <= names
    assert len(load_split(generated / "split.tsv")) == 4 * 3


def test_generate_deterministic(tmp_path, generated):
    again = tmp_path / "again"
    assert run("--out", again, *SMALL, "generate", *SMALL_GEN) == 0
    cmp = filecmp.dircmp(generated, again)
    assert cmp.left_only == cmp.right_only == []
    _, mismatch, errors = filecmp.cmpfiles(generated, again, cmp.common_files, shallow=False)
    assert mismatch == errors == []


def test_generate_one_topic_is_config_error(tmp_path):
    assert run("--out", tmp_path, "generate", "--n-topics", "1") == cli.EXIT_USAGE


def test_train_outputs(generated, tmp_path):
    out = tmp_path / "run"
    rc = run("--data-dir", generated, "--out", out, "train", "--loss", "static", "--epsilon", "1.0",
             "--batch-size", "8", "--lr", "1e-2", "--eval-every", "2", "--max-epochs", "2")
    assert rc == 0
    tel = read_telemetry(out / "telemetry.csv")
    with open(generated / "triplets.tsv") as fh:
        n = sum(1 for _ in fh)
    assert len(tel) == 2 * math.ceil(n / 8)
    assert (out / "checkpoint.tsv").exists()
    assert "loss=static" in (out / "train.cfg").read_text()


def test_distributed_rejects_no_in_batch(generated):
    assert run("--out", generated, "train", "--loss", "distributed", "--no-in-batch") == cli.EXIT_USAGE


def test_missing_inputs_is_data_error(tmp_path):
    assert run("--out", tmp_path, "train") == cli.EXIT_DATA


def test_divergence_exit_code(generated, tmp_path):
    rc = run("--data-dir", generated, "--out", tmp_path / "div", "train", "--lr", "1e300",
             "--weight-decay", "0", "--batch-size", "4", "--max-epochs", "3")
    assert rc == cli.EXIT_DIVERGENCE


def test_evaluate_oracle_ceiling_and_determinism(generated, tmp_path):
    args = ("--data-dir", generated, "--out", tmp_path / "e1", "evaluate", "--checkpoint",
            generated / "oracle.tsv", "--split", "all", "--metric", "nDCG@10")
    assert run(*args) == 0
    m = read_metrics_csv(tmp_path / "e1" / "metrics.csv")
    assert m["nDCG@10"]["ALL"] == 1.0
    args2 = ("--data-dir", generated, "--out", tmp_path / "e2") + args[4:]
    assert run(*args2) == 0
    for name in ("metrics.csv", "run.txt"):
        assert (tmp_path / "e1" / name).read_bytes() == (tmp_path / "e2" / name).read_bytes()


def test_rerank_depth_one(generated, tmp_path):
    out = tmp_path / "rr"
    assert run("--data-dir", generated, "--out", out, "evaluate", "--checkpoint", generated / "features.tsv",
               "--mode", "rerank", "--depth", "1", "--split", "all") == 0
    base = parse_run(generated / "baseline.run").rankings()
    got = parse_run(out / "run.txt").rankings()
    assert got == {q: r[:1] for q, r in base.items()}


def test_compare_self_and_recompute(generated, tmp_path):
    e = tmp_path / "e"
    assert run("--data-dir", generated, "--out", e, "evaluate", "--checkpoint", generated / "features.tsv",
               "--split", "all") == 0
    oracle = tmp_path / "o"
    assert run("--data-dir", generated, "--out", oracle, "evaluate", "--checkpoint", generated / "oracle.tsv",
               "--split", "all") == 0
    c = tmp_path / "c"
    assert run("--data-dir", generated, "--out", c, "compare", "--run-a", e / "run.txt", "--run-b", e / "run.txt",
               "--metric", "nDCG@10") == 0
    rows = list(csv.DictReader(open(c / "compare.csv")))
    assert rows[0]["equivalent"] == "true"
    assert list(rows[0]) == list(cli.COMPARE_FIELDS)

    assert run("--data-dir", generated, "--out", c, "compare", "--run-a", e / "run.txt", "--run-b",
               oracle / "run.txt", "--metric", "nDCG@10", "--metric", "Recall@5", "--family", "2") == 0
    rows = list(csv.DictReader(open(c / "compare.csv")))
    ma, mb = read_metrics_csv(e / "metrics.csv"), read_metrics_csv(oracle / "metrics.csv")
    for row in rows:
        label = row["metric"]
        if label not in ma:
            continue
        qids = sorted(q for q in ma[label] if q != "ALL")
        res = paired_tost([ma[label][q] for q in qids], [mb[label][q] for q in qids])
        assert float(row["p_tost"]) == res.p_tost
        assert float(row["p_adjusted"]) == bonferroni([res.p_tost], 2)[0]
        assert row["equivalent"] == str(bonferroni([res.p_tost], 2)[0] < 0.05).lower()


def test_compare_family_one_unadjusted(generated, tmp_path):
    e = tmp_path / "e"
    run("--data-dir", generated, "--out", e, "evaluate", "--checkpoint", generated / "features.tsv", "--split", "all")
    run("--data-dir", generated, "--out", e / "o", "evaluate", "--checkpoint", generated / "oracle.tsv",
        "--split", "all")
    assert run("--data-dir", generated, "--out", e, "compare", "--run-a", e / "run.txt",
               "--run-b", e / "o" / "run.txt", "--metric", "nDCG@10") == 0
    row = next(csv.DictReader(open(e / "compare.csv")))
    assert row["p_tost"] == row["p_adjusted"]


def test_compare_coverage_mismatch(generated, tmp_path):
    a = tmp_path / "a.run"
    b = tmp_path / "b.run"
    a.write_text("q00 Q0 d00 1 0.5 t\nq01 Q0 d00 1 0.5 t\n")
    b.write_text("q00 Q0 d00 1 0.5 t\n")
    assert run("--data-dir", generated, "--out", tmp_path, "compare", "--run-a", a, "--run-b", b) == cli.EXIT_DATA


def test_inspect_loss_table3_row(tmp_path, capsys):
    # Gram matrix with cos(q,p)=0.79, cos(q,n)=0.34, cos(p,n)=0.38 (t = 0.69)
    G = np.array([[1.0, 0.79, 0.34], [0.79, 1.0, 0.38], [0.34, 0.38, 1.0]])
    L = np.linalg.cholesky(G)
    save_table(EmbeddingTable(["q", "p", "n"], L), tmp_path / "ck.tsv")
    (tmp_path / "t.tsv").write_text("q\tp\tn\n")
    assert run("--out", tmp_path, "inspect-loss", "--checkpoint", tmp_path / "ck.tsv", "--triplets",
               tmp_path / "t.tsv", "--query-id", "q", "--loss", "adaptive") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1].split("\t") == ["max", "n", "0.7900", "0.3400", "0.6900", "0.0576"]


def test_inspect_loss_rows(generated, capsys):
    assert run("--data-dir", generated, "--out", generated, "inspect-loss", "--checkpoint",
               generated / "features.tsv", "--query-id", "q00", "--loss", "adaptive", "--batch-size", "8") == 0
    lines = capsys.readouterr().out.splitlines()
    body = [ln.split("\t") for ln in lines[2:]]
    assert len(body) == 8
    targets = [float(r[4]) for r in body]
    assert targets == sorted(targets, reverse=True)
    assert [r[0] for r in body if r[0]] == ["max", "mid", "min"]
    for _, _, rp, rn, t, l2 in body:
        assert float(l2) == pytest.approx((float(rp) - float(rn) - float(t)) ** 2, abs=2e-4)


def test_inspect_loss_unknown_query(generated):
    assert run("--out", generated, "inspect-loss", "--checkpoint", generated / "features.tsv",
               "--query-id", "nope") == cli.EXIT_DATA


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# comment\nbatch_size = 16\nloss=adaptive\nlr=0.5\n")
    resolved = cli.resolve(cfg, {"lr": "0.25"})
    assert resolved["batch_size"] == 16 and resolved["loss"] == "adaptive" and resolved["lr"] == 0.25
    assert resolved["epsilon"] is None and resolved["data_dir"] == ""
    assert cli.resolve(None, {})["lr"] is None


@pytest.mark.parametrize("text", ["bogus=1\n", "batch_size\n", "batch_size=many\n", "seed=-1\n"])
def test_config_rejects(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert run("--config", cfg, "--out", tmp_path, "generate") == cli.EXIT_USAGE


def test_dumped_config_round_trips(tmp_path):
    cfg = cli.resolve(None, {"metric": ("nDCG@10", "Hits@5"), "in_batch": True, "max_steps": 7})
    path = tmp_path / "x.cfg"
    path.write_text(cli.dump_config(cfg))
    assert not any(line.startswith("out=") for line in cli.dump_config(cfg).splitlines())
    assert cli.resolve(path) == cfg


@pytest.mark.parametrize("cmd", ["generate", "train", "evaluate", "compare", "inspect-loss"])
def test_help_lists_every_key(cmd, capsys):
    assert run(cmd, "--help") == 0
    text = capsys.readouterr().out
    for key in cli.SCHEMA:
        assert f"{key.name}={key.default}" in text


def test_unknown_flag_is_usage_error():
    assert run("train", "--bogus") == cli.EXIT_USAGE
