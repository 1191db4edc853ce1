"""Command-line pipelines: generate, train, evaluate, compare, inspect-loss.

Every subcommand resolves one flat configuration from, in increasing
priority: schema defaults, ``--config`` key=value file, and command-line
flags. generate and train write the resolved configuration next to their
outputs so a run can be replayed with ``--config``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 divergence.
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from relmargin.data import (
    SyntheticSpec,
    generate_synthetic,
    load_split,
    load_triplets,
    parse_qrels,
    parse_run,
    write_qrels,
    write_run,
    write_split,
    write_triplets,
)
from relmargin.embeddings import load_table, save_table
from relmargin.errors import ConfigError, DataFormatError, DivergenceError
from relmargin.evaluation import evaluate_run, full_rank, metrics_csv, parse_metric, rerank
from relmargin.geometry import cosine
from relmargin.loss import LossSpec, batch_loss, make_batch
from relmargin.stats import bonferroni, paired_tost
from relmargin.trainer import TrainConfig, train, write_telemetry

log = logging.getLogger("relmargin")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGENCE = 0, 1, 2, 3


# -- schema -------------------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(kind):
    def parse(text: str):
        return None if text.strip() in ("", "none", "None") else kind(text)
    parse.__name__ = f"optional {kind.__name__.lstrip('_')}"
    return parse


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return value


def _names(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


@dataclass(frozen=True)
class Key:
    name: str
    parse: object
    default: str
    help: str
    group: str


SCHEMA = [
    Key("seed", _seed, "0", "single source of randomness", "global"),
    Key("out", str, "out", "output directory", "global"),
    Key("data_dir", str, "", "directory holding generated inputs (default: out)", "global"),
    # corpus
    Key("n_topics", int, "32", "topic clusters", "generate"),
    Key("docs_per_topic", int, "8", "documents per topic", "generate"),
    Key("queries_per_topic", int, "4", "queries per topic", "generate"),
    Key("val_queries_per_topic", int, "1", "held-out validation queries per topic", "generate"),
    Key("dim", int, "32", "embedding dimension", "generate"),
    Key("hardness", float, "0.3", "probability a negative comes from the nearest topic", "generate"),
    Key("doc_noise", float, "1.2", "document perturbation norm", "generate"),
    Key("query_noise", float, "0.3", "query perturbation norm", "generate"),
    Key("anisotropy", float, "1.0", "pull of topic centers toward a shared direction", "generate"),
    Key("graded", _bool, "false", "graded qrels tiers 3/2/1 instead of 3 only", "generate"),
    Key("triples_per_query", int, "32", "training triples per training query", "generate"),
    # loss and optimizer
    Key("loss", str, "static", "static | adaptive | distributed", "train"),
    Key("epsilon", _optional(float), "", "static target (default 1.0)", "train"),
    Key("in_batch", _optional(_bool), "", "in-batch negatives (forced for distributed)", "train"),
    Key("batch_size", int, "64", "triplets per step", "train"),
    Key("lr", _optional(float), "", "base learning rate (default 5e-6 / batch_size)", "train"),
    Key("weight_decay", float, "1e-06", "decoupled weight decay", "train"),
    Key("lr_gamma", float, "0.99999", "per-step exponential decay", "train"),
    Key("eval_every", int, "500", "steps between validation checks", "train"),
    Key("patience", int, "16", "checks without improvement before stopping", "train"),
    Key("max_epochs", int, "1", "passes over the triplets", "train"),
    Key("max_steps", _optional(int), "", "hard step limit", "train"),
    Key("update_queries", _bool, "true", "also update query embeddings", "train"),
    Key("val_metric", str, "nDCG@10", "early-stopping metric on the validation split", "train"),
    # evaluation
    Key("checkpoint", str, "", "embedding table to evaluate (default: out/checkpoint.tsv)", "evaluate"),
    Key("mode", str, "full", "full | rerank", "evaluate"),
    Key("depth", int, "1000", "rerank depth (also the generated baseline depth)", "evaluate"),
    Key("k", int, "1000", "run depth for full ranking", "evaluate"),
    Key("metric", _names, "nDCG@10,Recall@1000,Hits@100", "comma-separated metrics", "evaluate"),
    Key("binarize_threshold", int, "1", "grade > threshold counts as relevant", "evaluate"),
    Key("split", str, "validation", "query split to evaluate: train | validation | all", "evaluate"),
    # comparison
    Key("run_a", str, "", "first run file", "compare"),
    Key("run_b", str, "", "second run file", "compare"),
    Key("qrels", str, "", "qrels file (default: data_dir/qrels.txt)", "compare"),
    Key("epsilon_l", float, "0.05", "equivalence bound on the mean score difference", "compare"),
    Key("alpha", float, "0.05", "significance level", "compare"),
    Key("family", int, "1", "Bonferroni family size", "compare"),
    # inspection
    Key("query_id", str, "", "query whose batch is inspected", "inspect-loss"),
    Key("triplets", str, "", "triplet file (default: data_dir/triplets.tsv)", "inspect-loss"),
]
KEYS = {k.name: k for k in SCHEMA}


def parse_value(name: str, text: str):
    key = KEYS.get(name)
    if key is None:
        raise ConfigError(f"unknown config key {name!r}")
    try:
        return key.parse(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def read_config(path) -> dict[str, str]:
    """Raw ``key=value`` pairs; ``#`` starts a comment, blank lines are ignored."""
    raw: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        name, value = (part.strip() for part in line.split("=", 1))
        name = name.replace("-", "_")
        if name not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {name!r}")
        raw[name] = value
    return raw


def resolve(config_path=None, overrides=None) -> dict:
    raw = {k.name: k.default for k in SCHEMA}
    if config_path:
        raw.update(read_config(config_path))
    for name, value in (overrides or {}).items():
        if value is not None:
            raw[name] = value if isinstance(value, str) else _format(value)
    return {name: parse_value(name, text) for name, text in raw.items()}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(value)
    return "" if value is None else str(value)


def dump_config(cfg: dict) -> str:
    """Resolved config minus ``out``, so identical runs in different directories match."""
    return "".join(f"{k.name}={_format(cfg[k.name])}\n" for k in SCHEMA if k.name != "out")


def _schema_help() -> str:
    lines = ["\b", "Config keys (key=default):"]
    group = None
    for key in SCHEMA:
        if key.group != group:
            group = key.group
            lines.append(f" [{group}]")
        lines.append(f"  {key.name}={key.default}  {key.help}")
    return "\n".join(lines)


# -- plumbing -------------------------------------------------------------------


def _data(cfg) -> Path:
    return Path(cfg["data_dir"] or cfg["out"])


def _path(cfg, key, filename, base="data_dir") -> Path:
    if cfg.get(key):
        return Path(cfg[key])
    return (_data(cfg) if base == "data_dir" else Path(cfg[base])) / filename


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataFormatError(f"cannot create output directory {out}: {exc}") from None
    return out


def _need(path: Path, what: str) -> Path:
    if not path.exists():
        raise DataFormatError(f"missing {what}: {path}")
    return path


def _loss_spec(cfg) -> LossSpec:
    try:
        return LossSpec(cfg["loss"], cfg["epsilon"], cfg["in_batch"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _metrics(cfg):
    try:
        return [parse_metric(m, threshold=cfg["binarize_threshold"]) for m in cfg["metric"]]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _queries_for(split: dict[str, str], which: str) -> list[str]:
    if which == "all":
        return sorted(split)
    if which not in ("train", "validation"):
        raise ConfigError(f"split must be train, validation or all, got {which!r}")
    return sorted(q for q, s in split.items() if s == which)


def _doc_ids(table, split) -> list[str]:
    return [i for i in table.ids if i not in split]


_FLAG_TO_KEY = {"epsilon_L": "epsilon_l"}


def _overrides(ctx: click.Context, **flags) -> dict:
    merged = dict(ctx.obj or {})
    for name, value in flags.items():
        if value is not None and value != ():
            merged[_FLAG_TO_KEY.get(name, name)] = value
    return merged


def _config_path(ctx: click.Context, local):
    return local or (ctx.obj or {}).get("__config")


def global_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                      help="flat key=value config file")(fn)
    fn = click.option("--seed", type=str, help="u64 seed")(fn)
    fn = click.option("--out", type=str, help="output directory")(fn)
    fn = click.option("--data-dir", "data_dir", type=str, help="input directory")(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@global_options
@click.option("-v", "--verbose", count=True, help="more logging")
@click.pass_context
def cli(ctx, config_path, seed, out, data_dir, verbose):
    """Relevance-margin embedding training lab."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {k: v for k, v in (("seed", seed), ("out", out), ("data_dir", data_dir)) if v is not None}
    if config_path:
        ctx.obj["__config"] = config_path


def _resolve(ctx, config_path, **flags):
    overrides = _overrides(ctx, **flags)
    overrides.pop("__config", None)
    return resolve(_config_path(ctx, config_path), overrides)


# -- generate -------------------------------------------------------------------


@cli.command(epilog=_schema_help())
@global_options
@click.option("--n-topics", type=str)
@click.option("--docs-per-topic", type=str)
@click.option("--queries-per-topic", type=str)
@click.option("--dim", type=str)
@click.option("--hardness", type=str)
@click.option("--graded/--no-graded", default=None)
@click.pass_context
def generate(ctx, config_path, **flags):
    """Write a synthetic corpus: features, oracle table, triplets, qrels, split, baseline run."""
    cfg = _resolve(ctx, config_path, **flags)
    spec = SyntheticSpec(
        n_topics=cfg["n_topics"], docs_per_topic=cfg["docs_per_topic"],
        queries_per_topic=cfg["queries_per_topic"], dim=cfg["dim"], hardness=cfg["hardness"],
        seed=cfg["seed"], doc_noise=cfg["doc_noise"], query_noise=cfg["query_noise"],
        anisotropy=cfg["anisotropy"], graded=cfg["graded"],
        val_queries_per_topic=cfg["val_queries_per_topic"],
        triples_per_query=cfg["triples_per_query"],
    )
    corpus = generate_synthetic(spec)
    out = _outdir(cfg)
    save_table(corpus.features, out / "features.tsv")
    save_table(corpus.oracle_table(), out / "oracle.tsv")
    write_triplets(corpus.triplets, out / "triplets.tsv")
    write_qrels(corpus.qrels, out / "qrels.txt")
    write_split(corpus.split, out / "split.tsv")
    baseline = full_rank(corpus.features, corpus.query_ids, corpus.doc_ids, cfg["depth"], tag="features")
    write_run(baseline, out / "baseline.run")
    (out / "generate.cfg").write_text(dump_config(cfg), encoding="utf-8")
    click.echo(f"{len(corpus.query_ids)} queries, {len(corpus.doc_ids)} documents, "
               f"{len(corpus.triplets)} triplets -> {out}")


# -- train ----------------------------------------------------------------------


@cli.command("train", epilog=_schema_help())
@global_options
@click.option("--loss", type=click.Choice(["static", "adaptive", "distributed"]))
@click.option("--epsilon", type=str)
@click.option("--in-batch/--no-in-batch", "in_batch", default=None)
@click.option("--batch-size", type=str)
@click.option("--lr", type=str)
@click.option("--weight-decay", type=str)
@click.option("--lr-gamma", type=str)
@click.option("--eval-every", type=str)
@click.option("--patience", type=str)
@click.option("--max-epochs", type=str)
@click.option("--max-steps", type=str)
@click.pass_context
def train_cmd(ctx, config_path, **flags):
    """Train the embedding table; writes checkpoint.tsv and telemetry.csv."""
    cfg = _resolve(ctx, config_path, **flags)
    spec = _loss_spec(cfg)
    try:
        tcfg = TrainConfig(
            batch_size=cfg["batch_size"], base_lr=cfg["lr"], weight_decay=cfg["weight_decay"],
            lr_gamma=cfg["lr_gamma"], eval_every=cfg["eval_every"], patience=cfg["patience"],
            max_epochs=cfg["max_epochs"], max_steps=cfg["max_steps"], seed=cfg["seed"],
            update_queries=cfg["update_queries"],
        )
        val_spec = parse_metric(cfg["val_metric"], threshold=cfg["binarize_threshold"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    data = _data(cfg)
    table = load_table(_need(data / "features.tsv", "feature table"))
    dataset = load_triplets(_need(_path(cfg, "triplets", "triplets.tsv"), "triplets"))
    split = load_split(_need(data / "split.tsv", "split manifest"))
    qrels = parse_qrels(_need(_path(cfg, "qrels", "qrels.txt"), "qrels"))

    hook = None
    val = _queries_for(split, "validation")
    if val:
        docs = _doc_ids(table, split)
        val_qrels = qrels.subset(val)

        def hook(t):
            run = full_rank(t, val, docs, val_spec.k)
            return evaluate_run(run, val_qrels, [val_spec]).means[val_spec.label]

    out = _outdir(cfg)
    (out / "train.cfg").write_text(dump_config(cfg), encoding="utf-8")
    try:
        result = train(tcfg, spec, dataset, table, hook)
    except DivergenceError as exc:
        records = list(exc.telemetry) + ([exc.record] if exc.record is not None else [])
        write_telemetry(records, out / "telemetry.csv")
        raise
    save_table(result.table, out / "checkpoint.tsv")
    write_telemetry(result.telemetry, out / "telemetry.csv")
    best = "n/a" if result.best_metric is None else f"{result.best_metric:.4f} at step {result.best_step}"
    click.echo(f"{spec.label}: {result.steps} steps, best {val_spec.label} {best}"
               f"{' (early stop)' if result.stopped_early else ''} -> {out}")


# -- evaluate -------------------------------------------------------------------


@cli.command(epilog=_schema_help())
@global_options
@click.option("--checkpoint", type=str)
@click.option("--mode", type=click.Choice(["full", "rerank"]))
@click.option("--depth", type=str)
@click.option("--k", type=str)
@click.option("--metric", type=str, multiple=True, help="repeatable, e.g. --metric nDCG@10")
@click.option("--binarize-threshold", type=str)
@click.option("--split", type=str)
@click.pass_context
def evaluate(ctx, config_path, metric, **flags):
    """Rank with a checkpoint and score the run; writes run.txt and metrics.csv."""
    cfg = _resolve(ctx, config_path, metric=",".join(metric) if metric else None, **flags)
    specs = _metrics(cfg)
    data = _data(cfg)
    table = load_table(_need(_path(cfg, "checkpoint", "checkpoint.tsv", base="out"), "checkpoint"))
    split = load_split(_need(data / "split.tsv", "split manifest"))
    qids = _queries_for(split, cfg["split"])
    qrels = parse_qrels(_need(_path(cfg, "qrels", "qrels.txt"), "qrels")).subset(qids)

    if cfg["mode"] == "full":
        run = full_rank(table, qids, _doc_ids(table, split), cfg["k"])
    elif cfg["mode"] == "rerank":
        baseline = parse_run(_need(data / "baseline.run", "baseline run"))
        keep = set(qids)
        baseline.rows = [r for r in baseline.rows if r.query_id in keep]
        run = rerank(baseline, table, cfg["depth"])
    else:
        raise ConfigError(f"mode must be full or rerank, got {cfg['mode']!r}")

    report = evaluate_run(run, qrels, specs)
    out = _outdir(cfg)
    write_run(run, out / "run.txt")
    (out / "metrics.csv").write_text(metrics_csv(report), encoding="utf-8")
    for spec in specs:
        click.echo(f"{spec.label}\t{report.means[spec.label]:.4f}\t"
                   f"n={len(report.per_query[spec.label])}")


# -- compare ----------------------------------------------------------------------

COMPARE_FIELDS = ("system_a", "system_b", "metric", "n", "mean_diff", "p_tost", "p_adjusted", "equivalent")


def compare_runs(run_a, run_b, qrels, specs, epsilon_L, alpha, family, names=("a", "b")):
    """Rows of the equivalence table, one per metric.

    Only qrels queries that appear in at least one run are compared, and
    every such query must appear in both.
    """
    qa, qb = set(run_a.queries()), set(run_b.queries())
    judged = set(qrels.queries())
    missing_a = sorted((qb & judged) - qa)
    missing_b = sorted((qa & judged) - qb)
    if missing_a or missing_b:
        raise DataFormatError(f"run coverage mismatch: missing from {names[0]}: {missing_a[:10]}, "
                              f"missing from {names[1]}: {missing_b[:10]}")
    covered = sorted((qa | qb) & judged)
    if len(covered) < 2:
        raise DataFormatError("need at least 2 judged queries covered by both runs")
    sub = qrels.subset(covered)
    ra, rb = evaluate_run(run_a, sub, specs), evaluate_run(run_b, sub, specs)
    rows = []
    for spec in specs:
        qids = sorted(ra.per_query[spec.label])
        res = paired_tost(ra.vector(spec.label, qids), rb.vector(spec.label, qids), epsilon_L, alpha)
        p_adj = bonferroni([res.p_tost], family)[0]
        rows.append((names[0], names[1], spec.label, res.n, res.mean_diff, res.p_tost, p_adj,
                     p_adj < alpha))
    return rows


@cli.command(epilog=_schema_help())
@global_options
@click.option("--run-a", type=str)
@click.option("--run-b", type=str)
@click.option("--qrels", type=str)
@click.option("--metric", type=str, multiple=True)
@click.option("--epsilon-L", "epsilon_L", type=str)
@click.option("--alpha", type=str)
@click.option("--family", type=str)
@click.option("--binarize-threshold", type=str)
@click.pass_context
def compare(ctx, config_path, metric, **flags):
    """Paired TOST equivalence of two runs per metric; writes compare.csv."""
    cfg = _resolve(ctx, config_path, metric=",".join(metric) if metric else None, **flags)
    if not cfg["run_a"] or not cfg["run_b"]:
        raise ConfigError("compare needs run_a and run_b")
    if cfg["family"] < 1:
        raise ConfigError("family must be >= 1")
    specs = _metrics(cfg)
    path_a, path_b = Path(cfg["run_a"]), Path(cfg["run_b"])
    run_a = parse_run(_need(path_a, "run_a"))
    run_b = parse_run(_need(path_b, "run_b"))
    qrels = parse_qrels(_need(_path(cfg, "qrels", "qrels.txt"), "qrels"))
    names = (path_a.stem, path_b.stem)
    if names[0] == names[1]:
        # same file name in two directories; keep the parent to tell them apart
        names = (f"{path_a.parent.name}/{path_a.stem}", f"{path_b.parent.name}/{path_b.stem}")
    rows = compare_runs(run_a, run_b, qrels, specs, cfg["epsilon_l"], cfg["alpha"], cfg["family"],
                        names=names)
    lines = [",".join(COMPARE_FIELDS)]
    for a, b, label, n, diff, p, p_adj, eq in rows:
        lines.append(f"{a},{b},{label},{n},{diff!r},{p!r},{p_adj!r},{str(eq).lower()}")
    text = "\n".join(lines) + "\n"
    out = _outdir(cfg)
    (out / "compare.csv").write_text(text, encoding="utf-8")
    click.echo(text, nl=False)


# -- inspect-loss -------------------------------------------------------------------


def inspect_rows(table, dataset, spec: LossSpec, query_id: str, batch_size: int):
    """Per-negative (neg_id, rho_pos, rho_neg, target, l2) for one query's batch.

    The batch is the file-order batch holding the query's first triplet; the
    query is compared against every negative of that batch, so ``rho_neg``
    is the negative entering the margin (the query's own negative for
    distributed targets). Rows are sorted by target descending.
    """
    triples = list(dataset)
    at = next((n for n, t in enumerate(triples) if t[0] == query_id), None)
    if at is None:
        raise DataFormatError(f"query {query_id!r} has no triplets")
    lo = at - at % batch_size
    chunk = triples[lo:lo + batch_size]
    i = at - lo
    pairwise = LossSpec(spec.variant, spec.epsilon, True)
    batch = make_batch(table.matrix(t[0] for t in chunk), table.matrix(t[1] for t in chunk),
                       table.matrix(t[2] for t in chunk))
    report = batch_loss(pairwise, batch)
    q, p = table[chunk[i][0]], table[chunk[i][1]]
    rho_pos = cosine(q, p)
    rows = []
    for inst in report.per_instance:
        if inst.i != i:
            continue
        rows.append((chunk[inst.j][2], rho_pos, rho_pos - inst.margin, inst.target, inst.squared_term))
    rows.sort(key=lambda r: -r[3])
    return rows


@cli.command("inspect-loss", epilog=_schema_help())
@global_options
@click.option("--checkpoint", type=str)
@click.option("--triplets", type=str)
@click.option("--query-id", type=str)
@click.option("--loss", type=click.Choice(["static", "adaptive", "distributed"]))
@click.option("--epsilon", type=str)
@click.option("--in-batch/--no-in-batch", "in_batch", default=None)
@click.option("--batch-size", type=str)
@click.pass_context
def inspect_loss(ctx, config_path, **flags):
    """Print rho, scaled target and squared instance loss for every negative of one query's batch."""
    cfg = _resolve(ctx, config_path, **flags)
    if not cfg["query_id"]:
        raise ConfigError("inspect-loss needs query_id")
    spec = _loss_spec(cfg)
    table = load_table(_need(_path(cfg, "checkpoint", "checkpoint.tsv", base="out"), "checkpoint"))
    dataset = load_triplets(_need(_path(cfg, "triplets", "triplets.tsv"), "triplets"))
    rows = inspect_rows(table, dataset, spec, cfg["query_id"], cfg["batch_size"])
    mid = (len(rows) - 1) // 2
    click.echo(f"# {spec.label} query={cfg['query_id']}")
    click.echo("mark\tneg_id\trho_pos\trho_neg\ttarget\tl2")
    for n, (neg, rp, rn, t, l2) in enumerate(rows):
        mark = "max" if n == 0 else "min" if n == len(rows) - 1 else "mid" if n == mid else ""
        click.echo(f"{mark}\t{neg}\t{rp:.4f}\t{rn:.4f}\t{t:.4f}\t{l2:.4f}")


# -- entry point -------------------------------------------------------------------


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="relmargin", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except DivergenceError as exc:
        click.echo(f"error: divergence: {exc}", err=True)
        return EXIT_DIVERGENCE
    except (DataFormatError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
