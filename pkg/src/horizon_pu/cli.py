"""Command-line entry point: ``horizon-pu {synth,train,analyze,network}``.

Option values resolve as command-line flag > ``--config`` JSON file >
built-in default.  Exit codes: 0 success, 1 invalid configuration or usage,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analysis, checkpoint, pipeline, textmine
from .corpus import Vocabulary, build_vocabulary, load_corpus, vectorize_corpus, write_corpus
from .mtpu import DEFAULT_WIDTH, MtpuTrainConfig
from .net import NetConfig
from .purisk import PuConfig, TrainConfig
from .synth import SynthConfig, generate

log = logging.getLogger("horizon_pu")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# name -> (type, default, help).  Help text says whether a default is a
# reference setting or a package choice.
TRAIN_OPTS = {
    "prior": (float, 0.2, "class prior p(y=+1|z=t) used for every period (reference setting)"),
    "epochs": (int, 20, "training epochs (package default)"),
    "lr": (float, 1e-3, "learning rate (package default)"),
    "batch_pos": (int, 64, "positives per minibatch (package default)"),
    "batch_unl": (int, 256, "unlabeled rows per minibatch (package default)"),
    "weight_decay": (float, 1e-4, "L2 regularization coefficient lambda (package default)"),
    "optimizer": (str, "adam", "adam or sgd (package default)"),
    "seed": (int, 0, "single seed for initialization and minibatch sampling"),
    "width": (int, DEFAULT_WIDTH, "hidden width of every layer (reference setting)"),
    "min_count": (int, 1, "vocabulary count threshold (package default)"),
    "epsilon": (float, 1e-5, "probability clamp epsilon in (0, 1/2) (package default)"),
    "loss": (str, "logistic", "surrogate loss: logistic or sigmoid (reference setting)"),
    "schedule": (str, "round_robin", "MTPU task schedule: round_robin or summed (package default)"),
    "dtype": (str, "float32", "parameter dtype: float32 or float64"),
}
SYNTH_OPTS = {
    "periods": (int, 6, "number of monthly periods"),
    "n_pos": (int, 300, "current (positive) answers per period"),
    "n_unl": (int, 300, "future (unlabeled) answers per period"),
    "vocab_size": (int, 2000, "vocabulary size"),
    "prior": (float, 0.2, "true share of near-horizon answers among future answers"),
    "overlap": (float, 0.75, "probability mass each topic puts on shared words (0 = separable)"),
    "drift": (float, 0.3, "per-period log-scale noise on word weights"),
    "mean_length": (float, 20.0, "mean tokens per answer"),
    "seed": (int, 0, "generator seed"),
}
ANALYZE_OPTS = {
    "fraction": (float, analysis.DEFAULT_FRACTION, "share of each period's future answers put in each of near/distant (reference setting)"),
    "min_count": (int, 1, "vocabulary count threshold when no vocabulary file is found"),
}
NETWORK_OPTS = {
    "k": (int, textmine.DEFAULT_TOP_K, "number of top tf-idf words (reference setting)"),
    "threshold": (float, None, "keep edges with Jaccard >= threshold (default: keep the top --top-edges pairs)"),
    "top_edges": (int, textmine.DEFAULT_TOP_EDGES, "edges kept when no threshold is given (package default)"),
}


def _add_opts(p, opts):
    for name, (typ, default, text) in opts.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=argparse.SUPPRESS,
                       help=f"{text} [default: {default}]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="horizon-pu", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic corpus and its hidden labels")
    p.add_argument("--out", required=True, help="corpus JSONL path")
    p.add_argument("--truth", required=True, help="ground-truth JSONL path ({id, y})")
    p.add_argument("--config", help="JSON file with option values")
    _add_opts(p, SYNTH_OPTS)

    p = sub.add_parser("train", help="train an MTPU model or a PU1/PU2 baseline")
    p.add_argument("--corpus", required=True, help="corpus JSONL path")
    p.add_argument("--mode", choices=pipeline.MODES, default="mtpu",
                   help="mtpu: shared trunk + per-period heads; pu1: one pooled network; pu2: one network per period [default: mtpu]")
    p.add_argument("--out", required=True, help="checkpoint path; the vocabulary goes to <out>.vocab.json")
    p.add_argument("--config", help="JSON file with option values")
    _add_opts(p, TRAIN_OPTS)

    p = sub.add_parser("analyze", help="split future answers and write the averaged-assessment tables")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True, help="MTPU checkpoint")
    p.add_argument("--pu1", help="optional PU1 checkpoint")
    p.add_argument("--pu2", help="optional PU2 checkpoint")
    p.add_argument("--vocab", help="vocabulary JSON [default: <model>.vocab.json]")
    p.add_argument("--table", required=True, help="output table CSV")
    p.add_argument("--timeseries", required=True, help="output long-form time-series CSV")
    p.add_argument("--splits", required=True, help="output near/distant membership JSONL")
    p.add_argument("--config", help="JSON file with option values")
    _add_opts(p, ANALYZE_OPTS)

    p = sub.add_parser("network", help="co-occurrence network of one (period, horizon) group")
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", required=True, help="membership JSONL written by analyze")
    p.add_argument("--period", required=True, help="period label YYYY-MM or 1-based index")
    p.add_argument("--horizon", required=True, choices=textmine.HORIZONS)
    p.add_argument("--dot", required=True, help="output Graphviz DOT path")
    p.add_argument("--json", required=True, help="output JSON path")
    p.add_argument("--config", help="JSON file with option values")
    _add_opts(p, NETWORK_OPTS)
    return parser


def resolve(args, opts) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    values = {name: opt[1] for name, opt in opts.items()}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        section = data.get(args.command, data)
        for key, val in section.items():
            key = key.replace("-", "_")
            if key in opts:
                values[key] = val
            elif key != args.command:
                log.warning("ignoring unknown config key %r", key)
    for name in opts:
        if hasattr(args, name):
            values[name] = getattr(args, name)
    return values


def _validated(fn):
    try:
        return fn()
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _write(path, data):
    Path(path).write_bytes(data if isinstance(data, bytes) else data.encode("utf-8"))


def vocab_path_for(model_path) -> Path:
    return Path(str(model_path) + ".vocab.json")


def save_vocabulary(vocab: Vocabulary, path) -> None:
    _write(path, json.dumps({"min_count": vocab.min_count, "tokens": vocab.tokens()}, ensure_ascii=False) + "\n")


def load_vocabulary(path) -> Vocabulary:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return Vocabulary({tok: i for i, tok in enumerate(obj["tokens"])}, obj.get("min_count", 1))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    v = resolve(args, SYNTH_OPTS)
    cfg = _validated(lambda: SynthConfig(
        T=v["periods"], n_pos=v["n_pos"], n_unl=v["n_unl"], vocab_size=v["vocab_size"], priors=v["prior"],
        overlap=v["overlap"], drift=v["drift"], mean_length=v["mean_length"], seed=v["seed"]))
    corpus, truth = generate(cfg)
    write_corpus(corpus, args.out)
    _write(args.truth, truth.to_jsonl())
    log.info("wrote %d documents over %d periods", len(corpus), corpus.T)
    return EXIT_OK


def _train_configs(v):
    def build():
        if v["dtype"] not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if v["width"] < 1 or v["min_count"] < 1:
            raise ValueError("width and min-count must be >= 1")
        PuConfig(v["prior"], v["loss"])
        train = TrainConfig(epochs=v["epochs"], lr=v["lr"], batch_pos=v["batch_pos"], batch_unl=v["batch_unl"],
                            weight_decay=v["weight_decay"], optimizer=v["optimizer"], seed=v["seed"])
        cfg = MtpuTrainConfig(train=train, priors=v["prior"], loss=v["loss"], schedule=v["schedule"])
        net_cfg = NetConfig(seed=v["seed"], epsilon=v["epsilon"], dtype=v["dtype"])
        return cfg, net_cfg
    return _validated(build)


def cmd_train(args) -> int:
    v = resolve(args, TRAIN_OPTS)
    cfg, net_cfg = _train_configs(v)
    corpus = load_corpus(args.corpus)
    vocab = build_vocabulary(corpus, v["min_count"])
    X = vectorize_corpus(corpus, vocab)
    log.info("training %s on %d documents, %d periods, vocabulary %d", args.mode, len(corpus), corpus.T, vocab.dim)
    ckpt = pipeline.train(args.mode, corpus, X, cfg, net_cfg, v["width"])
    checkpoint.save(ckpt, args.out)
    save_vocabulary(vocab, vocab_path_for(args.out))
    return EXIT_OK


def _load_scores(path, corpus, X, expected_kinds):
    ckpt = checkpoint.load(path)
    if ckpt.kind not in expected_kinds:
        raise ValueError(f"{path}: expected a {'/'.join(expected_kinds)} checkpoint, found {ckpt.kind!r}")
    return pipeline.score_unlabeled(ckpt, corpus, X)


def splits_jsonl(corpus, rows) -> str:
    lines = []
    for t, row in enumerate(rows, start=1):
        if row.split is None:
            continue
        for horizon in textmine.HORIZONS:
            for doc_id in getattr(row.split, horizon):
                lines.append(json.dumps({"period": corpus.period_label(t), "t": t, "horizon": horizon, "id": doc_id}))
    return "".join(line + "\n" for line in lines)


def cmd_analyze(args) -> int:
    v = resolve(args, ANALYZE_OPTS)
    fraction = v["fraction"]
    if not 0.0 < fraction <= 0.5:
        raise ConfigError(f"fraction must be in (0, 0.5], got {fraction}")
    corpus = load_corpus(args.corpus)
    vpath = Path(args.vocab) if args.vocab else vocab_path_for(args.model)
    vocab = load_vocabulary(vpath) if vpath.exists() else build_vocabulary(corpus, v["min_count"])
    X = vectorize_corpus(corpus, vocab)
    mtpu_scores = _load_scores(args.model, corpus, X, ("mtpu",))
    pu1 = _load_scores(args.pu1, corpus, X, ("dense",)) if args.pu1 else None
    pu2 = _load_scores(args.pu2, corpus, X, ("multi",)) if args.pu2 else None
    rows = analysis.assessment_table(corpus, mtpu_scores, fraction, pu1, pu2)
    for r in rows:
        if r.error:
            log.warning("%s", r.error)
    _write(args.table, analysis.table_csv(rows))
    _write(args.timeseries, analysis.timeseries_csv(rows))
    _write(args.splits, splits_jsonl(corpus, rows))
    return EXIT_OK


class _Membership:
    def __init__(self):
        self.near, self.distant = [], []


def read_splits(text: str) -> dict[int, _Membership]:
    out: dict[int, _Membership] = {}
    for line in text.splitlines():
        if line.strip():
            rec = json.loads(line)
            getattr(out.setdefault(int(rec["t"]), _Membership()), rec["horizon"]).append(rec["id"])
    return out


def _period_index(corpus, token: str) -> int:
    if token in corpus.period_labels:
        return corpus.period_labels.index(token) + 1
    if token.isdigit() and 1 <= int(token) <= corpus.T:
        return int(token)
    raise ValueError(f"unknown period {token!r}")


def cmd_network(args) -> int:
    v = resolve(args, NETWORK_OPTS)
    if v["k"] < 1 or v["top_edges"] < 1:
        raise ConfigError("k and top-edges must be >= 1")
    if v["threshold"] is not None and not 0.0 <= v["threshold"] <= 1.0:
        raise ConfigError("threshold must be in [0, 1]")
    corpus = load_corpus(args.corpus)
    t = _period_index(corpus, args.period)
    groups = textmine.groups_from_splits(read_splits(Path(args.splits).read_text(encoding="utf-8")))
    target = [g for g in groups if g.label == (t, args.horizon)]
    if not target:
        raise ValueError(f"no {args.horizon} documents for period {args.period}")
    net = textmine.build_network(target[0], groups, corpus, v["k"], v["threshold"], v["top_edges"])
    _write(args.dot, textmine.export_network(net, "dot"))
    _write(args.json, textmine.export_network(net, "json"))
    log.info("network: %d nodes, %d edges", len(net.nodes), len(net.edges))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "analyze": cmd_analyze, "network": cmd_network}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"horizon-pu: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surface any failure as a runtime exit code
        print(f"horizon-pu {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
