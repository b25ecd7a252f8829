"""Command-line interface.

Six subcommands cover the full pipeline: generate -> split -> train -> eval,
plus the ablate grid and the analyze difficulty report.  Each invocation
writes into one run directory (flag --out, else $GRAPHCOREF_OUT_ROOT/<cmd>,
else runs/<cmd>) holding the outputs, a run.log, and a run_meta.json snapshot
of every effective setting.  Nothing written depends on the clock, so
re-running a command with the same inputs reproduces its outputs byte for
byte.

Settings may come from a "key = value" config file (--config); explicit flags
win over the file, the file wins over built-in defaults.  Exit codes: 0 ok,
1 usage, 2 bad data, 3 training divergence.  Errors print to stderr as
"error: <message>".
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import io as gio
from .analysis import (
    cosine_pairwise_baseline,
    evaluate_split,
    run_ablation,
    save_ablation_plot,
    surface_hash_features,
    tp_levenshtein_report,
    tune_cosine_threshold,
    tune_link_threshold,
)
from .errors import DataError, TrainingDiverged
from .graph import build_graph, identity_features, split_edges
from .models import ModelConfig, TrainedModel, train
from .synth import GenParams, write_corpus_files


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through our exit-code scheme."""

    def error(self, message):
        raise UsageError(message)


def _out_dir(args) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = os.environ.get("GRAPHCOREF_OUT_ROOT", "runs")
        out = Path(root) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(args, out: Path, lines: list[str]) -> int:
    """Print the summary, mirror it to run.log, snapshot effective settings."""
    settings = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")
    }
    gio.write_json(out / "run_meta.json", {"command": args.command, "settings": settings})
    with (out / "run.log").open("w", encoding="utf-8") as fh:
        for line in lines:
            print(line)
            fh.write(line + "\n")
    return 0


def _load_graph(corpus_path: str):
    return build_graph(gio.read_corpus(corpus_path))


def _features_for(args, graph):
    if getattr(args, "features", None):
        return gio.load_features(args.features, graph)
    return identity_features(graph)


def _parse_list(raw: str, kind, what: str):
    try:
        values = [kind(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"cannot parse {what} list '{raw}'") from None
    if not values:
        raise UsageError(f"empty {what} list")
    return values


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        kind=args.model,
        hidden_dim=args.hidden,
        latent_dim=args.latent,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
        dropout=args.dropout,
        threshold=args.threshold,
        adjacency=args.adjacency,
    )


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    out = _out_dir(args)
    params = GenParams(
        n_mentions=args.mentions,
        n_chains=args.chains,
        chain_size_min=args.chain_size_min,
        chain_size_max=args.chain_size_max,
        chain_size_shape=args.chain_size_shape,
        n_docs=args.docs,
        feature_dim=args.feature_dim,
        feature_noise=args.feature_noise,
        lemma_pool_size=args.lemma_pool,
        p_same_lemma=args.p_same_lemma,
        p_confound=args.p_confound,
        seed=args.seed,
    )
    corpus = out / "corpus.jsonl"
    feats = out / "features.tsv"
    mentions, _ = write_corpus_files(params, corpus, feats)
    chains = len({m.chain_id for m in mentions})
    return _finish(
        args,
        out,
        [
            f"wrote {corpus} ({len(mentions)} mentions, {chains} chains)",
            f"wrote {feats} ({params.feature_dim} dims)",
        ],
    )


def cmd_split(args) -> int:
    out = _out_dir(args)
    graph = _load_graph(args.corpus)
    split = split_edges(graph, args.val_frac, args.test_frac, args.seed)
    path = out / "split.tsv"
    gio.write_split(path, split)
    return _finish(
        args,
        out,
        [
            f"wrote {path} (train {len(split.train_pos)}, val {len(split.val_pos)},"
            f" test {len(split.test_pos)} positives; negatives match val/test)"
        ],
    )


def cmd_train(args) -> int:
    out = _out_dir(args)
    graph = _load_graph(args.corpus)
    features = _features_for(args, graph)
    split = gio.read_split(args.split)
    model = train(graph, split, features, _model_config(args))

    model_path = out / "model.json"
    model.save(model_path)
    hist_path = out / "history.tsv"
    with hist_path.open("w", encoding="utf-8") as fh:
        fh.write("epoch\tloss\trecon\tkl\tval_ap\tval_auc\n")
        for h in model.history:
            fh.write(
                f"{h.epoch}\t{h.loss!r}\t{h.recon!r}\t{h.kl!r}\t{h.val_ap!r}\t{h.val_auc!r}\n"
            )
    last = model.history[-1]
    return _finish(
        args,
        out,
        [
            f"wrote {model_path}",
            f"wrote {hist_path}",
            f"final epoch {last.epoch}: loss {last.loss!r}, val_ap {last.val_ap!r},"
            f" val_auc {last.val_auc!r}",
        ],
    )


def cmd_eval(args) -> int:
    out = _out_dir(args)
    graph = _load_graph(args.corpus)
    split = gio.read_split(args.split)
    model = TrainedModel.load(args.model_file)
    if model.n_nodes != graph.n:
        raise DataError(
            f"model was trained on {model.n_nodes} mentions but corpus has {graph.n}"
        )
    if args.threshold is not None and args.tune_threshold:
        raise UsageError("--threshold and --tune-threshold are mutually exclusive")
    ev = evaluate_split(
        model,
        graph,
        split,
        threshold=args.threshold,
        tune_on_val=args.tune_threshold,
        include_val=not args.exclude_val,
    )
    s = ev.scores
    doc = {
        "muc": {"p": s["muc_p"], "r": s["muc_r"], "f1": s["muc_f1"]},
        "b3": {"p": s["b3_p"], "r": s["b3_r"], "f1": s["b3_f1"]},
        "ceaf_e": {"p": s["ceaf_e_p"], "r": s["ceaf_e_r"], "f1": s["ceaf_e_f1"]},
        "conll_f1": s["conll_f1"],
        "ap": s["ap"],
        "auc": s["auc"],
        "threshold": s["threshold"],
    }
    scores_path = out / "scores.json"
    gio.write_json(scores_path, doc)
    chains_path = out / "chains.jsonl"
    gio.write_chains(chains_path, ev.chains)
    return _finish(
        args,
        out,
        [
            f"wrote {scores_path}",
            f"wrote {chains_path} ({len(ev.chains)} chains)",
            f"conll_f1 {s['conll_f1']!r}, ap {s['ap']!r}, auc {s['auc']!r}",
        ],
    )


def cmd_ablate(args) -> int:
    out = _out_dir(args)
    graph = _load_graph(args.corpus)
    split = gio.read_split(args.split)
    fractions = _parse_list(args.fractions, float, "fraction")
    seeds = _parse_list(args.seeds, int, "seed")

    variants = {"nofeat": identity_features(graph)}
    if args.features:
        variants["feat"] = gio.load_features(args.features, graph)

    result = run_ablation(
        graph,
        variants,
        split,
        fractions,
        seeds,
        _model_config(args),
        threads=args.threads,
        include_val=not args.exclude_val,
    )
    cells_path = out / "ablation_cells.tsv"
    cells_path.write_text(result.long_tsv(), encoding="utf-8")
    wide_path = out / "ablation_conll.tsv"
    wide_path.write_text(result.wide_tsv(), encoding="utf-8")
    plot_path = out / "ablation.svg"
    save_ablation_plot(result, plot_path)

    lines = [f"wrote {cells_path}", f"wrote {wide_path}", f"wrote {plot_path}"]
    for variant in result.variants:
        lo = result.mean_conll(variant, result.fractions[0])
        hi = result.mean_conll(variant, result.fractions[-1])
        lines.append(
            f"{variant}: conll {lo!r} at {result.fractions[0]!r}"
            f" -> {hi!r} at {result.fractions[-1]!r}"
        )
    failed = [c for c in result.cells if c.error]
    if failed:
        lines.append(f"{len(failed)} cells failed (see {cells_path})")
    return _finish(args, out, lines)


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    graph = _load_graph(args.corpus)
    split = gio.read_split(args.split)
    model = TrainedModel.load(args.model_file)
    if model.n_nodes != graph.n:
        raise DataError(
            f"model was trained on {model.n_nodes} mentions but corpus has {graph.n}"
        )

    spans = graph.spans()
    surface = surface_hash_features([spans[i] for i in range(graph.n)], args.hash_dim)
    threshold, val_f1 = tune_cosine_threshold(surface, split.val_pos, split.val_neg)

    test_pairs = list(split.test_pos) + list(split.test_neg)
    baseline_preds = [
        (pair, positive)
        for pair, positive, _ in cosine_pairwise_baseline(surface, test_pairs, threshold)
    ]
    probs = model.predict_pairs(test_pairs)
    if args.tune_threshold:
        tau, _ = tune_link_threshold(model, split)
    else:
        tau = model.config.threshold
    model_preds = [(pair, bool(p >= tau)) for pair, p in zip(test_pairs, probs)]

    report = tp_levenshtein_report(
        {model.config.kind: model_preds, "cosine_baseline": baseline_preds},
        split.test_pos,
        spans,
    )
    report_path = out / "tp_report.tsv"
    report_path.write_text(report.table(), encoding="utf-8")

    lines = [
        f"tuned cosine threshold {threshold!r} (val link f1 {val_f1!r})",
        f"wrote {report_path}",
    ]
    for name, stats in report.per_model.items():
        mean = "absent" if stats.mean_levenshtein is None else repr(stats.mean_levenshtein)
        lines.append(f"{name}: {stats.tp_count} true positives, mean levenshtein {mean}")
    return _finish(args, out, lines)


# ---------------------------------------------------------------------------
# Parser assembly


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value settings file; flags override it")
    sub.add_argument("--out", help="run directory (default $GRAPHCOREF_OUT_ROOT/<cmd> or runs/<cmd>)")


def _add_model_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", choices=["gae", "vgae"], default="gae", help="encoder kind")
    sub.add_argument("--hidden", type=int, default=64, help="hidden layer width")
    sub.add_argument("--latent", type=int, default=32, help="latent dimension")
    sub.add_argument("--epochs", type=int, default=200, help="training epochs")
    sub.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    sub.add_argument("--dropout", type=float, default=0.0, help="hidden dropout rate")
    sub.add_argument(
        "--threshold", type=float, default=0.5, help="link probability decision threshold"
    )
    sub.add_argument(
        "--adjacency",
        choices=["dense", "sparse"],
        default="dense",
        help="adjacency storage",
    )
    sub.add_argument("--seed", type=int, default=0, help="random seed")


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(
        prog="graphcoref",
        description="Event coreference as graph reconstruction: data, training, scoring.",
    )
    subs = parser.add_subparsers(
        dest="command", required=True, metavar="command", parser_class=_Parser
    )
    by_name: dict[str, argparse.ArgumentParser] = {}

    gen = subs.add_parser(
        "generate", help="write a synthetic corpus and feature table"
    )
    _add_common(gen)
    gen.add_argument("--mentions", type=int, default=500, help="total mentions")
    gen.add_argument("--chains", type=int, default=60, help="number of chains")
    gen.add_argument("--chain-size-min", type=int, default=2)
    gen.add_argument("--chain-size-max", type=int, default=30)
    gen.add_argument(
        "--chain-size-shape", type=float, default=0.18, help="geometric success probability"
    )
    gen.add_argument("--docs", type=int, default=40, help="number of documents")
    gen.add_argument("--feature-dim", type=int, default=64)
    gen.add_argument("--feature-noise", type=float, default=0.5)
    gen.add_argument("--lemma-pool", type=int, default=75, help="surface lemma pool size")
    gen.add_argument(
        "--p-same-lemma", type=float, default=0.85, help="mention keeps its chain lemma"
    )
    gen.add_argument(
        "--p-confound", type=float, default=0.2, help="chain adopts another chain's lemma"
    )
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=cmd_generate)
    by_name["generate"] = gen

    spl = subs.add_parser("split", help="mask edges into train/val/test")
    _add_common(spl)
    spl.add_argument("--corpus", help="corpus JSONL path (required)")
    spl.add_argument("--val-frac", type=float, default=0.05)
    spl.add_argument("--test-frac", type=float, default=0.10)
    spl.add_argument("--seed", type=int, default=0)
    spl.set_defaults(func=cmd_split)
    by_name["split"] = spl

    trn = subs.add_parser("train", help="train a graph autoencoder")
    _add_common(trn)
    trn.add_argument("--corpus", help="corpus JSONL path (required)")
    trn.add_argument("--features", help="feature TSV; omit for featureless (identity) input")
    trn.add_argument("--split", help="split TSV path (required)")
    _add_model_flags(trn)
    trn.set_defaults(func=cmd_train)
    by_name["train"] = trn

    ev = subs.add_parser("eval", help="score a trained model on held-out pairs")
    _add_common(ev)
    ev.add_argument("--corpus", help="corpus JSONL path (required)")
    ev.add_argument("--split", help="split TSV path (required)")
    ev.add_argument("--model-file", help="model JSON from train (required)")
    ev.add_argument(
        "--threshold", type=float, default=None, help="override the model's decision threshold"
    )
    ev.add_argument(
        "--tune-threshold",
        action="store_true",
        help="pick the decision threshold by best link F1 on validation pairs",
    )
    ev.add_argument(
        "--exclude-val",
        action="store_true",
        help="do not treat val edges as observed when rebuilding chains",
    )
    ev.set_defaults(func=cmd_eval)
    by_name["eval"] = ev

    abl = subs.add_parser(
        "ablate", help="train/score a grid over training fractions"
    )
    _add_common(abl)
    abl.add_argument("--corpus", help="corpus JSONL path (required)")
    abl.add_argument("--features", help="feature TSV for the 'feat' variant (optional)")
    abl.add_argument("--split", help="split TSV path (required)")
    abl.add_argument(
        "--fractions",
        default="0.05,0.15,0.25,0.35,0.45,0.55,0.65,0.75",
        help="comma-separated training fractions",
    )
    abl.add_argument("--seeds", default="0", help="comma-separated seeds, one run per seed")
    abl.add_argument("--threads", type=int, default=1, help="parallel grid workers")
    abl.add_argument(
        "--exclude-val",
        action="store_true",
        help="do not treat val edges as observed when rebuilding chains",
    )
    _add_model_flags(abl)
    abl.set_defaults(func=cmd_ablate)
    by_name["ablate"] = abl

    ana = subs.add_parser(
        "analyze",
        help="true-positive edit-distance report: model vs cosine baseline",
    )
    _add_common(ana)
    ana.add_argument("--corpus", help="corpus JSONL path (required)")
    ana.add_argument("--split", help="split TSV path (required)")
    ana.add_argument("--model-file", help="model JSON from train (required)")
    ana.add_argument(
        "--hash-dim", type=int, default=256, help="surface trigram hash buckets"
    )
    ana.add_argument(
        "--tune-threshold",
        action="store_true",
        help="tune the model's decision threshold on validation pairs, like the baseline's",
    )
    ana.set_defaults(func=cmd_analyze)
    by_name["analyze"] = ana

    return parser, by_name


_REQUIRED = {
    "split": ("corpus",),
    "train": ("corpus", "split"),
    "eval": ("corpus", "split", "model_file"),
    "ablate": ("corpus", "split"),
    "analyze": ("corpus", "split", "model_file"),
}


def _read_config_file(path: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file not found: {path}")
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _coerce(sub: argparse.ArgumentParser, cfg: dict[str, str]) -> dict:
    """Convert raw config strings using each flag's declared type."""
    by_dest = {a.dest: a for a in sub._actions}
    out = {}
    for key, raw in cfg.items():
        if key not in by_dest or key in ("help", "config"):
            raise UsageError(f"unknown config key '{key}'")
        action = by_dest[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise UsageError(f"config key '{key}' expects true/false")
            out[key] = raw.lower() in ("true", "1")
        elif action.type is not None:
            try:
                out[key] = action.type(raw)
            except ValueError:
                raise UsageError(f"bad value for config key '{key}': '{raw}'") from None
        else:
            out[key] = raw
        if action.choices and out[key] not in action.choices:
            raise UsageError(
                f"config key '{key}' must be one of {sorted(action.choices)}"
            )
    return out


def _prescan_config(argv: list[str]) -> str | None:
    for idx, token in enumerate(argv):
        if token == "--config":
            if idx + 1 >= len(argv):
                raise UsageError("--config needs a value")
            return argv[idx + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, by_name = build_parser()

        # The config file (if any) supplies defaults, so explicit flags win.
        if argv and argv[0] in by_name:
            config_path = _prescan_config(argv[1:])
            if config_path:
                cfg = _coerce(by_name[argv[0]], _read_config_file(config_path))
                by_name[argv[0]].set_defaults(**cfg)

        args = parser.parse_args(argv)
        for dest in _REQUIRED.get(args.command, ()):
            if getattr(args, dest) is None:
                raise UsageError(f"--{dest.replace('_', '-')} is required")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
