"""Command-line surface: prune, finetune, evaluate, report, inspect,
gradcheck, protocol.

Exit codes: 0 success, 1 usage error, 2 data/file error, 3 numeric
failure. Every subcommand logs its fully resolved configuration to stderr
and is deterministic given identical flags and input files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import checkpoint as C
from . import model as M
from .data import MAX_LEN_PRESETS, Vocab, encode_dataset, load_dataset
from .errors import DataError, InvalidPruneSpec, NumericError
from .protocol import (
    DatasetSplits,
    config_hash,
    comparison_report,
    read_report_rows,
    run_protocol,
)
from .pruning import PruneSpec, provenance_timestamp, prune_checkpoint, size_report
from .training import TrainConfig, evaluate, finetune

log = logging.getLogger("prunecoder")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports bad flags as exit-code-1 usage errors."""

    def error(self, message):
        raise _UsageError(message)


def _log_resolved(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    log.info("resolved configuration: %s", json.dumps(resolved, default=str))


def _load_tconfig(path: str | None, **overrides) -> TrainConfig:
    params = {}
    if path:
        params.update(json.loads(Path(path).read_text(encoding="utf-8")))
    params.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig(**params)
    except (TypeError, ValueError) as exc:
        raise _UsageError(f"bad train config: {exc}") from exc


def _load_encoded(path, fmt, text_field, label_field, vocab, max_len, split):
    ds = load_dataset(path, fmt, text_field, label_field, split)
    return encode_dataset(ds, vocab, max_len), ds


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")
    p.add_argument("--text-field", default="text")
    p.add_argument("--label-field", default="label")
    p.add_argument("--vocab", required=True, help="vocab file, one token per line")
    p.add_argument("--max-len", type=int, default=MAX_LEN_PRESETS["shc"])


def _cmd_prune(args) -> int:
    weights, config, records = C.load(args.input)
    spec = PruneSpec(args.strategy, args.k)
    pruned, new_config, record = prune_checkpoint(
        weights, config, spec, source=Path(args.input).name,
        timestamp=provenance_timestamp(),
    )
    C.save(pruned, new_config, records + [record], args.out)
    report = size_report(config, new_config)
    print(f"pruned {config.num_layers} -> {new_config.num_layers} layers "
          f"({record.spec.label}); retained original layers "
          f"{list(record.retained)}")
    print(f"encoder parameter reduction: "
          f"{report['encoder_param_reduction_pct']:.2f}%")
    print(f"total parameter reduction: {report['total_param_reduction_pct']:.2f}%")
    return EXIT_OK


def _cmd_finetune(args) -> int:
    weights, config, records = C.load(args.input)
    vocab = Vocab.from_file(args.vocab)
    train_enc, train_ds = _load_encoded(
        args.train, args.format, args.text_field, args.label_field,
        vocab, args.max_len, "train")
    val_enc, _ = _load_encoded(
        args.val, args.format, args.text_field, args.label_field,
        vocab, args.max_len, "validation")
    tconfig = _load_tconfig(args.config, seed=args.seed)
    task_config = replace(config, num_classes=len(train_ds.label_names))
    best, history = finetune(weights, task_config, train_enc, val_enc, tconfig)
    C.save(best, task_config, records, args.out)
    if args.history:
        path = Path(args.history)
        if path.suffix in (".tsv", ".md"):
            path.write_text(
                history.render("tsv" if path.suffix == ".tsv" else "markdown"),
                encoding="utf-8")
        else:
            path.write_text(json.dumps(history.to_dict(), indent=2) + "\n",
                            encoding="utf-8")
    if args.log:
        entry = {
            "config_hash": config_hash(task_config, tconfig,
                                        Path(args.train).name),
            "seed": tconfig.seed,
            "metrics": {
                "best_epoch": history.best_epoch,
                "validation_accuracy": 100.0 * history.best_validation_accuracy,
            },
        }
        with open(args.log, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
    for rec in history.epochs:
        print(f"epoch {rec.epoch}: train loss {rec.train_loss:.4f}, "
              f"validation accuracy {rec.validation_accuracy:.4f}")
    print(f"best epoch {history.best_epoch} "
          f"(validation accuracy {history.best_validation_accuracy:.4f})")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    weights, config, _ = C.load(args.input)
    vocab = Vocab.from_file(args.vocab)
    encoded, _ = _load_encoded(
        args.data, args.format, args.text_field, args.label_field,
        vocab, args.max_len, "test")
    if config.num_classes is None:
        raise DataError("checkpoint is headless; fine-tune before evaluating")
    acc = evaluate(weights, config, encoded, batch_size=args.batch_size)
    print(f"accuracy: {acc:.4f} ({acc * 100.0:.2f}%)")
    return EXIT_OK


def _cmd_report(args) -> int:
    rows = read_report_rows(args.runs)
    if not rows:
        raise DataError(f"no report rows found under {args.runs}")
    print(comparison_report(rows, args.format, args.metric), end="")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    weights, config, records = C.load(args.input)
    counts = M.param_count(config)
    print("model config:")
    for key, value in config.to_dict().items():
        print(f"  {key}: {value}")
    print(f"layers: {config.num_layers}")
    print("parameter breakdown:")
    for key in ("embeddings", "per_layer", "encoder_total", "pooler",
                "classifier", "total"):
        print(f"  {key}: {counts[key]}")
    if records:
        print("prune provenance:")
        for rec in records:
            print(f"  {rec.spec.label} of {rec.source} at {rec.timestamp}: "
                  f"retained original layers {list(rec.retained)}")
    else:
        print("prune provenance: none (unpruned)")
    violations = C.validate(weights, config)
    if violations:
        print("validation violations:")
        for v in violations:
            print(f"  {v}")
        return EXIT_DATA
    print("validation: ok")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    if args.config:
        config = M.ModelConfig.from_dict(
            json.loads(Path(args.config).read_text(encoding="utf-8")))
    else:
        config = M.ModelConfig(
            num_layers=2, hidden_size=8, num_heads=2, intermediate_size=16,
            vocab_size=32, max_positions=16, num_classes=4)
    worst = 0.0
    for seed in range(args.seeds):
        err = M.gradient_check(config, seed=seed, h=args.h)
        print(f"seed {seed}: max relative error {err:.3e}")
        worst = max(worst, err)
    print(f"worst over {args.seeds} seed(s): {worst:.3e} "
          f"(tolerance {args.tolerance:.0e})")
    if worst >= args.tolerance:
        raise NumericError(
            f"gradient check failed: {worst:.3e} >= {args.tolerance:.0e}")
    return EXIT_OK


def _parse_specs(text: str) -> list[PruneSpec]:
    specs = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            strategy, k = part.split(":")
            specs.append(PruneSpec(strategy.strip(), int(k)))
        except ValueError as exc:
            if isinstance(exc, InvalidPruneSpec):
                raise
            raise _UsageError(
                f"bad spec {part!r}; expected strategy:k, e.g. top:6") from exc
    if not specs:
        raise _UsageError("no prune specs given")
    return specs


def _cmd_protocol(args) -> int:
    weights, config, _ = C.load(args.input)
    vocab = Vocab.from_file(args.vocab)
    specs = _parse_specs(args.specs)
    entries = [e for chunk in args.datasets for e in chunk.split(",") if e]
    datasets: dict[str, DatasetSplits] = {}
    for item in entries:
        if "=" not in item:
            raise _UsageError(f"bad --datasets entry {item!r}; expected "
                              "NAME=DIR with train/validation/test files")
        name, root = item.split("=", 1)
        root = Path(root)
        splits = {}
        for split in ("train", "validation", "test"):
            path = root / f"{split}.{args.format}"
            if not path.exists():
                raise DataError(f"dataset {name!r}: missing {path}")
            enc, _ = _load_encoded(path, args.format, args.text_field,
                                   args.label_field, vocab, args.max_len, split)
            splits[split] = enc
        datasets[name] = DatasetSplits(**splits)
    tconfig = _load_tconfig(args.config, seed=args.seed)
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else None
    scratch = (tuple(int(d) for d in args.scratch_depths.split(","))
               if args.scratch_depths else ())
    rows = run_protocol(
        weights, config, specs, datasets, tconfig,
        scratch_depths=scratch, seeds=seeds, out_dir=args.out,
        source=Path(args.input).stem,
    )
    print(comparison_report(rows, "markdown"), end="")
    print(f"\nwrote {len(rows)} report rows to {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="prunecoder", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("prune", help="remove encoder layers from a checkpoint")
    p.add_argument("--in", dest="input", required=True, help="input checkpoint")
    p.add_argument("--strategy", choices=("top", "middle", "bottom"), required=True)
    p.add_argument("--k", type=int, required=True, help="layers to remove")
    p.add_argument("--out", required=True, help="output checkpoint")
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint on a labeled corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--config", help="TrainConfig overrides as a JSON file")
    p.add_argument("--seed", type=int, default=None,
                   help="training seed (default 42)")
    p.add_argument("--out", required=True)
    p.add_argument("--history",
                   help="write per-epoch history here (.tsv/.md/anything-else=JSON)")
    p.add_argument("--log", help="append a JSONL experiment-log entry here")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("evaluate", help="accuracy of a checkpoint on a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch-size", type=int, default=64)
    _add_data_flags(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="render comparison tables from report rows")
    p.add_argument("--runs", required=True, help="directory of reports.jsonl files")
    p.add_argument("--format", choices=("tsv", "markdown"), default="markdown")
    p.add_argument("--metric", choices=("testing", "validation"), default="testing")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("inspect", help="print config, sizes, and provenance")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("gradcheck", help="finite-difference check of the model gradients")
    p.add_argument("--config", help="ModelConfig JSON file (default: tiny 2-layer)")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--h", type=float, default=3e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("protocol", help="baseline + pruned (+ scratch) comparison run")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--datasets", action="append", required=True,
                   metavar="NAME=DIR[,NAME=DIR...]",
                   help="dataset dirs with train/validation/test files; "
                        "repeatable or comma-separated")
    p.add_argument("--specs", required=True,
                   help="comma list of strategy:k, e.g. top:6,middle:6")
    p.add_argument("--scratch-depths", help="comma list of scratch baseline depths")
    p.add_argument("--seeds", help="comma list of seeds (default: --seed)")
    p.add_argument("--config", help="TrainConfig overrides as a JSON file")
    p.add_argument("--seed", type=int, default=None,
                   help="training seed (default 42)")
    p.add_argument("--out", required=True, help="output directory")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_protocol)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_help()
        return EXIT_USAGE
    _log_resolved(args)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidPruneSpec as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
