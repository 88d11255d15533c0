"""Comparison-table reporting and the full prune/fine-tune/evaluate protocol.

A protocol run fine-tunes the unpruned baseline, every pruned variant, and
optionally scratch-initialized models of the pruned depths, on each
dataset, then emits one EvalReport row per run. Rows are written as JSONL
so tables can be regenerated without retraining; an experiment log records
(config hash, seed, metrics) per run. All outputs are deterministic in the
seeds, including embedded provenance timestamps.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import model as M
from .data import EncodedDataset
from .pruning import PruneSpec, prune_checkpoint
from .training import TrainConfig, evaluate, finetune
from . import checkpoint as C

BASELINE_LABEL = "—"  # em dash, the no-pruning marker
REPRODUCIBLE_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass
class EvalReport:
    """One comparison-table row."""

    model: str
    strategy: str  # e.g. "Top 6", "Middle 10", or BASELINE_LABEL
    dataset: str
    validation_accuracy: float  # percent
    testing_accuracy: float  # percent
    layer_count: int
    total_params: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**{k: d[k] for k in (
            "model", "strategy", "dataset", "validation_accuracy",
            "testing_accuracy", "layer_count", "total_params")})


@dataclass
class DatasetSplits:
    train: EncodedDataset
    validation: EncodedDataset
    test: EncodedDataset

    @property
    def num_classes(self) -> int:
        return max(len(self.train.label_names), int(self.train.labels.max()) + 1)


def _strategy_k(label: str) -> int | None:
    if label == BASELINE_LABEL:
        return None
    return int(label.split()[-1])


def comparison_report(rows: list[EvalReport], format: str = "markdown",
                      metric: str = "testing") -> str:
    """Render rows as the combined comparison table.

    One line per (model, strategy) in first-appearance order, one column
    per dataset; repeated (model, strategy, dataset) rows (multi-seed runs)
    are averaged. Accuracies show 2 decimals; the best value within each
    (model, same-k block) is flagged per dataset column, bold in markdown
    and a trailing '*' in TSV. Ties flag every holder.
    """
    if format not in ("tsv", "markdown"):
        raise ValueError(f"unknown format {format!r}; expected tsv or markdown")
    if metric not in ("testing", "validation"):
        raise ValueError(f"unknown metric {metric!r}")
    attr = f"{metric}_accuracy"

    datasets: list[str] = []
    lines: list[tuple[str, str]] = []  # (model, strategy) in order
    sums: dict[tuple, float] = {}
    counts: dict[tuple, int] = {}
    for r in rows:
        if r.dataset not in datasets:
            datasets.append(r.dataset)
        line = (r.model, r.strategy)
        if line not in lines:
            lines.append(line)
        key = (r.model, r.strategy, r.dataset)
        sums[key] = sums.get(key, 0.0) + getattr(r, attr)
        counts[key] = counts.get(key, 0) + 1
    means = {k: sums[k] / counts[k] for k in sums}

    def group_of(line):
        return (line[0], _strategy_k(line[1]))

    best: dict[tuple, float] = {}
    for line in lines:
        for ds in datasets:
            key = (line[0], line[1], ds)
            if key not in means:
                continue
            gkey = (group_of(line), ds)
            if gkey not in best or means[key] > best[gkey]:
                best[gkey] = means[key]

    header = ["Model", "Pruning Strategy"] + datasets
    table: list[list[str]] = []
    for line in lines:
        cells = [line[0], line[1]]
        for ds in datasets:
            key = (line[0], line[1], ds)
            if key not in means:
                cells.append("")
                continue
            value = means[key]
            text = f"{value:.2f}"
            if value == best[(group_of(line), ds)]:
                text = f"**{text}**" if format == "markdown" else text + "*"
            cells.append(text)
        table.append(cells)

    if format == "tsv":
        out = ["\t".join(header)]
        out.extend("\t".join(cells) for cells in table)
        return "\n".join(out) + "\n"
    out = ["| " + " | ".join(header) + " |",
           "| " + " | ".join("---" for _ in header) + " |"]
    out.extend("| " + " | ".join(cells) + " |" for cells in table)
    return "\n".join(out) + "\n"


def config_hash(model_config: M.ModelConfig, tconfig: TrainConfig,
                 dataset: str) -> str:
    blob = json.dumps(
        {"dataset": dataset, "model_config": model_config.to_dict(),
         "train_config": tconfig.to_dict()},
        sort_keys=True, separators=(",", ":"),
    ).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _slug(text: str) -> str:
    return "".join(c for c in text.lower() if c.isalnum() or c == "-") or "baseline"


def run_protocol(
    weights: M.ModelWeights,
    config: M.ModelConfig,
    specs: list[PruneSpec],
    datasets: dict[str, DatasetSplits],
    tconfig: TrainConfig,
    scratch_depths: tuple[int, ...] = (),
    seeds: tuple[int, ...] | None = None,
    out_dir: str | Path | None = None,
    source: str = "base",
    timestamp: str = REPRODUCIBLE_TIMESTAMP,
) -> list[EvalReport]:
    """Fine-tune and evaluate {baseline} + {each spec} (+ scratch depths)
    on every dataset; one EvalReport per run per seed.

    When ``out_dir`` is given, writes reports.jsonl, experiments.jsonl,
    report.tsv, report.md, and the fine-tuned checkpoints. Fixed seeds
    give byte-identical outputs across runs.
    """
    seeds = tuple(seeds) if seeds else (tconfig.seed,)
    rows: list[EvalReport] = []
    row_seeds: list[int] = []
    log_entries: list[dict] = []
    ckpt_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        ckpt_dir = out_dir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    for seed in seeds:
        tc = replace(tconfig, seed=seed)
        for ds_name, splits in datasets.items():
            task_config = replace(config, num_classes=splits.num_classes)

            jobs: list[tuple[str, str, M.ModelWeights, M.ModelConfig, list]] = [
                (source, BASELINE_LABEL, weights, task_config, [])
            ]
            for spec in specs:
                pruned, pruned_config, record = prune_checkpoint(
                    weights, config, spec, source=source, timestamp=timestamp
                )
                jobs.append((
                    source, spec.label, pruned,
                    replace(pruned_config, num_classes=splits.num_classes),
                    [record],
                ))
            for depth in scratch_depths:
                scratch_config = replace(task_config, num_layers=depth)
                scratch_seed = int(
                    np.random.SeedSequence([seed, depth]).generate_state(1)[0]
                )
                jobs.append((
                    f"scratch-{depth}L", BASELINE_LABEL,
                    M.init_scratch(scratch_config, scratch_seed), scratch_config,
                    [],
                ))

            for model_name, strategy, job_weights, job_config, records in jobs:
                best, history = finetune(
                    job_weights, job_config, splits.train, splits.validation, tc
                )
                test_acc = evaluate(best, job_config, splits.test)
                row = EvalReport(
                    model=model_name,
                    strategy=strategy,
                    dataset=ds_name,
                    validation_accuracy=100.0 * history.best_validation_accuracy,
                    testing_accuracy=100.0 * test_acc,
                    layer_count=job_config.num_layers,
                    total_params=M.param_count(job_config)["total"],
                )
                rows.append(row)
                row_seeds.append(seed)
                log_entries.append({
                    "config_hash": config_hash(job_config, tc, ds_name),
                    "seed": seed,
                    "metrics": {
                        "validation_accuracy": row.validation_accuracy,
                        "testing_accuracy": row.testing_accuracy,
                        "best_epoch": history.best_epoch,
                    },
                    "model": model_name,
                    "strategy": strategy,
                    "dataset": ds_name,
                })
                if ckpt_dir is not None:
                    name = f"{_slug(ds_name)}.{_slug(model_name)}." \
                           f"{_slug(strategy)}.seed{seed}.ckpt"
                    C.save(best, job_config, records, ckpt_dir / name)

    if out_dir is not None:
        with open(out_dir / "reports.jsonl", "w", encoding="utf-8") as f:
            for row, seed in zip(rows, row_seeds):
                f.write(json.dumps({**row.to_dict(), "seed": seed},
                                   sort_keys=True) + "\n")
        with open(out_dir / "experiments.jsonl", "a", encoding="utf-8") as f:
            for entry in log_entries:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
        (out_dir / "report.tsv").write_text(
            comparison_report(rows, "tsv"), encoding="utf-8")
        (out_dir / "report.md").write_text(
            comparison_report(rows, "markdown"), encoding="utf-8")
    return rows


def read_report_rows(runs_dir: str | Path) -> list[EvalReport]:
    """Collect EvalReport rows from reports.jsonl files under ``runs_dir``."""
    runs_dir = Path(runs_dir)
    paths = sorted(runs_dir.rglob("reports.jsonl")) if runs_dir.is_dir() else [runs_dir]
    rows: list[EvalReport] = []
    for path in paths:
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    rows.append(EvalReport.from_dict(json.loads(line)))
    return rows
