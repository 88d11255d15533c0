"""Render comparison tables from stored rows, no training required.

Rows usually come from a protocol run's reports.jsonl; here a handful are
built by hand to show grouping, per-block best flagging, and the
tie/multi-seed rules.
"""

from prunecoder import EvalReport, comparison_report

rows = [
    EvalReport("mono-12L", "Top 6", "shc", 91.92, 92.18, 6, 66_000_000),
    EvalReport("mono-12L", "Middle 6", "shc", 90.95, 90.33, 6, 66_000_000),
    EvalReport("mono-12L", "Bottom 6", "shc", 91.05, 90.47, 6, 66_000_000),
    EvalReport("mono-12L", "Top 10", "shc", 88.81, 89.20, 2, 38_000_000),
    EvalReport("mono-12L", "Middle 10", "shc", 88.92, 89.13, 2, 38_000_000),
    EvalReport("mono-12L", "Bottom 10", "shc", 89.64, 89.35, 2, 38_000_000),
    EvalReport("multi-12L", "Top 6", "shc", 88.51, 89.08, 6, 160_000_000),
    EvalReport("multi-12L", "Middle 6", "shc", 90.00, 90.69, 6, 160_000_000),
    EvalReport("multi-12L", "Bottom 6", "shc", 88.30, 87.62, 6, 160_000_000),
    EvalReport("mono-12L", "\u2014", "shc", 91.00, 91.41, 12, 108_000_000),
]

print("markdown, testing accuracy (best per model/k block in bold):")
print(comparison_report(rows, "markdown"))

print("same rows as TSV (best flagged with *):")
print(comparison_report(rows, "tsv"))

print("validation metric instead:")
print(comparison_report(rows, "markdown", metric="validation"))

print("multi-seed rows for one cell are averaged:")
seeds = [EvalReport("m", "Top 6", "d", 90.0, 88.0, 6, 1000),
         EvalReport("m", "Top 6", "d", 92.0, 91.0, 6, 1000)]
print(comparison_report(seeds, "tsv"))
