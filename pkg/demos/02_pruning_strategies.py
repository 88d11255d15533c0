"""Which layers survive each pruning strategy, and what it saves.

Layer 0 touches the embeddings, layer 11 feeds the pooler. Top pruning
drops the output end, bottom drops the input end, middle cuts a
contiguous central block (extra retained layer stays on the input side).
"""

from dataclasses import replace

from prunecoder import PruneSpec, base_config, param_count, retained_indices, size_report

L = 12
print(f"retained original layer indices for a {L}-layer model:")
for k in (6, 10):
    for strategy in ("top", "middle", "bottom"):
        kept = retained_indices(L, PruneSpec(strategy, k))
        print(f"  {strategy:>6} k={k:>2}  ->  {kept}")

print()
config = base_config(num_classes=4)
counts = param_count(config)
print(f"BERT-base geometry: {counts['total']:,} params "
      f"({counts['per_layer']:,} per encoder layer)")

for k in (6, 10):
    after = replace(config, num_layers=L - k)
    report = size_report(config, after)
    print(f"  remove {k:>2} layers: encoder -{report['encoder_param_reduction_pct']:.2f}%  "
          f"total -{report['total_param_reduction_pct']:.2f}%")

print()
print("same-depth strategies cost the same parameters:")
for strategy in ("top", "middle", "bottom"):
    after = replace(config, num_layers=6)
    print(f"  {strategy:>6} 6 -> {param_count(after)['total']:,} params")
