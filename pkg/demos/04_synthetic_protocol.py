"""A scaled-down comparison run on the bundled synthetic marker task.

Pretrains a small 6-layer model by proxy (supervised on the task), then
prunes it three ways, fine-tunes every variant plus a scratch baseline,
and renders the comparison table. Runs in about a minute on a laptop CPU;
scale the sizes up for a sharper picture.
"""

import time

from prunecoder import (
    ModelConfig, PruneSpec, TrainConfig, comparison_report, finetune,
    init_scratch, run_protocol,
)
from prunecoder.data import encode_dataset
from prunecoder.protocol import DatasetSplits
from prunecoder import synthetic

t0 = time.time()
config = ModelConfig(num_layers=6, hidden_size=32, num_heads=4,
                     intermediate_size=64, vocab_size=32, max_positions=32,
                     num_classes=4)
vocab = synthetic.build_vocab()

print("pretraining by proxy on 16k synthetic examples...")
pre = {k: encode_dataset(v, vocab, 16)
       for k, v in synthetic.make_task(16_000, 500, 500, seed=100).items()}
pretrained, history = finetune(
    init_scratch(config, 1), config, pre["train"], pre["validation"],
    TrainConfig(epochs=2, batch_size=64, seed=0, learning_rate=3e-4))
print(f"  validation accuracy {history.best_validation_accuracy:.3f} "
      f"({time.time()-t0:.0f}s)")

ft = {k: encode_dataset(v, vocab, 16)
      for k, v in synthetic.make_task(1_000, 300, 500, seed=200).items()}
splits = DatasetSplits(ft["train"], ft["validation"], ft["test"])

specs = [PruneSpec("top", 3), PruneSpec("middle", 3), PruneSpec("bottom", 3)]
rows = run_protocol(
    pretrained, config, specs, {"marker": splits},
    TrainConfig(epochs=4, batch_size=32, seed=0, learning_rate=3e-4),
    scratch_depths=(3,), source="tiny-6L")

print()
print(comparison_report(rows, "markdown"))
print(f"total {time.time()-t0:.0f}s")
