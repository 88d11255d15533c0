"""Layer-pruning toolkit for BERT-style encoders.

Prune pretrained checkpoints from the top, middle, or bottom of the layer
stack, fine-tune the result deterministically on classification tasks,
and emit comparison tables against unpruned and scratch-trained baselines.
"""

import os as _os

# Cap BLAS parallelism before numpy loads so default runs are sequential
# and bitwise reproducible. Best effort: has no effect if numpy was
# imported earlier in the process. Override with PRUNECODER_THREADS.
_threads = _os.environ.get("PRUNECODER_THREADS", "1")
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    _os.environ.setdefault(_var, _threads)

from .errors import DataError, InvalidPruneSpec, NumericError
from .tensor_ops import DualResult, grad_check
from .model import (
    EncoderLayerWeights,
    ModelConfig,
    ModelWeights,
    backward,
    base_config,
    flatten_weights,
    forward,
    forward_pooled,
    gradient_check,
    init_scratch,
    param_count,
    small_config,
    smaller_config,
    tensor_names,
    unflatten_weights,
)
from .pruning import (
    PruneRecord,
    PruneSpec,
    prune_checkpoint,
    retained_indices,
    size_report,
)
from .data import (
    Batch,
    EncodedDataset,
    LabeledDataset,
    Vocab,
    batches,
    encode_dataset,
    encode_example,
    load_dataset,
    wordpiece_tokenize,
)
from .training import TrainConfig, TrainHistory, evaluate, finetune, optimizer_step
from .protocol import (
    BASELINE_LABEL,
    DatasetSplits,
    EvalReport,
    comparison_report,
    run_protocol,
)
from .checkpoint import CheckpointError, load, save, validate
from . import synthetic

__version__ = "0.1.0"
