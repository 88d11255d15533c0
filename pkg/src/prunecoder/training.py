"""Deterministic fine-tuning and accuracy evaluation.

The optimizer is Adam with decoupled weight decay (decay skipped for bias
and layer-norm tensors), global gradient-norm clipping, and a linear
warmup-then-decay learning-rate schedule. Given the same weights, data,
and TrainConfig, :func:`finetune` is bitwise reproducible.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import model as M
from .data import EncodedDataset, batches
from .errors import NumericError


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, schedule, and loop settings for one fine-tuning run."""

    epochs: int = 3
    batch_size: int = 32
    seed: int = 42
    learning_rate: float = 3e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_fraction: float = 0.1
    max_grad_norm: float = 1.0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        for name in ("learning_rate", "beta1", "beta2", "eps", "max_grad_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    validation_accuracy: float


@dataclass
class TrainHistory:
    """Per-epoch loss/accuracy trace plus the best-epoch bookmark."""

    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_validation_accuracy: float = 0.0

    def to_dict(self) -> dict:
        return {
            "epochs": [asdict(e) for e in self.epochs],
            "best_epoch": self.best_epoch,
            "best_validation_accuracy": self.best_validation_accuracy,
        }

    def render(self, format: str = "tsv") -> str:
        """History table as TSV or markdown."""
        header = ["epoch", "train_loss", "validation_accuracy"]
        rows = [[str(e.epoch), f"{e.train_loss:.6f}",
                 f"{e.validation_accuracy:.4f}"] for e in self.epochs]
        if format == "tsv":
            lines = ["\t".join(header)] + ["\t".join(r) for r in rows]
            return "\n".join(lines) + "\n"
        if format == "markdown":
            lines = ["| " + " | ".join(header) + " |",
                     "| " + " | ".join("---" for _ in header) + " |"]
            lines += ["| " + " | ".join(r) + " |" for r in rows]
            return "\n".join(lines) + "\n"
        raise ValueError(f"unknown format {format!r}; expected tsv or markdown")


def lr_schedule(step: int, total_steps: int, peak: float, warmup_fraction: float) -> float:
    """Linear warmup to ``peak`` then linear decay to 0 at the final step.

    Steps are 1-indexed; the peak lands on the last warmup step.
    """
    if step < 1 or step > total_steps:
        raise ValueError(f"step {step} outside [1, {total_steps}]")
    warmup = int(warmup_fraction * total_steps)
    if step <= warmup:
        return peak * step / warmup
    if total_steps == warmup:
        return peak
    return peak * (total_steps - step) / (total_steps - warmup)


def weight_decay_applies(name: str) -> bool:
    """Decay skips biases and layer-norm parameters."""
    return not (name.endswith(".bias") or ".norm." in name)


def init_optimizer_state(params: dict[str, np.ndarray]) -> dict[str, dict]:
    return {
        name: {"m": np.zeros_like(p), "v": np.zeros_like(p)}
        for name, p in params.items()
    }


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict[str, dict],
    config: TrainConfig,
    step_index: int,
    total_steps: int | None = None,
    lr: float | None = None,
) -> tuple[dict[str, np.ndarray], dict[str, dict]]:
    """One decoupled-weight-decay Adam step; updates params/state in place.

    Gradients are treated read-only: global-norm clipping folds its scale
    into the moment updates. ``lr`` overrides the schedule; otherwise
    ``total_steps`` must be given so the warmup/decay schedule applies.
    """
    if step_index < 1:
        raise ValueError("step_index is 1-based")
    if lr is None:
        if total_steps is None:
            raise ValueError("need total_steps for the schedule, or an explicit lr")
        lr = lr_schedule(step_index, total_steps, config.learning_rate,
                         config.warmup_fraction)
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name}")
    norm = global_grad_norm(grads)
    scale = 1.0 if norm <= config.max_grad_norm else config.max_grad_norm / norm

    bc1 = 1.0 - config.beta1 ** step_index
    bc2 = 1.0 - config.beta2 ** step_index
    for name, p in params.items():
        g = grads[name]
        dt = p.dtype.type
        if scale != 1.0:
            g = g * dt(scale)
        st = state[name]
        st["m"] *= dt(config.beta1)
        st["m"] += dt(1.0 - config.beta1) * g
        st["v"] *= dt(config.beta2)
        st["v"] += dt(1.0 - config.beta2) * (g * g)
        m_hat = st["m"] / dt(bc1)
        v_hat = st["v"] / dt(bc2)
        p -= dt(lr) * (m_hat / (np.sqrt(v_hat) + dt(config.eps)))
        if config.weight_decay > 0 and weight_decay_applies(name):
            p -= dt(lr * config.weight_decay) * p
    return params, state


def evaluate(
    weights: M.ModelWeights,
    config: M.ModelConfig,
    dataset: EncodedDataset,
    batch_size: int = 64,
) -> float:
    """Fraction of examples whose argmax logit matches the label.

    Argmax ties resolve to the lowest class index; accuracy is an integer
    count divided by the dataset size, so example order cannot matter.
    """
    if len(dataset) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    correct = 0
    for batch in batches(dataset, batch_size):
        logits = M.forward(weights, config, batch.input_ids, batch.attention_mask)
        correct += int((logits.argmax(axis=1) == batch.labels).sum())
    return correct / len(dataset)


def finetune(
    weights: M.ModelWeights,
    config: M.ModelConfig,
    train: EncodedDataset,
    validation: EncodedDataset,
    tconfig: TrainConfig,
    fresh_classifier: bool = True,
) -> tuple[M.ModelWeights, TrainHistory]:
    """Train for ``tconfig.epochs`` epochs, returning the weights snapshot
    from the best validation epoch (ties break to the earlier epoch).

    The classifier head is freshly initialized from ``tconfig.seed`` before
    training unless ``fresh_classifier`` is False. ``epochs == 0`` is a
    strict no-op: the input weights come back bitwise unchanged.
    """
    history = TrainHistory()
    if tconfig.epochs == 0:
        return M.copy_weights(weights), history
    if len(train) == 0 or len(validation) == 0:
        raise ValueError("train and validation sets must be non-empty")
    if config.num_classes is None:
        raise ValueError("config.num_classes must be set for fine-tuning")
    for ds, tag in ((train, "train"), (validation, "validation")):
        if ds.labels.max() >= config.num_classes:
            raise ValueError(
                f"{tag} labels exceed config.num_classes={config.num_classes}"
            )

    work = M.copy_weights(weights)
    if fresh_classifier or work.classifier_weight is None:
        work.classifier_weight, work.classifier_bias = M.init_classifier(
            config, tconfig.seed, dtype=work.token_embeddings.dtype
        )
    params = M.flatten_weights(work)
    state = init_optimizer_state(params)
    steps_per_epoch = math.ceil(len(train) / tconfig.batch_size)
    total_steps = tconfig.epochs * steps_per_epoch
    use_dropout = config.dropout_prob > 0

    best: M.ModelWeights | None = None
    step = 0
    for epoch in range(1, tconfig.epochs + 1):
        losses = []
        for batch in batches(train, tconfig.batch_size, seed=tconfig.seed,
                             shuffle=True, epoch=epoch):
            step += 1
            loss, grads = M.backward(
                work, config, batch.input_ids, batch.attention_mask, batch.labels,
                dropout_key=(tconfig.seed, step) if use_dropout else None,
            )
            if not math.isfinite(loss):
                raise NumericError(f"non-finite training loss at step {step}")
            losses.append(loss)
            optimizer_step(params, grads, state, tconfig, step,
                           total_steps=total_steps)
        val_acc = evaluate(work, config, validation)
        history.epochs.append(EpochRecord(epoch, float(np.mean(losses)), val_acc))
        if best is None or val_acc > history.best_validation_accuracy:
            best = M.copy_weights(work)
            history.best_epoch = epoch
            history.best_validation_accuracy = val_acc
    return best, history
