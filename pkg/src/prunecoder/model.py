"""BERT-style encoder for sequence classification.

Embeddings (token + position + type-0, layer-normed) feed a stack of
post-layer-norm encoder layers (self-attention then feed-forward, each
followed by add & norm), a tanh pooler over position 0, and an affine
classifier head. Forward and backward are hand-composed from the
primitives in :mod:`prunecoder.tensor_ops`; gradients cover every weight
tensor, with zeros for tensors off the compute path.

Weights carry canonical dotted names ("embeddings.token",
"encoder.layer.{i}.attn.q.weight", ...); these names are the shared
vocabulary for checkpoints, optimizer state, and gradient dictionaries.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import tensor_ops as T
from .errors import DataError

MASK_BIAS = -1e9  # additive pre-softmax penalty for masked positions


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``num_classes`` may be None for headless checkpoints (pretrained
    encoders whose task head is initialized at fine-tune time).
    """

    num_layers: int
    hidden_size: int
    num_heads: int
    intermediate_size: int
    vocab_size: int
    max_positions: int
    type_vocab: int = 2
    num_classes: int | None = None
    layer_norm_eps: float = 1e-12
    dropout_prob: float = 0.0

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_size % self.num_heads != 0:
            raise ValueError("hidden_size must be divisible by num_heads")
        if self.num_classes is not None and self.num_classes < 2:
            raise ValueError("num_classes must be >= 2 when set")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must be in [0, 1)")
        if self.layer_norm_eps <= 0:
            raise ValueError("layer_norm_eps must be positive")
        for name in ("hidden_size", "num_heads", "intermediate_size",
                     "vocab_size", "max_positions", "type_vocab"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def head_dim(self) -> int:
        return self.hidden_size // self.num_heads

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def base_config(**overrides) -> ModelConfig:
    """12-layer BERT-base geometry."""
    return _preset(12, **overrides)


def small_config(**overrides) -> ModelConfig:
    """6-layer variant of the base geometry."""
    return _preset(6, **overrides)


def smaller_config(**overrides) -> ModelConfig:
    """2-layer variant of the base geometry."""
    return _preset(2, **overrides)


def _preset(num_layers: int, **overrides) -> ModelConfig:
    params = dict(
        num_layers=num_layers,
        hidden_size=768,
        num_heads=12,
        intermediate_size=3072,
        vocab_size=30522,
        max_positions=512,
    )
    params.update(overrides)
    return ModelConfig(**params)


@dataclass
class EncoderLayerWeights:
    """The 16 tensors of one encoder layer."""

    q_weight: np.ndarray
    q_bias: np.ndarray
    k_weight: np.ndarray
    k_bias: np.ndarray
    v_weight: np.ndarray
    v_bias: np.ndarray
    out_weight: np.ndarray
    out_bias: np.ndarray
    attn_norm_gamma: np.ndarray
    attn_norm_beta: np.ndarray
    up_weight: np.ndarray
    up_bias: np.ndarray
    down_weight: np.ndarray
    down_bias: np.ndarray
    ffn_norm_gamma: np.ndarray
    ffn_norm_beta: np.ndarray


@dataclass
class ModelWeights:
    """Full weight set; classifier tensors are None for headless models."""

    token_embeddings: np.ndarray
    position_embeddings: np.ndarray
    type_embeddings: np.ndarray
    embed_norm_gamma: np.ndarray
    embed_norm_beta: np.ndarray
    layers: list[EncoderLayerWeights]
    pooler_weight: np.ndarray
    pooler_bias: np.ndarray
    classifier_weight: np.ndarray | None = None
    classifier_bias: np.ndarray | None = None


# Canonical name suffix -> EncoderLayerWeights attribute.
_LAYER_TENSORS = [
    ("attn.q.weight", "q_weight"),
    ("attn.q.bias", "q_bias"),
    ("attn.k.weight", "k_weight"),
    ("attn.k.bias", "k_bias"),
    ("attn.v.weight", "v_weight"),
    ("attn.v.bias", "v_bias"),
    ("attn.out.weight", "out_weight"),
    ("attn.out.bias", "out_bias"),
    ("attn.norm.gamma", "attn_norm_gamma"),
    ("attn.norm.beta", "attn_norm_beta"),
    ("ffn.up.weight", "up_weight"),
    ("ffn.up.bias", "up_bias"),
    ("ffn.down.weight", "down_weight"),
    ("ffn.down.bias", "down_bias"),
    ("ffn.norm.gamma", "ffn_norm_gamma"),
    ("ffn.norm.beta", "ffn_norm_beta"),
]

_EMBED_TENSORS = [
    ("embeddings.token", "token_embeddings"),
    ("embeddings.position", "position_embeddings"),
    ("embeddings.type", "type_embeddings"),
    ("embeddings.norm.gamma", "embed_norm_gamma"),
    ("embeddings.norm.beta", "embed_norm_beta"),
]

_HEAD_TENSORS = [
    ("pooler.weight", "pooler_weight"),
    ("pooler.bias", "pooler_bias"),
]

_CLASSIFIER_TENSORS = [
    ("classifier.weight", "classifier_weight"),
    ("classifier.bias", "classifier_bias"),
]


def tensor_names(config: ModelConfig) -> list[str]:
    """Canonical tensor names for a config, in definition order."""
    names = [n for n, _ in _EMBED_TENSORS]
    for i in range(config.num_layers):
        names.extend(f"encoder.layer.{i}.{suffix}" for suffix, _ in _LAYER_TENSORS)
    names.extend(n for n, _ in _HEAD_TENSORS)
    if config.num_classes is not None:
        names.extend(n for n, _ in _CLASSIFIER_TENSORS)
    return names


def tensor_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Expected shape for every canonical tensor name."""
    h, i = config.hidden_size, config.intermediate_size
    shapes: dict[str, tuple[int, ...]] = {
        "embeddings.token": (config.vocab_size, h),
        "embeddings.position": (config.max_positions, h),
        "embeddings.type": (config.type_vocab, h),
        "embeddings.norm.gamma": (h,),
        "embeddings.norm.beta": (h,),
        "pooler.weight": (h, h),
        "pooler.bias": (h,),
    }
    layer_shapes = {
        "attn.q.weight": (h, h), "attn.q.bias": (h,),
        "attn.k.weight": (h, h), "attn.k.bias": (h,),
        "attn.v.weight": (h, h), "attn.v.bias": (h,),
        "attn.out.weight": (h, h), "attn.out.bias": (h,),
        "attn.norm.gamma": (h,), "attn.norm.beta": (h,),
        "ffn.up.weight": (i, h), "ffn.up.bias": (i,),
        "ffn.down.weight": (h, i), "ffn.down.bias": (h,),
        "ffn.norm.gamma": (h,), "ffn.norm.beta": (h,),
    }
    for li in range(config.num_layers):
        for suffix, shape in layer_shapes.items():
            shapes[f"encoder.layer.{li}.{suffix}"] = shape
    if config.num_classes is not None:
        shapes["classifier.weight"] = (config.num_classes, h)
        shapes["classifier.bias"] = (config.num_classes,)
    return shapes


def flatten_weights(weights: ModelWeights) -> dict[str, np.ndarray]:
    """Map canonical names to the weight arrays (no copies)."""
    out = {name: getattr(weights, attr) for name, attr in _EMBED_TENSORS}
    for i, layer in enumerate(weights.layers):
        for suffix, attr in _LAYER_TENSORS:
            out[f"encoder.layer.{i}.{suffix}"] = getattr(layer, attr)
    for name, attr in _HEAD_TENSORS:
        out[name] = getattr(weights, attr)
    if weights.classifier_weight is not None:
        for name, attr in _CLASSIFIER_TENSORS:
            out[name] = getattr(weights, attr)
    return out


def unflatten_weights(named: dict[str, np.ndarray], config: ModelConfig) -> ModelWeights:
    """Rebuild a ModelWeights from a canonical name -> array mapping."""
    layers = []
    for i in range(config.num_layers):
        kwargs = {
            attr: named[f"encoder.layer.{i}.{suffix}"]
            for suffix, attr in _LAYER_TENSORS
        }
        layers.append(EncoderLayerWeights(**kwargs))
    has_classifier = "classifier.weight" in named
    return ModelWeights(
        token_embeddings=named["embeddings.token"],
        position_embeddings=named["embeddings.position"],
        type_embeddings=named["embeddings.type"],
        embed_norm_gamma=named["embeddings.norm.gamma"],
        embed_norm_beta=named["embeddings.norm.beta"],
        layers=layers,
        pooler_weight=named["pooler.weight"],
        pooler_bias=named["pooler.bias"],
        classifier_weight=named["classifier.weight"] if has_classifier else None,
        classifier_bias=named["classifier.bias"] if has_classifier else None,
    )


def copy_weights(weights: ModelWeights) -> ModelWeights:
    """Deep copy of every weight array."""
    def cp(x):
        return None if x is None else x.copy()

    layers = [
        EncoderLayerWeights(
            **{f.name: getattr(layer, f.name).copy()
               for f in fields(EncoderLayerWeights)}
        )
        for layer in weights.layers
    ]
    return ModelWeights(
        token_embeddings=weights.token_embeddings.copy(),
        position_embeddings=weights.position_embeddings.copy(),
        type_embeddings=weights.type_embeddings.copy(),
        embed_norm_gamma=weights.embed_norm_gamma.copy(),
        embed_norm_beta=weights.embed_norm_beta.copy(),
        layers=layers,
        pooler_weight=weights.pooler_weight.copy(),
        pooler_bias=weights.pooler_bias.copy(),
        classifier_weight=cp(weights.classifier_weight),
        classifier_bias=cp(weights.classifier_bias),
    )


def _truncated_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal(0, std) resampled until every draw lies within 2 sigma."""
    x = rng.standard_normal(shape)
    bad = np.abs(x) > 2.0
    while bad.any():
        x[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(x) > 2.0
    return x * std


def init_scratch(config: ModelConfig, seed: int, dtype=np.float32) -> ModelWeights:
    """Random initialization: truncated normal(0, 0.02) weights, zero biases,
    unit layer-norm gamma. Deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    shapes = tensor_shapes(config)
    named: dict[str, np.ndarray] = {}
    for name in tensor_names(config):
        shape = shapes[name]
        if name.endswith(".bias") or name.endswith(".beta"):
            named[name] = np.zeros(shape, dtype=dtype)
        elif name.endswith(".gamma"):
            named[name] = np.ones(shape, dtype=dtype)
        else:
            named[name] = _truncated_normal(rng, shape, 0.02).astype(dtype)
    return unflatten_weights(named, config)


def init_classifier(
    config: ModelConfig, seed: int, dtype=np.float32
) -> tuple[np.ndarray, np.ndarray]:
    """Fresh classifier head tensors for ``config.num_classes`` classes."""
    if config.num_classes is None:
        raise ValueError("config has no num_classes; cannot build classifier")
    rng = np.random.default_rng(seed)
    w = _truncated_normal(rng, (config.num_classes, config.hidden_size), 0.02)
    return w.astype(dtype), np.zeros(config.num_classes, dtype=dtype)


def _validate_inputs(weights, config, input_ids, attention_mask):
    if input_ids.ndim != 2:
        raise DataError(f"input_ids must be 2-D, got shape {input_ids.shape}")
    if attention_mask.shape != input_ids.shape:
        raise DataError("attention_mask shape must match input_ids")
    s = input_ids.shape[1]
    if s > config.max_positions:
        raise DataError(
            f"sequence length {s} exceeds max_positions {config.max_positions}"
        )
    if input_ids.min() < 0 or input_ids.max() >= config.vocab_size:
        raise DataError(
            f"token id out of range [0, {config.vocab_size})"
        )
    if not np.isin(attention_mask, (0, 1)).all():
        raise DataError("attention_mask entries must be 0 or 1")
    if (attention_mask.sum(axis=1) == 0).any():
        raise DataError("attention_mask has an all-zero row")
    if len(weights.layers) != config.num_layers:
        raise DataError(
            f"weights carry {len(weights.layers)} layers, config says "
            f"{config.num_layers}"
        )


class _Tape:
    """Reverse-ordered stack of VJP closures plus named parameter grads."""

    def __init__(self):
        self.stack: list = []
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, g: np.ndarray) -> None:
        if name in self.grads:
            self.grads[name] += g
        else:
            self.grads[name] = g

    def run(self, d_out):
        for fn in reversed(self.stack):
            d_out = fn(d_out)
        return d_out


def _encoder_forward(weights, config, input_ids, attention_mask,
                     tape: _Tape | None, dropout_key=None):
    """Shared forward over embeddings and encoder layers; returns [B,S,H]."""
    b, s = input_ids.shape
    dt = weights.token_embeddings.dtype
    eps = config.layer_norm_eps
    p_drop = config.dropout_prob if dropout_key is not None else 0.0
    site = iter(range(10_000))

    def drop(x):
        key = None if dropout_key is None else (*dropout_key, next(site))
        res = T.dropout(x, p_drop, key)
        if tape is not None:
            tape.stack.append(lambda d, bw=res.backward: bw(d)[0])
        return res.output

    tok = T.embedding_gather(weights.token_embeddings, input_ids)
    pos = weights.position_embeddings[:s]
    typ = weights.type_embeddings[0]
    summed = tok.output + pos + typ
    if tape is not None:
        def embed_vjp(d, bw=tok.backward):
            tape.add("embeddings.token", bw(d)[0])
            d_pos = np.zeros_like(weights.position_embeddings)
            d_pos[:s] = d.sum(axis=0)
            tape.add("embeddings.position", d_pos)
            d_typ = np.zeros_like(weights.type_embeddings)
            d_typ[0] = d.sum(axis=(0, 1))
            tape.add("embeddings.type", d_typ)
            return None
        tape.stack.append(embed_vjp)

    ln = T.layer_norm(summed, weights.embed_norm_gamma, weights.embed_norm_beta, eps)
    if tape is not None:
        def embed_ln_vjp(d, bw=ln.backward):
            d_x, d_g, d_b = bw(d)
            tape.add("embeddings.norm.gamma", d_g)
            tape.add("embeddings.norm.beta", d_b)
            return d_x
        tape.stack.append(embed_ln_vjp)
    hidden = drop(ln.output)

    n_heads, d_head = config.num_heads, config.head_dim
    inv_sqrt_d = dt.type(1.0) / np.sqrt(dt.type(d_head))
    mask_bias = ((1 - attention_mask)[:, None, None, :] * dt.type(MASK_BIAS)).astype(dt)

    def to_heads(x):
        return x.reshape(b, s, n_heads, d_head).transpose(0, 2, 1, 3)

    def from_heads(x):
        return x.transpose(0, 2, 1, 3).reshape(b, s, n_heads * d_head)

    for li, layer in enumerate(weights.layers):
        prefix = f"encoder.layer.{li}"

        def named_linear(x, w, bias, tag, pfx=prefix):
            res = T.linear(x, w, bias)
            if tape is not None:
                def vjp(d, bw=res.backward, tag=tag, pfx=pfx):
                    d_x, d_w, d_b = bw(d)
                    tape.add(f"{pfx}.{tag}.weight", d_w)
                    tape.add(f"{pfx}.{tag}.bias", d_b)
                    return d_x
                tape.stack.append(vjp)
            return res.output

        def residual_norm(branch_start_idx, pre, post_branch, gamma, beta, tag,
                          pfx=prefix):
            """Add & norm closing a sublayer; rewires the tape so the branch
            VJPs and the residual skip both feed the sublayer input."""
            res = T.layer_norm(pre + post_branch, gamma, beta, eps)
            if tape is not None:
                branch = tape.stack[branch_start_idx:]
                del tape.stack[branch_start_idx:]

                def vjp(d, bw=res.backward, branch=branch, tag=tag, pfx=pfx):
                    d_sum, d_g, d_b = bw(d)
                    tape.add(f"{pfx}.{tag}.gamma", d_g)
                    tape.add(f"{pfx}.{tag}.beta", d_b)
                    d_branch = d_sum
                    for fn in reversed(branch):
                        d_branch = fn(d_branch)
                    return d_sum + d_branch
                tape.stack.append(vjp)
            return res.output

        # --- self-attention sublayer ---
        mark = len(tape.stack) if tape is not None else 0
        q_res = T.linear(hidden, layer.q_weight, layer.q_bias)
        v_res = T.linear(hidden, layer.v_weight, layer.v_bias)
        # The key bias shifts every score in a softmax row by the same
        # amount and cancels exactly, so keys project without it. The
        # tensor still exists (checkpoint/export compatibility) and gets
        # an exact-zero gradient.
        k_pre = hidden @ layer.k_weight.T
        q, k, v = to_heads(q_res.output), to_heads(k_pre), to_heads(v_res.output)

        scores = (q * inv_sqrt_d) @ k.transpose(0, 1, 3, 2) + mask_bias
        probs = T.softmax(scores, axis=-1)
        ctx = from_heads(probs.output @ v)

        if tape is not None:
            def attention_vjp(d_ctx, q_bw=q_res.backward, v_bw=v_res.backward,
                              q=q, k=k, v=v, probs=probs, x=hidden,
                              w_k=layer.k_weight, pfx=prefix):
                d_heads = to_heads(d_ctx)
                d_probs = d_heads @ v.transpose(0, 1, 3, 2)
                d_v = probs.output.transpose(0, 1, 3, 2) @ d_heads
                d_scores = probs.backward(d_probs)[0]
                d_q = from_heads((d_scores @ k) * inv_sqrt_d)
                d_k = from_heads((d_scores.transpose(0, 1, 3, 2) @ q) * inv_sqrt_d)
                d_in, d_w, d_b = q_bw(d_q)
                tape.add(f"{pfx}.attn.q.weight", d_w)
                tape.add(f"{pfx}.attn.q.bias", d_b)
                d_in2, d_w, d_b = v_bw(from_heads(d_v))
                tape.add(f"{pfx}.attn.v.weight", d_w)
                tape.add(f"{pfx}.attn.v.bias", d_b)
                h_dim = w_k.shape[0]
                tape.add(f"{pfx}.attn.k.weight",
                         d_k.reshape(-1, h_dim).T @ x.reshape(-1, w_k.shape[1]))
                return d_in + d_in2 + d_k @ w_k
            tape.stack.append(attention_vjp)

        attn_out = drop(named_linear(ctx, layer.out_weight, layer.out_bias, "attn.out"))
        hidden = residual_norm(mark, hidden, attn_out,
                               layer.attn_norm_gamma, layer.attn_norm_beta,
                               "attn.norm")

        # --- feed-forward sublayer ---
        mark = len(tape.stack) if tape is not None else 0
        up = named_linear(hidden, layer.up_weight, layer.up_bias, "ffn.up")
        act = T.gelu(up)
        if tape is not None:
            tape.stack.append(lambda d, bw=act.backward: bw(d)[0])
        down = drop(named_linear(act.output, layer.down_weight, layer.down_bias,
                                 "ffn.down"))
        hidden = residual_norm(mark, hidden, down,
                               layer.ffn_norm_gamma, layer.ffn_norm_beta,
                               "ffn.norm")

    return hidden


def _pool(weights, hidden, tape: _Tape | None):
    first = hidden[:, 0, :]
    pre = T.linear(first, weights.pooler_weight, weights.pooler_bias)
    pooled = T.tanh_act(pre.output)
    if tape is not None:
        def vjp(d, lin_bw=pre.backward, tanh_bw=pooled.backward, shape=hidden.shape):
            d_pre = tanh_bw(d)[0]
            d_first, d_w, d_b = lin_bw(d_pre)
            tape.add("pooler.weight", d_w)
            tape.add("pooler.bias", d_b)
            d_hidden = np.zeros(shape, dtype=d_first.dtype)
            d_hidden[:, 0, :] = d_first
            return d_hidden
        tape.stack.append(vjp)
    return pooled.output


def forward_pooled(weights, config, input_ids, attention_mask) -> np.ndarray:
    """Pooled [CLS] representation [B,H]; works for headless models."""
    input_ids = np.asarray(input_ids)
    attention_mask = np.asarray(attention_mask)
    _validate_inputs(weights, config, input_ids, attention_mask)
    hidden = _encoder_forward(weights, config, input_ids, attention_mask, None)
    return _pool(weights, hidden, None)


def forward(weights, config, input_ids, attention_mask) -> np.ndarray:
    """Classification logits [B,C]."""
    input_ids = np.asarray(input_ids)
    attention_mask = np.asarray(attention_mask)
    if weights.classifier_weight is None:
        raise DataError("model is headless: no classifier tensors")
    _validate_inputs(weights, config, input_ids, attention_mask)
    hidden = _encoder_forward(weights, config, input_ids, attention_mask, None)
    pooled = _pool(weights, hidden, None)
    return pooled @ weights.classifier_weight.T + weights.classifier_bias


def backward(weights, config, input_ids, attention_mask, labels,
             dropout_key: tuple[int, int] | None = None):
    """Loss and gradients for every weight tensor.

    Returns ``(loss, grads)`` where grads maps each canonical tensor name to
    an array shaped like the weight; off-path tensors get exact zeros.
    ``dropout_key`` is (seed, step) and enables dropout at config.dropout_prob.
    """
    input_ids = np.asarray(input_ids)
    attention_mask = np.asarray(attention_mask)
    if weights.classifier_weight is None:
        raise DataError("model is headless: no classifier tensors")
    _validate_inputs(weights, config, input_ids, attention_mask)

    tape = _Tape()
    hidden = _encoder_forward(weights, config, input_ids, attention_mask,
                              tape, dropout_key)
    pooled = _pool(weights, hidden, tape)
    logits_res = T.linear(pooled, weights.classifier_weight, weights.classifier_bias)

    def classifier_vjp(d, bw=logits_res.backward):
        d_pooled, d_w, d_b = bw(d)
        tape.add("classifier.weight", d_w)
        tape.add("classifier.bias", d_b)
        return d_pooled
    tape.stack.append(classifier_vjp)

    ce = T.cross_entropy(logits_res.output, labels)
    d_logits = ce.backward(np.asarray(ce.output).dtype.type(1.0))[0]
    tape.run(d_logits)

    grads = tape.grads
    for name, arr in flatten_weights(weights).items():
        if name not in grads:
            grads[name] = np.zeros_like(arr)
    return float(ce.output), grads


def param_count(config: ModelConfig) -> dict[str, int]:
    """Parameter breakdown: embeddings, per_layer, encoder_total, pooler,
    classifier, total."""
    h, i = config.hidden_size, config.intermediate_size
    v, p, t = config.vocab_size, config.max_positions, config.type_vocab
    c = config.num_classes or 0
    embeddings = v * h + p * h + t * h + 2 * h
    per_layer = 4 * (h * h + h) + 2 * h + (h * i + i) + (i * h + h) + 2 * h
    encoder_total = config.num_layers * per_layer
    pooler = h * h + h
    classifier = c * h + c
    return {
        "embeddings": embeddings,
        "per_layer": per_layer,
        "encoder_total": encoder_total,
        "pooler": pooler,
        "classifier": classifier,
        "total": embeddings + encoder_total + pooler + classifier,
    }


def gradient_check(config: ModelConfig, seed: int, h: float = 3e-5,
                   batch_size: int = 2, seq_len: int = 4,
                   weight_scale: float = 0.25) -> float:
    """Full-model finite-difference check at a generic random point.

    Builds a float64 model and batch from ``seed`` and returns the max
    relative error between analytic and central-difference gradients of
    the classification loss over every weight coordinate.

    The point is a moderate-scale random draw rather than the training
    initialization: near init the attention logits are almost uniform and
    attention gradients fall below the finite-difference noise floor,
    which would measure noise instead of correctness. Large scales hit
    the same wall in the far GELU tail.
    """
    if config.num_classes is None:
        raise ValueError("gradient_check needs a config with num_classes")
    rng = np.random.default_rng(seed)
    shapes = tensor_shapes(config)
    named = {}
    for name in tensor_names(config):
        draw = weight_scale * rng.standard_normal(shapes[name])
        named[name] = 1.0 + draw if name.endswith(".gamma") else draw
    ids = rng.integers(0, config.vocab_size, (batch_size, seq_len))
    mask = np.ones((batch_size, seq_len), dtype=np.int64)
    if seq_len > 1:
        mask[0, -1] = 0  # exercise the masked path
    labels = rng.integers(0, config.num_classes, batch_size)

    names = tensor_names(config)
    arrays = [named[n] for n in names]

    def fn(*arrs):
        w = unflatten_weights(dict(zip(names, arrs)), config)
        loss, grads = backward(w, config, ids, mask, labels)
        return T.DualResult(
            np.float64(loss),
            lambda up: tuple(grads[n] * up for n in names),
        )

    return T.grad_check(fn, arrays, h=h, seed=seed)
