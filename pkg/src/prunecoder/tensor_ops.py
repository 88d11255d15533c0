"""Dense tensor primitives with exact analytic gradients.

Everything operates on plain numpy arrays: row-major buffers, float32 for
training speed or float64 for gradient checking. All functions are pure;
identical inputs give bitwise-identical outputs. Stability is handled by
construction (max-subtracted softmax, log-sum-exp cross-entropy), so finite
inputs never produce NaN/Inf.

Differentiable primitives return a DualResult. Its ``backward`` maps the
gradient of the output to gradients of the differentiable inputs, in
argument order, with matching shapes.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import erf

from .errors import NumericError

INV_SQRT2 = float(1.0 / np.sqrt(2.0))
INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class DualResult(NamedTuple):
    """Forward value plus the vector-Jacobian product for its inputs."""

    output: np.ndarray
    backward: Callable


def assert_finite(x: np.ndarray, what: str) -> None:
    """Raise NumericError if ``x`` contains NaN or Inf."""
    if not np.isfinite(x).all():
        raise NumericError(f"non-finite values in {what}")


def matmul(a: np.ndarray, b: np.ndarray) -> DualResult:
    """Matrix product of a [m,k] and b [k,n]; dA = dC @ B^T, dB = A^T @ dC."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b

    def backward(d_out):
        return d_out @ b.T, a.T @ d_out

    return DualResult(out, backward)


def batched_matmul(a: np.ndarray, b: np.ndarray) -> DualResult:
    """Broadcasting matmul over leading axes: (..., m, k) @ (..., k, n)."""
    out = a @ b

    def backward(d_out):
        return d_out @ np.swapaxes(b, -1, -2), np.swapaxes(a, -1, -2) @ d_out

    return DualResult(out, backward)


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> DualResult:
    """Affine map x @ W^T + b with W stored (out_features, in_features)."""
    out = x @ weight.T + bias

    def backward(d_out):
        d2 = d_out.reshape(-1, weight.shape[0])
        x2 = x.reshape(-1, weight.shape[1])
        d_x = d_out @ weight
        d_w = d2.T @ x2
        d_b = d2.sum(axis=0)
        return d_x, d_w, d_b

    return DualResult(out, backward)


def softmax(x: np.ndarray, axis: int = -1) -> DualResult:
    """Max-subtracted softmax along ``axis``; rows sum to 1."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward(d_out):
        inner = np.sum(d_out * out, axis=axis, keepdims=True)
        return (out * (d_out - inner),)

    return DualResult(out, backward)


def layer_norm(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float
) -> DualResult:
    """Normalize the last axis by mean and biased variance, then affine."""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ValueError("layer_norm: gamma/beta must match last-axis size")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv_s = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_s
    out = gamma * xhat + beta

    def backward(d_out):
        lead = tuple(range(d_out.ndim - 1))
        d_gamma = np.sum(d_out * xhat, axis=lead)
        d_beta = np.sum(d_out, axis=lead)
        d_xhat = d_out * gamma
        m1 = d_xhat.mean(axis=-1, keepdims=True)
        m2 = np.mean(d_xhat * xhat, axis=-1, keepdims=True)
        d_x = (d_xhat - m1 - xhat * m2) * inv_s
        return d_x, d_gamma, d_beta

    return DualResult(out, backward)


def gelu(x: np.ndarray) -> DualResult:
    """Exact Gaussian-CDF GELU, x * Phi(x)."""
    phi_cdf = 0.5 * (1.0 + erf(x * INV_SQRT2))
    out = x * phi_cdf

    def backward(d_out):
        pdf = np.exp(-0.5 * x * x) * INV_SQRT_2PI
        return (d_out * (phi_cdf + x * pdf),)

    return DualResult(out, backward)


def tanh_act(x: np.ndarray) -> DualResult:
    """Elementwise tanh."""
    t = np.tanh(x)

    def backward(d_out):
        return (d_out * (1.0 - t * t),)

    return DualResult(t, backward)


def embedding_gather(table: np.ndarray, ids: np.ndarray) -> DualResult:
    """Row lookup table[ids]; backward scatter-adds into the table gradient."""
    out = table[ids]

    def backward(d_out):
        d_table = np.zeros_like(table)
        np.add.at(d_table, ids, d_out)
        return (d_table,)

    return DualResult(out, backward)


def dropout(
    x: np.ndarray, p: float, key: tuple[int, int, int] | None = None
) -> DualResult:
    """Inverted-scaling dropout driven by a counter-based Philox stream.

    ``key`` is (seed, step, site); the same key always yields the same mask.
    p == 0 is the exact identity and consumes no randomness.
    """
    if p == 0.0:
        return DualResult(x, lambda d_out: (d_out,))
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0,1), got {p}")
    if key is None:
        raise ValueError("dropout with p > 0 requires a (seed, step, site) key")
    seed, step, site = key
    rng = np.random.Generator(
        np.random.Philox(key=np.array([seed, (step << 16) + site], dtype=np.uint64))
    )
    keep = (rng.random(x.shape) >= p).astype(x.dtype)
    scale = x.dtype.type(1.0 / (1.0 - p))
    mask = keep * scale
    out = x * mask

    def backward(d_out):
        return (d_out * mask,)

    return DualResult(out, backward)


def cross_entropy(logits: np.ndarray, labels: Sequence[int]) -> DualResult:
    """Mean negative log softmax probability of the labeled class.

    Log-sum-exp stabilized. Backward yields the logits gradient only
    (labels are not differentiable).
    """
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"label out of range [0, {c})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - lse
    loss = -log_probs[np.arange(n), labels].mean()

    def backward(d_out):
        probs = np.exp(log_probs)
        probs[np.arange(n), labels] -= 1.0
        return (probs * (d_out / n),)

    return DualResult(loss, backward)


def grad_check(fn, inputs, h: float = 1e-6, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn(*arrays) -> DualResult`` whose backward returns one gradient per
    input. Inputs are promoted to float64; finite differences are unreliable
    in float32. Relative error divides by max(|analytic|, |numeric|, 1e-8)
    per coordinate.
    """
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    result = fn(*arrays)
    rng = np.random.default_rng(seed)
    out = np.asarray(result.output)
    upstream = rng.standard_normal(out.shape) if out.shape else np.float64(1.0)
    analytic = result.backward(upstream)
    if not isinstance(analytic, tuple):
        analytic = (analytic,)

    def scalar_eval():
        return float(np.vdot(np.asarray(fn(*arrays).output), upstream))

    worst = 0.0
    for x, grad in zip(arrays, analytic):
        flat = x.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = scalar_eval()
            flat[i] = orig - h
            f_minus = scalar_eval()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
