"""Verify analytic gradients against central finite differences.

Every primitive ships its own backward; this demo checks a few of them at
random points, then runs the whole 2-layer encoder + loss through the
same machinery.
"""

import numpy as np

from prunecoder import ModelConfig, grad_check, gradient_check
from prunecoder import tensor_ops as T

rng = np.random.default_rng(0)

print("== primitive gradients (64-bit, h=1e-6) ==")
a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
print(f"matmul      max rel err {grad_check(lambda x, y: T.matmul(x, y), [a, b], h=1e-6):.2e}")

x = rng.standard_normal((2, 6))
gamma, beta = rng.standard_normal(6), rng.standard_normal(6)
err = grad_check(lambda v, g, c: T.layer_norm(v, g, c, 1e-6), [x, gamma, beta], h=1e-6)
print(f"layer_norm  max rel err {err:.2e}")

print(f"gelu        max rel err {grad_check(lambda v: T.gelu(v), [rng.standard_normal(20)], h=1e-6):.2e}")

logits = rng.standard_normal((4, 5))
err = grad_check(lambda v: T.cross_entropy(v, [0, 2, 4, 1]), [logits], h=1e-6)
print(f"cross_entropy max rel err {err:.2e}")

print()
print("== full 2-layer encoder forward + loss ==")
config = ModelConfig(num_layers=2, hidden_size=8, num_heads=2,
                     intermediate_size=16, vocab_size=32, max_positions=16,
                     num_classes=4)
for seed in range(3):
    print(f"seed {seed}: max rel err {gradient_check(config, seed=seed):.2e}")
print("all gradients verified against the finite-difference oracle")
