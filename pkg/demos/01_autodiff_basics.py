"""Reverse-mode autodiff basics: graphs, gradients, and a sanity check
against central finite differences.
"""

import numpy as np

from pilot import autodiff as ad
from pilot.autodiff import Tensor
from pilot.optim import Adam

# A tensor that wants gradients, and a little expression on top of it.
x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
loss = ad.square(x).sum()        # d/dx sum(x^2) = 2x
loss.backward()
print("loss =", loss.item())
print("grad =", x.grad)          # [2, 4, 6]

# stop_gradient is a hard barrier: forward value intact, backward zero.
w = Tensor([0.5, 0.5, 0.5], requires_grad=True)
barrier_loss = (ad.stop_gradient(x) * w).sum()
w.grad = x.grad = None
barrier_loss.backward()
print("\nbarrier: w.grad =", w.grad, " x.grad =", x.grad)

# Spot-check a small MLP against central finite differences.
rng = np.random.default_rng(0)
w1 = Tensor(rng.standard_normal((4, 6)) * 0.5, requires_grad=True)
w2 = Tensor(rng.standard_normal((6, 2)) * 0.5, requires_grad=True)
inputs = rng.standard_normal((8, 4))


def forward():
    h = ad.relu(ad.matmul(Tensor(inputs), w1))
    return ad.square(ad.matmul(h, w2)).mean()


for p in (w1, w2):
    p.grad = None
forward().backward()

h = 1e-5
worst = 0.0
for p in (w1, w2):
    flat = p.data.reshape(-1)
    gflat = p.grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = forward().item()
        flat[i] = orig - h
        down = forward().item()
        flat[i] = orig
        fd = (up - down) / (2 * h)
        worst = max(worst, abs(fd - gflat[i]) / (abs(fd) + abs(gflat[i]) + 1e-4))
print(f"\nfinite-difference check: max relative error {worst:.2e}")

# Adam drives a quadratic to zero.
p = Tensor([3.0, -4.0], requires_grad=True)
opt = Adam([p], lr=0.05)
for step in range(200):
    opt.step([p.data.copy()])    # gradient of 0.5*||p||^2 is p itself
print(f"\nAdam on 0.5*||p||^2: ||p|| after 200 steps = {np.linalg.norm(p.data):.2e}")
