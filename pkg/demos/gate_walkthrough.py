"""Single-mode and two-mode gates on small Fock states, then one circuit gradient.

Run with ``python3 demos/gate_walkthrough.py``.
"""

import numpy as np

from qglm.circuit import CircuitParams, TrainConfig, gradient, mse_loss, predict
from qglm.fock import (
    apply_gate,
    expectation_x,
    fock_basis_state,
    mean_photon_number,
    photon_number_distribution,
    vacuum_state,
)
from qglm.gates import beamsplitter_gate, displacement_gate, squeezing_gate

CUTOFF = 20


def single_mode():
    alpha = 0.8 + 0.3j
    state = apply_gate(vacuum_state(1, CUTOFF), displacement_gate(alpha, CUTOFF), (0,))
    print("coherent state, alpha =", alpha)
    print(f"  <n> = {mean_photon_number(state, 0):.6f}   |alpha|^2 = {abs(alpha) ** 2:.6f}")
    print(f"  <x> = {expectation_x(state, 0):.6f}   2 Re alpha = {2 * alpha.real:.6f}")

    r = 0.6
    state = apply_gate(vacuum_state(1, CUTOFF), squeezing_gate(r, CUTOFF), (0,))
    probs = photon_number_distribution(state, 0)
    print(f"squeezed vacuum, r = {r}")
    print(f"  <n> = {mean_photon_number(state, 0):.6f}   sinh^2 r = {np.sinh(r) ** 2:.6f}")
    print(f"  odd-photon weight = {probs[1::2].sum():.2e}")


def two_mode():
    cutoff = 6
    state = fock_basis_state((1, 1), cutoff)
    out = apply_gate(state, beamsplitter_gate(np.pi / 4, 0.0, cutoff), (0, 1))
    amp = out.tensor()
    print("balanced beamsplitter on |1,1>")
    print(f"  P(2,0) = {abs(amp[0, 2]) ** 2:.6f}  P(0,2) = {abs(amp[2, 0]) ** 2:.6f}"
          f"  P(1,1) = {abs(amp[1, 1]) ** 2:.2e}")


def circuit_gradient():
    rng = np.random.default_rng(0)
    params = CircuitParams.random(4, rng, scale=0.3)
    config = TrainConfig(cutoff=8)
    x = rng.normal(size=(5, 4))
    y = rng.normal(size=5)
    print("four-mode circuit, cutoff 8")
    print("  predictions:", np.round(predict(params, x, config), 5))
    g = gradient(params, x, y, config)
    flat, k, h = params.flatten(), 3, 1e-5
    plus, minus = flat.copy(), flat.copy()
    plus[k] += h
    minus[k] -= h
    fd = (mse_loss(CircuitParams.unflatten(4, plus), x, y, config)
          - mse_loss(CircuitParams.unflatten(4, minus), x, y, config)) / (2 * h)
    print(f"  dL/dtheta[{k}]: adjoint {g[k]:.8f}  central difference {fd:.8f}")


if __name__ == "__main__":
    single_mode()
    two_mode()
    circuit_gradient()
