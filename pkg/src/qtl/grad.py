"""Parameter-shift gradients and a finite-difference oracle.

Every gate factor here has the form ``exp(-i a G)`` with ``G`` having
eigenvalues +-1 (the angles are full angles, not half angles), so the exact
derivative of an expectation ``f`` is ``f(a + pi/4) - f(a - pi/4)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import CircuitProgram, forward, simulate
from .statevec import expect_z_all

SHIFT = np.pi / 4
DEFAULT_FD_STEP = 1e-5


def _shift_stack(program: CircuitProgram, params: np.ndarray, delta: float) -> np.ndarray:
    """``(2d, layers, qubits, 3)`` stack: each free slot shifted by +delta then -delta."""
    d = program.free_param_count
    flat = np.broadcast_to(params.reshape(-1), (2 * d, params.size)).copy()
    rows = np.arange(d)
    flat[rows, program.free_indices] += delta
    flat[d + rows, program.free_indices] -= delta
    return flat.reshape((2 * d,) + program.param_shape)


def shift_rule_jacobian(program: CircuitProgram, params, features) -> np.ndarray:
    """Derivatives of all qubit expectations w.r.t. the free parameters.

    ``features`` may carry a batch axis; the result has shape
    ``(*batch, free_param_count, qubits)``.
    """
    params = program.check_params(params)
    features = program.check_features(features)
    d = program.free_param_count
    if d == 0:
        return np.zeros(features.shape[:-1] + (0, program.qubit_count))
    stack = _shift_stack(program, params, SHIFT)
    stack = stack.reshape((2 * d,) + (1,) * (features.ndim - 1) + program.param_shape)
    out = forward(program, stack, features)  # (2d, *batch, q)
    jac = out[:d] - out[d:]
    return np.moveaxis(jac, 0, -2)


def feature_jacobian(program: CircuitProgram, params, features) -> np.ndarray:
    """Derivatives of all qubit expectations w.r.t. the input angles, ``(*batch, F, q)``.

    A re-uploaded feature appears in several gates; each occurrence is shifted
    on its own and the contributions are summed.
    """
    params = program.check_params(params)
    features = program.check_features(features)
    slots = program.feature_gate_slots
    g = len(slots)
    shifts = np.concatenate([np.eye(g), -np.eye(g)]) * SHIFT
    shifts = shifts.reshape((2 * g,) + (1,) * (features.ndim - 1) + (g,))
    amps = simulate(program, params, features, feature_shift=shifts)
    out = expect_z_all(amps, program.qubit_count)
    per_gate = np.moveaxis(out[:g] - out[g:], 0, -2)  # (*batch, g, q)
    jac = np.zeros(features.shape[:-1] + (program.feature_dim, program.qubit_count))
    for k, slot in enumerate(slots):
        jac[..., slot, :] += per_gate[..., k, :]
    return jac


def _check_observable(program: CircuitProgram, observable: int) -> None:
    if not 0 <= observable < program.qubit_count:
        raise ValueError(f"observable qubit {observable} out of range for {program.qubit_count} qubits")


def shift_rule_grad(program: CircuitProgram, params, features, observable: int = 0) -> np.ndarray:
    _check_observable(program, observable)
    return shift_rule_jacobian(program, params, features)[..., observable]


def finite_diff_grad(program: CircuitProgram, params, features, observable: int = 0,
                     h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central differences over the free parameters."""
    _check_observable(program, observable)
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"finite-difference step must be in [1e-7, 1e-3], got {h}")
    params = program.check_params(params)
    features = program.check_features(features)
    d = program.free_param_count
    if d == 0:
        return np.zeros(features.shape[:-1] + (0,))
    stack = _shift_stack(program, params, h)
    stack = stack.reshape((2 * d,) + (1,) * (features.ndim - 1) + program.param_shape)
    out = forward(program, stack, features)[..., observable]
    return np.moveaxis((out[:d] - out[d:]) / (2 * h), 0, -1)


@dataclass
class ModelGradient:
    """Mean cross-entropy and its gradient w.r.t. every trainable block."""

    loss: float
    quantum: np.ndarray
    head_weights: np.ndarray
    head_biases: np.ndarray
    adapter_weights: np.ndarray | None = None
    adapter_biases: np.ndarray | None = None


PROB_FLOOR = 1e-12


def model_grad(model, batch) -> ModelGradient:
    """Chain rule from the head through the circuit (shift rule) to the adapter."""
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    program, params, head = model.program, model.params, model.head
    x = np.asarray(batch.features, dtype=float)
    y = np.asarray(batch.labels)
    rows = np.arange(len(y))
    if model.scaler is not None:
        x = model.scaler.transform(x)
    pre = None
    if model.adapter is not None:
        pre = model.adapter.pre(x)
        angles = np.maximum(pre, 0.0)
    else:
        angles = x

    z = forward(program, params, angles)
    probs = head.probabilities(z)
    loss = float(-np.mean(np.log(np.maximum(probs[rows, y], PROB_FLOOR))))
    dz = -head.dlogp_dz(z, probs, PROB_FLOOR)[rows, y] / len(y)  # (B, q)

    jac = shift_rule_jacobian(program, params, angles)
    quantum = np.einsum("bdq,bq->d", jac, dz)

    if head.trainable:
        delta = probs.copy()
        delta[rows, y] -= 1.0
        delta /= len(y)
        head_w, head_b = delta.T @ z, delta.sum(axis=0)
    else:
        head_w, head_b = np.zeros_like(head.weights), np.zeros_like(head.biases)

    grad = ModelGradient(loss, quantum, head_w, head_b)
    if pre is not None:
        d_angles = np.einsum("bfq,bq->bf", feature_jacobian(program, params, angles), dz)
        d_pre = d_angles * (pre > 0)
        grad.adapter_weights = d_pre.T @ x
        grad.adapter_biases = d_pre.sum(axis=0)
    return grad
