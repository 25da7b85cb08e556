"""Dense statevector simulation for small registers.

Qubit 0 is the least-significant bit of the basis index. All kernels accept
arbitrary leading batch dimensions on both the amplitudes and the gate
matrices, which is what makes batched forward passes and parameter-shift
stacks cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 6


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    qubit_count: int

    def __post_init__(self):
        if self.amplitudes.shape[-1] != 1 << self.qubit_count:
            raise ValueError(
                f"expected {1 << self.qubit_count} amplitudes, got {self.amplitudes.shape[-1]}"
            )

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def _check_qubits(q: int) -> None:
    if not 1 <= q <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {q}")


def _check_index(index: int, q: int, what: str = "target") -> None:
    if not 0 <= index < q:
        raise ValueError(f"{what} qubit {index} out of range for {q} qubits")


def _check_finite(*angles) -> None:
    for a in angles:
        if not np.all(np.isfinite(a)):
            raise ValueError("gate angles must be finite")


def basis_state(q: int, index: int = 0) -> StateVector:
    """Computational basis state ``|index>`` on ``q`` qubits."""
    _check_qubits(q)
    if not 0 <= index < 1 << q:
        raise ValueError(f"basis index {index} out of range for {q} qubits")
    amps = np.zeros(1 << q, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, q)


def new_zero_state(q: int) -> StateVector:
    return basis_state(q, 0)


def rotation(phi) -> np.ndarray:
    """Real rotation block ``[[cos, -sin], [sin, cos]]``, batched over ``phi``."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)


def phase(angle) -> np.ndarray:
    """Diagonal gate ``diag(e^{i a}, e^{-i a})``, batched over ``angle``."""
    angle = np.asarray(angle, dtype=float)
    e = np.exp(1j * angle)
    z = np.zeros_like(e)
    return np.stack([np.stack([e, z], -1), np.stack([z, np.conj(e)], -1)], -2)


def gate_u(phi) -> np.ndarray:
    """Feature-encoding gate ``e^{i phi} R(phi)``.

    The global phase is kept; it never changes an expectation value.
    """
    _check_finite(phi)
    phi = np.asarray(phi, dtype=float)
    return np.exp(1j * phi)[..., None, None] * rotation(phi)


def gate_v(theta, gamma, phi) -> np.ndarray:
    """Trainable gate ``P(theta) P(gamma) R(phi)`` with ``P`` the diagonal phase.

    Only ``theta + gamma`` matters physically, but both angles are kept as
    separate trainable slots.
    """
    _check_finite(theta, gamma, phi)
    return phase(np.asarray(theta) + np.asarray(gamma)) @ rotation(phi)


def _apply_1q(amps: np.ndarray, gate: np.ndarray, target: int, q: int) -> np.ndarray:
    lead = amps.shape[:-1]
    psi = amps.reshape(lead + (1 << (q - 1 - target), 2, 1 << target))
    out = np.einsum("...ij,...ajb->...aib", gate, psi)
    return out.reshape(out.shape[:-3] + (1 << q,))


@lru_cache(maxsize=None)
def _cnot_permutation(control: int, target: int, q: int) -> np.ndarray:
    idx = np.arange(1 << q)
    flip = (idx >> control) & 1
    return idx ^ (flip << target)


def _apply_cnot(amps: np.ndarray, control: int, target: int, q: int) -> np.ndarray:
    return amps[..., _cnot_permutation(control, target, q)]


@lru_cache(maxsize=None)
def z_signs(q: int) -> np.ndarray:
    """Matrix of Z eigenvalues, shape ``(2**q, q)``; entry ``[b, t]`` is the sign of bit t."""
    idx = np.arange(1 << q)[:, None]
    return 1.0 - 2.0 * ((idx >> np.arange(q)[None, :]) & 1)


def apply_single(state: StateVector, gate: np.ndarray, target: int) -> StateVector:
    _check_index(target, state.qubit_count)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape[-2:] != (2, 2):
        raise ValueError(f"gate must be 2x2, got shape {gate.shape}")
    return StateVector(_apply_1q(state.amplitudes, gate, target, state.qubit_count), state.qubit_count)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    q = state.qubit_count
    _check_index(control, q, "control")
    _check_index(target, q)
    if control == target:
        raise ValueError("control and target must differ")
    return StateVector(_apply_cnot(state.amplitudes, control, target, q), q)


def expect_z(state: StateVector, target: int) -> float:
    """Pauli-Z expectation of one qubit, in [-1, 1]."""
    _check_index(target, state.qubit_count)
    probs = np.abs(state.amplitudes) ** 2
    return probs @ z_signs(state.qubit_count)[:, target]


def expect_z_all(amps: np.ndarray, q: int) -> np.ndarray:
    """Z expectations of every qubit, batched: ``(..., 2**q) -> (..., q)``."""
    return (np.abs(amps) ** 2) @ z_signs(q)
