"""Circuit families and their compiled gate programs.

Each layer is executed in the order feature gates, trainable gates, entangler
block. Without re-uploading the feature gates only appear in the first layer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .statevec import MAX_QUBITS, _apply_1q, _apply_cnot, expect_z_all, gate_u, gate_v


class Family(str, enum.Enum):
    REAL_AMPLITUDES = "real_amplitudes"
    STRONG_ENTANGLING = "strong_entangling"
    SINGLE_QUBIT = "single_qubit"


class Entangler(str, enum.Enum):
    ALL_TO_ALL = "all_to_all"
    RING = "ring"
    NONE = "none"


_DEFAULT_ENTANGLER = {
    Family.REAL_AMPLITUDES: Entangler.ALL_TO_ALL,
    Family.STRONG_ENTANGLING: Entangler.RING,
    Family.SINGLE_QUBIT: Entangler.NONE,
}

SINGLE_QUBIT_FEATURES = 3


@dataclass(frozen=True)
class AnsatzSpec:
    family: Family
    layers: int
    qubits: int = 3
    reuploading: bool = False
    entangler: Entangler | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        expected = _DEFAULT_ENTANGLER[self.family]
        ent = expected if self.entangler is None else Entangler(self.entangler)
        if ent is not expected:
            raise ValueError(f"{self.family.value} requires entangler {expected.value}, got {ent.value}")
        object.__setattr__(self, "entangler", ent)
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.family is Family.SINGLE_QUBIT and self.qubits != 1:
            raise ValueError("single_qubit family uses exactly one qubit")
        if not 1 <= self.qubits <= MAX_QUBITS:
            raise ValueError(f"qubits must be in [1, {MAX_QUBITS}], got {self.qubits}")

    @property
    def feature_dim(self) -> int:
        return SINGLE_QUBIT_FEATURES if self.family is Family.SINGLE_QUBIT else self.qubits

    @property
    def param_shape(self) -> tuple[int, int, int]:
        return (self.layers, self.qubits, 3)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "layers": self.layers,
            "qubits": self.qubits,
            "reuploading": self.reuploading,
            "entangler": self.entangler.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzSpec":
        return cls(
            family=Family(d["family"]),
            layers=int(d["layers"]),
            qubits=int(d.get("qubits", 1 if d["family"] == Family.SINGLE_QUBIT.value else 3)),
            reuploading=bool(d.get("reuploading", False)),
            entangler=d.get("entangler"),
        )


class FeatureGate(NamedTuple):
    slot: int
    qubit: int


class ParamGate(NamedTuple):
    layer: int
    qubit: int


class CNOT(NamedTuple):
    control: int
    target: int


Instruction = Union[FeatureGate, ParamGate, CNOT]


@dataclass(frozen=True, eq=False)
class CircuitProgram:
    spec: AnsatzSpec
    instructions: tuple
    free_mask: np.ndarray = field(repr=False)

    @property
    def qubit_count(self) -> int:
        return self.spec.qubits

    @property
    def feature_dim(self) -> int:
        return self.spec.feature_dim

    @property
    def param_shape(self) -> tuple[int, int, int]:
        return self.spec.param_shape

    @property
    def free_param_count(self) -> int:
        return int(self.free_mask.sum())

    @property
    def free_indices(self) -> np.ndarray:
        """Flat indices into the ``(layers, qubits, 3)`` tensor of the trainable slots."""
        return np.flatnonzero(self.free_mask)

    @property
    def feature_gate_slots(self) -> np.ndarray:
        return np.array([ins.slot for ins in self.instructions if isinstance(ins, FeatureGate)], dtype=int)

    def free_params(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        return params.reshape(params.shape[:-3] + (-1,))[..., self.free_indices]

    def with_free_params(self, params: np.ndarray, values: np.ndarray) -> np.ndarray:
        out = np.array(params, dtype=float, copy=True)
        flat = out.reshape(out.shape[:-3] + (-1,))
        flat[..., self.free_indices] = values
        return flat.reshape(out.shape)

    def check_params(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape[-3:] != self.param_shape:
            raise ValueError(f"params must have trailing shape {self.param_shape}, got {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("params must be finite")
        return params

    def check_features(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim == 0 or features.shape[-1] != self.feature_dim:
            raise ValueError(f"features must have trailing length {self.feature_dim}, got {features.shape}")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        return features


def entangler_block(kind: Entangler, qubits: int, layer: int) -> list[tuple[int, int]]:
    """Controlled-X pairs of one entangling block; ``layer`` counts from 1."""
    kind = Entangler(kind)
    if qubits < 2:
        raise ValueError(f"entangler needs at least 2 qubits, got {qubits}")
    if kind is Entangler.ALL_TO_ALL:
        return [(a, b) for a in range(qubits) for b in range(a + 1, qubits)]
    if kind is Entangler.RING:
        r = (layer - 1) % (qubits - 1) + 1
        return [(j, (j + r) % qubits) for j in range(qubits)]
    raise ValueError(f"no entangler pairs for kind {kind.value}")


def build(spec: AnsatzSpec) -> CircuitProgram:
    q, n = spec.qubits, spec.layers
    ins: list[Instruction] = []
    for i in range(n):
        if spec.reuploading or i == 0:
            if spec.family is Family.SINGLE_QUBIT:
                ins.extend(FeatureGate(slot, 0) for slot in range(SINGLE_QUBIT_FEATURES))
            else:
                ins.extend(FeatureGate(j, j) for j in range(q))
        ins.extend(ParamGate(i, j) for j in range(q))
        if spec.entangler is not Entangler.NONE and q >= 2:
            ins.extend(CNOT(c, t) for c, t in entangler_block(spec.entangler, q, i + 1))

    mask = np.ones(spec.param_shape, dtype=bool)
    if spec.family is Family.REAL_AMPLITUDES:
        mask[..., :2] = False
    return CircuitProgram(spec, tuple(ins), mask)


def init_params(program: CircuitProgram, rng: np.random.Generator) -> np.ndarray:
    """Uniform angles in [0, 2*pi) on free slots, structural zeros elsewhere."""
    values = rng.uniform(0.0, 2 * np.pi, size=program.free_param_count)
    return program.with_free_params(np.zeros(program.param_shape), values)


def simulate(program: CircuitProgram, params, features, initial_state: int = 0,
             feature_shift=None) -> np.ndarray:
    """Final amplitudes, batched over the leading dims of ``params`` and ``features``.

    ``feature_shift`` adds an offset to every feature-gate occurrence (trailing
    axis has one entry per occurrence, in program order); used for derivatives
    with respect to the encoded angles.
    """
    params = program.check_params(params)
    features = program.check_features(features)
    q = program.qubit_count
    lead = np.broadcast_shapes(params.shape[:-3], features.shape[:-1])
    if feature_shift is not None:
        feature_shift = np.asarray(feature_shift, dtype=float)
        lead = np.broadcast_shapes(lead, feature_shift.shape[:-1])

    amps = np.zeros(lead + (1 << q,), dtype=complex)
    amps[..., initial_state] = 1.0
    occurrence = 0
    for ins in program.instructions:
        if isinstance(ins, FeatureGate):
            angle = features[..., ins.slot]
            if feature_shift is not None:
                angle = angle + feature_shift[..., occurrence]
            occurrence += 1
            amps = _apply_1q(amps, gate_u(angle), ins.qubit, q)
        elif isinstance(ins, ParamGate):
            p = params[..., ins.layer, ins.qubit, :]
            amps = _apply_1q(amps, gate_v(p[..., 0], p[..., 1], p[..., 2]), ins.qubit, q)
        else:
            amps = _apply_cnot(amps, ins.control, ins.target, q)
    return amps


def forward(program: CircuitProgram, params, features, initial_state: int = 0) -> np.ndarray:
    """Per-qubit Z expectations, shape ``(..., qubits)``."""
    if not 0 <= initial_state < 1 << program.qubit_count:
        raise ValueError(f"initial basis state {initial_state} out of range")
    return expect_z_all(simulate(program, params, features, initial_state), program.qubit_count)
