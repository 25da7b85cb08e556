"""Classic-quantum-classic classifier: optional affine+ReLU adapter, circuit, softmax head."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .ansatz import AnsatzSpec, CircuitProgram, build, forward, init_params
from .data import AngleScaler, Dataset, split_fraction

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "qtl-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ClassicalHead:
    """Final layer mapping qubit expectations to class probabilities.

    ``activation="softmax"`` is the trainable dense head. ``"expectation"`` is
    a parameter-free binary head, ``p = ((1 + z0) / 2, (1 - z0) / 2)``, which
    gives closed-form probabilities for analytic checks.
    """

    weights: np.ndarray  # (C, q)
    biases: np.ndarray  # (C,)
    activation: str = "softmax"

    def __post_init__(self):
        if self.activation not in ("softmax", "expectation"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.activation == "expectation" and self.class_count != 2:
            raise ValueError("expectation head is binary")

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def trainable(self) -> bool:
        return self.activation == "softmax"

    def logits(self, z: np.ndarray) -> np.ndarray:
        return z @ self.weights.T + self.biases

    def probabilities(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "expectation":
            z0 = z[..., 0]
            return np.stack([(1 + z0) / 2, (1 - z0) / 2], axis=-1)
        s = self.logits(z)
        s = s - s.max(axis=-1, keepdims=True)
        e = np.exp(s)
        return e / e.sum(axis=-1, keepdims=True)

    def dlogp_dz(self, z: np.ndarray, probs: np.ndarray, floor: float = 1e-12) -> np.ndarray:
        """``d log p_y / d z``, shape ``(..., C, q)``."""
        if self.activation == "expectation":
            sign = np.array([1.0, -1.0])
            out = np.zeros(z.shape[:-1] + (2, z.shape[-1]))
            out[..., 0] = sign / (2 * np.maximum(probs, floor))
            return out
        mean_w = probs @ self.weights  # (..., q)
        return self.weights - mean_w[..., None, :]


@dataclass(frozen=True, eq=False)
class Adapter:
    """Trainable ``relu(W x + b)`` from incoming features to circuit angles."""

    weights: np.ndarray  # (F_circuit, F_in)
    biases: np.ndarray

    def pre(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.biases

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(self.pre(x), 0.0)


@dataclass(frozen=True, eq=False)
class HybridModel:
    spec: AnsatzSpec
    program: CircuitProgram
    params: np.ndarray
    head: ClassicalHead
    adapter: Adapter | None = None
    scaler: AngleScaler | None = None

    def __post_init__(self):
        self.program.check_params(self.params)
        if self.head.weights.shape[1] != self.spec.qubits:
            raise ValueError("head input width must equal the qubit count")
        if self.adapter is not None and self.adapter.weights.shape[0] != self.spec.feature_dim:
            raise ValueError("adapter output width must equal the circuit feature width")

    @property
    def class_count(self) -> int:
        return self.head.class_count

    @property
    def input_dim(self) -> int:
        return self.spec.feature_dim if self.adapter is None else self.adapter.weights.shape[1]

    def angles(self, x) -> np.ndarray:
        """Raw input features to circuit angles (scaler, then adapter)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input features, got {x.shape[-1]}")
        if self.scaler is not None:
            x = self.scaler.transform(x)
        if self.adapter is not None:
            x = self.adapter(x)
        return x

    def expectations_from_angles(self, angles, params=None) -> np.ndarray:
        return forward(self.program, self.params if params is None else params, angles)

    def expectations(self, x, params=None) -> np.ndarray:
        return self.expectations_from_angles(self.angles(x), params)

    def probabilities(self, x, params=None) -> np.ndarray:
        return self.head.probabilities(self.expectations(x, params))


def init_model(spec: AnsatzSpec, classes: int, seed: int = 0, input_dim: int | None = None,
               activation: str = "softmax", scaler: AngleScaler | None = None) -> HybridModel:
    """Random model: quantum angles uniform in [0, 2pi), head weights in [-0.1, 0.1], zero biases.

    An adapter is added when ``input_dim`` differs from the circuit feature width.
    """
    rng = np.random.default_rng(seed)
    program = build(spec)
    params = init_params(program, rng)
    head = ClassicalHead(rng.uniform(-0.1, 0.1, size=(classes, spec.qubits)), np.zeros(classes), activation)
    adapter = None
    if input_dim is not None and input_dim != spec.feature_dim:
        bound = 1.0 / np.sqrt(input_dim)
        adapter = Adapter(rng.uniform(-bound, bound, size=(spec.feature_dim, input_dim)),
                          np.full(spec.feature_dim, np.pi / 4))
    return HybridModel(spec, program, params, head, adapter, scaler)


def model_probabilities(model: HybridModel, features) -> np.ndarray:
    return model.probabilities(features)


def predict(model: HybridModel, features) -> tuple[np.ndarray, np.ndarray]:
    """Labels (argmax, ties to the lowest index) and probability vectors."""
    probs = model.probabilities(features)
    return np.argmax(probs, axis=-1), probs


@dataclass
class Metrics:
    accuracy: float
    per_class_f1: list
    loss_history: list = field(default_factory=list)
    train_accuracy: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def f1_scores(labels: np.ndarray, predicted: np.ndarray, classes: int) -> list[float]:
    out = []
    for c in range(classes):
        tp = np.sum((predicted == c) & (labels == c))
        fp = np.sum((predicted == c) & (labels != c))
        fn = np.sum((predicted != c) & (labels == c))
        denom = 2 * tp + fp + fn
        out.append(float(2 * tp / denom) if denom else 0.0)
    return out


def evaluate(model: HybridModel, dataset: Dataset) -> Metrics:
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    if dataset.feature_dim != model.input_dim:
        raise ValueError(f"dataset has {dataset.feature_dim} features, model expects {model.input_dim}")
    predicted, _ = predict(model, dataset.features)
    accuracy = int(np.sum(predicted == dataset.labels)) / len(dataset)
    return Metrics(accuracy, f1_scores(dataset.labels, predicted, model.class_count))


class Optimizer(str, enum.Enum):
    ADAM = "adam"
    SGD = "sgd"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.05
    head_learning_rate: float = 0.01
    # None: head rate / fan-in, since Adam moves every weight by ~lr per step
    adapter_learning_rate: float | None = None
    optimizer: Optimizer = Optimizer.ADAM
    seed: int = 0
    train_fraction: float = 0.8
    train_head: bool = True
    angle_range: tuple = (0.0, np.pi / 2)

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        object.__setattr__(self, "angle_range", tuple(float(v) for v in self.angle_range))
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        rates = (self.learning_rate, self.head_learning_rate, self.adapter_learning_rate)
        if any(r is not None and r <= 0 for r in rates):
            raise ValueError("learning rates must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = self.optimizer.value
        d["angle_range"] = list(self.angle_range)
        return d


class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m, self.v = np.zeros_like(grad), np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad ** 2
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return value - self.lr * grad


def _make_opt(config: TrainConfig, lr: float):
    return _Adam(lr) if config.optimizer is Optimizer.ADAM else _SGD(lr)


def prepare(model: HybridModel, dataset: Dataset, config: TrainConfig) -> tuple[HybridModel, Dataset, Dataset]:
    """Stratified split and angle scaler fitted on the training part."""
    train_set, test_set = split_fraction(dataset, config.train_fraction, config.seed)
    scaler = AngleScaler.fit(train_set, *config.angle_range)
    return replace(model, scaler=scaler), train_set, test_set


def fit(model: HybridModel, train_set: Dataset, config: TrainConfig,
        epochs: int | None = None) -> tuple[HybridModel, list[float]]:
    """Mini-batch descent on mean cross-entropy; returns the model and per-epoch mean loss."""
    from .grad import model_grad

    epochs = config.epochs if epochs is None else epochs
    rng = np.random.default_rng(config.seed + 1)
    program = model.program
    q_opt = _make_opt(config, config.learning_rate)
    head_opts = [_make_opt(config, config.head_learning_rate) for _ in range(2)]
    adapter_lr = config.adapter_learning_rate
    if adapter_lr is None:
        adapter_lr = config.head_learning_rate / model.input_dim
    head_opts += [_make_opt(config, adapter_lr) for _ in range(2)]
    theta = program.free_params(model.params)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(train_set))
        losses, sizes = [], []
        for start in range(0, len(order), config.batch_size):
            batch = train_set.subset(order[start:start + config.batch_size])
            g = model_grad(model, batch)
            if not np.isfinite(g.loss) or not np.all(np.isfinite(g.quantum)):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}; try a smaller learning rate "
                    f"(quantum lr={config.learning_rate}, head lr={config.head_learning_rate})"
                )
            losses.append(g.loss)
            sizes.append(len(batch))
            theta = q_opt.step(theta, g.quantum)
            params = program.with_free_params(model.params, theta)
            head, adapter = model.head, model.adapter
            if config.train_head and head.trainable:
                head = replace(head, weights=head_opts[0].step(head.weights, g.head_weights),
                               biases=head_opts[1].step(head.biases, g.head_biases))
            if adapter is not None:
                adapter = Adapter(head_opts[2].step(adapter.weights, g.adapter_weights),
                                  head_opts[3].step(adapter.biases, g.adapter_biases))
            model = replace(model, params=params, head=head, adapter=adapter)
        history.append(float(np.average(losses, weights=sizes)))
        log.debug("epoch %d loss %.6f |grad| %.3e", epoch + 1, history[-1], np.linalg.norm(g.quantum))
    return model, history


def train(model: HybridModel, dataset: Dataset, config: TrainConfig) -> tuple[HybridModel, Metrics]:
    """Split, scale, fit, and report metrics on the held-out part."""
    present = np.unique(dataset.labels)
    if len(present) < model.class_count:
        raise ValueError(f"dataset has {len(present)} classes, model expects {model.class_count}")
    model, train_set, test_set = prepare(model, dataset, config)
    model, history = fit(model, train_set, config)
    metrics = evaluate(model, test_set)
    metrics.loss_history = history
    metrics.train_accuracy = evaluate(model, train_set).accuracy
    return model, metrics


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(model: HybridModel, path, *, seed: int, config: dict,
                    metrics: Metrics | None = None) -> None:
    """Write a JSON checkpoint; layout is described in the README."""
    record = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": model.spec.to_dict(),
        "params": model.params.tolist(),
        "head": {
            "weights": model.head.weights.tolist(),
            "biases": model.head.biases.tolist(),
            "activation": model.head.activation,
        },
        "adapter": None if model.adapter is None else {
            "weights": model.adapter.weights.tolist(),
            "biases": model.adapter.biases.tolist(),
        },
        "scaler": None if model.scaler is None else model.scaler.to_dict(),
        "seed": seed,
        "config": config,
        "config_hash": _config_hash(config),
        "metrics": None if metrics is None else metrics.to_dict(),
    }
    Path(path).write_text(json.dumps(record, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[HybridModel, dict]:
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    if record.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a checkpoint file")
    if record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {record.get('version')}")
    spec = AnsatzSpec.from_dict(record["spec"])
    h = record["head"]
    head = ClassicalHead(np.array(h["weights"], dtype=float), np.array(h["biases"], dtype=float),
                         h["activation"])
    a = record["adapter"]
    adapter = None if a is None else Adapter(np.array(a["weights"], dtype=float),
                                             np.array(a["biases"], dtype=float))
    scaler = None if record["scaler"] is None else AngleScaler.from_dict(record["scaler"])
    model = HybridModel(spec, build(spec), np.array(record["params"], dtype=float), head, adapter, scaler)
    return model, record
