"""Fisher information and local effective dimension of the quantum parameters.

The Fisher matrix is the expected one, weighted by the model's own class
probabilities:

    F = 1/|X| sum_x sum_y p(y|x) g_xy g_xy^T,   g_xy = grad_theta log p(y|x)

Only the free circuit angles count towards ``d``; head and adapter weights
are held fixed. The ball integrals are Monte Carlo means over uniform samples
in the epsilon-ball, so the ball volume cancels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .grad import PROB_FLOOR, shift_rule_jacobian
from .hybrid import HybridModel, model_probabilities

__all__ = [
    "DegenerateModelError",
    "EffDimConfig",
    "EffDimReport",
    "empirical_fisher",
    "local_effective_dimension",
    "model_probabilities",
    "normalize_fisher",
    "sample_epsilon_ball",
]

EPSILON_SCALE = 1.05


class DegenerateModelError(ValueError):
    """Every sampled Fisher matrix has zero trace."""


@dataclass(frozen=True)
class EffDimConfig:
    n: int
    lam: float = 1.0
    epsilon: float | None = None
    samples: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"n must be >= 8, got {self.n}")
        lower = 2 * np.pi * np.log(self.n) / self.n
        if not lower < self.lam <= 1:
            raise ValueError(f"lambda must lie in ({lower:.4g}, 1] for n={self.n}, got {self.lam}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", EPSILON_SCALE / np.sqrt(self.n))
        if not self.epsilon > 1 / np.sqrt(self.n):
            raise ValueError(f"epsilon must exceed 1/sqrt(n) = {1 / np.sqrt(self.n):.4g}")
        if self.samples < 16:
            raise ValueError(f"need at least 16 Monte Carlo samples, got {self.samples}")
        if self.k <= 1:
            raise ValueError(f"k = lambda n / (2 pi log n) = {self.k:.4g} must exceed 1")

    @property
    def k(self) -> float:
        return self.lam * self.n / (2 * np.pi * np.log(self.n))


@dataclass
class EffDimReport:
    effective_dimension: float
    d: int
    config: EffDimConfig
    half_logdets: np.ndarray = field(repr=False)
    floored_terms: int = 0
    degenerate: bool = False
    theta_mode: str = "fixed"

    @property
    def normalized(self) -> float:
        return self.effective_dimension / self.d if self.d else 0.0

    ROW_FIELDS = ("n", "lambda", "epsilon", "M", "seed", "d", "effdim", "normalized")

    def row(self) -> list:
        c = self.config
        return [c.n, c.lam, c.epsilon, c.samples, c.seed, self.d, self.effective_dimension, self.normalized]


def _fisher(model: HybridModel, params: np.ndarray, angles: np.ndarray) -> tuple[np.ndarray, int]:
    z = model.expectations_from_angles(angles, params)
    probs = model.head.probabilities(z)
    dlogp = model.head.dlogp_dz(z, probs, PROB_FLOOR)  # (B, C, q)
    jac = shift_rule_jacobian(model.program, params, angles)  # (B, d, q)
    scores = np.einsum("bcq,bdq->bcd", dlogp, jac)
    weights = np.where(probs < PROB_FLOOR, 0.0, probs)
    fisher = np.einsum("bc,bcd,bce->de", weights, scores, scores) / len(angles)
    return 0.5 * (fisher + fisher.T), int(np.sum(probs < PROB_FLOOR))


def empirical_fisher(model: HybridModel, params, dataset) -> np.ndarray:
    """``d x d`` Fisher information of the free circuit angles at ``params``."""
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    params = model.program.check_params(params)
    return _fisher(model, params, model.angles(dataset.features))[0]


def normalize_fisher(fishers, d: int) -> np.ndarray:
    """Scale all samples by ``d / mean(trace)`` so the mean trace becomes ``d``."""
    fishers = np.asarray(fishers, dtype=float)
    if fishers.ndim not in (2, 3) or fishers.size == 0:
        raise ValueError("need one (d, d) matrix or a nonempty (M, d, d) stack")
    mean_trace = np.mean(np.trace(fishers, axis1=-2, axis2=-1))
    if not mean_trace > 0:
        raise DegenerateModelError("all Fisher traces are zero")
    return fishers * (d / mean_trace)


def sample_epsilon_ball(theta_star, epsilon: float, M: int, seed: int = 0, free_mask=None) -> np.ndarray:
    """``M`` points uniform in the Euclidean ball of radius ``epsilon`` around ``theta_star``.

    Only coordinates selected by ``free_mask`` move; the ball lives in that
    subspace. Returns an array of shape ``(M, *theta_star.shape)``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if M < 1:
        raise ValueError("M must be >= 1")
    theta_star = np.asarray(theta_star, dtype=float)
    mask = np.ones(theta_star.shape, bool) if free_mask is None else np.asarray(free_mask, bool)
    d = int(mask.sum())
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((M, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = epsilon * rng.uniform(size=(M, 1)) ** (1.0 / d)
    out = np.broadcast_to(theta_star, (M,) + theta_star.shape).copy()
    out[:, mask] += radius * direction
    return out


def half_logdet(fisher_bar: np.ndarray, k: float) -> np.ndarray:
    """``0.5 * log det(I + k F)`` via symmetric eigenvalues clamped at zero."""
    eig = np.linalg.eigvalsh(fisher_bar)
    return 0.5 * np.sum(np.log1p(k * np.maximum(eig, 0.0)), axis=-1)


def effective_dimension_from_fishers(fishers: np.ndarray, d: int, k: float) -> tuple[float, np.ndarray]:
    fbar = normalize_fisher(fishers, d)
    h = half_logdet(fbar, k)
    log_mean = logsumexp(h) - np.log(len(h))
    return float(2 * log_mean / np.log(k)), h


def local_effective_dimension(model: HybridModel, dataset, config: EffDimConfig,
                              theta_star=None, theta_mode: str = "fixed") -> EffDimReport:
    """Monte Carlo estimate of the local effective dimension around ``theta_star``."""
    program = model.program
    theta_star = model.params if theta_star is None else program.check_params(theta_star)
    d = program.free_param_count
    thetas = sample_epsilon_ball(theta_star, config.epsilon, config.samples, config.seed, program.free_mask)
    angles = model.angles(dataset.features)
    fishers = np.empty((config.samples, d, d))
    floored = 0
    for m, theta in enumerate(thetas):
        fishers[m], count = _fisher(model, theta, angles)
        floored += count
    try:
        value, h = effective_dimension_from_fishers(fishers, d, config.k)
    except DegenerateModelError:
        return EffDimReport(0.0, d, config, np.zeros(config.samples), floored, True, theta_mode)
    return EffDimReport(value, d, config, h, floored, False, theta_mode)
