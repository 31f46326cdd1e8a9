"""Time-varying Gaussian-process UCB for choosing hyperparameters.

Observations are ``(t, x, y)``: the interval index, the normalized
hyperparameters used over that interval, and the reward improvement they
produced. The covariance is a squared-exponential kernel over ``x`` with
per-dimension lengthscales, multiplied by ``(1 - eps) ** (|t - t'| / 2)``
so older observations count for less.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import InvalidArgument, NumericError

WINDOW = 64
MAX_JITTER = 1e-4
_JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)

SIGNAL_GRID = (0.25, 1.0, 4.0, 16.0)
LENGTHSCALE_GRID = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)
EPSILON_GRID = (0.0, 0.01, 0.05, 0.1, 0.2, 0.4)
NOISE_GRID = (1e-4, 1e-3, 1e-2, 0.1, 0.5)


@dataclass(frozen=True)
class BanditObservation:
    t: int
    x: tuple[float, ...]
    y: float

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        if any(not (0.0 <= v <= 1.0) for v in x):
            raise InvalidArgument(f"x must lie in the unit box, got {x}")
        if self.t < 0:
            raise InvalidArgument("t must be >= 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class KernelParams:
    signal_var: float
    lengthscales: tuple[float, ...]
    epsilon: float
    noise_var: float

    def __post_init__(self):
        if self.signal_var <= 0 or self.noise_var <= 0 or min(self.lengthscales, default=1.0) <= 0:
            raise InvalidArgument("kernel variances and lengthscales must be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise InvalidArgument("epsilon must lie in [0, 1)")
        object.__setattr__(self, "lengthscales", tuple(float(v) for v in self.lengthscales))


def kernel_matrix(params: KernelParams, t1, x1, t2, x2) -> np.ndarray:
    """Noise-free covariance between two sets of (t, x) points."""
    t1 = np.asarray(t1, dtype=np.float64).reshape(-1)
    t2 = np.asarray(t2, dtype=np.float64).reshape(-1)
    ls = np.asarray(params.lengthscales)
    a = np.asarray(x1, dtype=np.float64).reshape(len(t1), -1) / ls
    b = np.asarray(x2, dtype=np.float64).reshape(len(t2), -1) / ls
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    k = params.signal_var * np.exp(-0.5 * np.maximum(sq, 0.0))
    if params.epsilon > 0.0:
        k = k * (1.0 - params.epsilon) ** (np.abs(t1[:, None] - t2[None, :]) / 2.0)
    return k


@dataclass
class GpModel:
    """A GP conditioned on (standardized) data, with its Cholesky factor cached."""

    params: KernelParams
    T: np.ndarray
    X: np.ndarray
    y: np.ndarray
    y_mean: float = 0.0
    y_std: float = 1.0
    chol: np.ndarray | None = None
    alpha: np.ndarray | None = None
    jitter: float = 0.0
    lml: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def dim(self) -> int:
        return len(self.params.lengthscales)


def _factor(params: KernelParams, T, X) -> tuple[np.ndarray, float]:
    k = kernel_matrix(params, T, X, T, X)
    n = k.shape[0]
    for jitter in _JITTERS:
        try:
            return cholesky(k + (params.noise_var + jitter) * np.eye(n), lower=True), jitter
        except LinAlgError:
            continue
    raise NumericError(f"kernel matrix not positive definite even with jitter {MAX_JITTER}")


def _lml_from_chol(chol, alpha, y) -> float:
    n = y.shape[0]
    return float(-0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * math.log(2.0 * math.pi))


def log_marginal_likelihood(params: KernelParams, T, X, y) -> float:
    chol, _ = _factor(params, T, X)
    y = np.asarray(y, dtype=np.float64)
    return _lml_from_chol(chol, cho_solve((chol, True), y), y)


def condition(params: KernelParams, T, X, y, y_mean: float = 0.0, y_std: float = 1.0) -> GpModel:
    """Condition a GP with fixed kernel parameters on already-standardized ``y``."""
    T = np.asarray(T, dtype=np.float64).reshape(-1)
    X = np.asarray(X, dtype=np.float64).reshape(len(T), len(params.lengthscales))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(T) == 0:
        return GpModel(params, T, X, y, y_mean, y_std)
    chol, jitter = _factor(params, T, X)
    alpha = cho_solve((chol, True), y)
    return GpModel(params, T, X, y, y_mean, y_std, chol, alpha, jitter, _lml_from_chol(chol, alpha, y))


def prior_model(dim: int, params: KernelParams | None = None) -> GpModel:
    params = params or KernelParams(1.0, (0.2,) * dim, 0.0, 1e-2)
    return condition(params, np.zeros(0), np.zeros((0, dim)), np.zeros(0))


def fit(
    observations: Sequence[BanditObservation],
    window: int = WINDOW,
    dim: int | None = None,
) -> GpModel:
    """Standardize y and pick kernel parameters maximizing the marginal likelihood.

    Parameters are chosen on a fixed grid (shared lengthscale), then each
    dimension's lengthscale is refined over the same grid. Only the most
    recent ``window`` observations are used. An empty list gives the prior.
    """
    obs = list(observations)[-window:]
    if not obs:
        if dim is None:
            raise InvalidArgument("dimension unknown for an empty observation list")
        return prior_model(dim)
    d = len(obs[0].x)
    if any(len(o.x) != d for o in obs):
        raise InvalidArgument("observations have inconsistent dimensions")
    T = np.array([o.t for o in obs], dtype=np.float64)
    X = np.array([o.x for o in obs], dtype=np.float64)
    raw = np.array([o.y for o in obs], dtype=np.float64)
    y_mean = float(raw.mean())
    y_std = float(raw.std())

    if not y_std > 0.0:
        # nothing to learn from identical targets
        params = KernelParams(1.0, (0.2,) * d, 0.0, 1.0)
        model = condition(params, T, X, np.zeros_like(raw), y_mean, 1.0)
        model.diagnostics["flat_targets"] = True
        return model

    y = (raw - y_mean) / y_std
    sqdist = (X[:, None, :] - X[None, :, :]) ** 2
    dt = np.abs(T[:, None] - T[None, :])
    eye = np.eye(len(y))

    def score(sv, scales, eps, nv):
        k = sv * np.exp(-0.5 * (sqdist / np.square(scales)).sum(-1))
        if eps > 0.0:
            k = k * (1.0 - eps) ** (dt / 2.0)
        try:
            chol = np.linalg.cholesky(k + nv * eye)
        except np.linalg.LinAlgError:
            return -math.inf
        alpha = cho_solve((chol, True), y)
        return _lml_from_chol(chol, alpha, y)

    best, best_lml = None, -math.inf
    for sv, ls, eps, nv in itertools.product(SIGNAL_GRID, LENGTHSCALE_GRID, EPSILON_GRID, NOISE_GRID):
        lml = score(sv, np.full(d, ls), eps, nv)
        if lml > best_lml:
            best, best_lml = KernelParams(sv, (ls,) * d, eps, nv), lml
    if best is None:
        raise NumericError("no grid point gave a positive-definite kernel matrix")
    if d > 1:
        for i in range(d):
            for ls in LENGTHSCALE_GRID:
                scales = list(best.lengthscales)
                scales[i] = ls
                lml = score(best.signal_var, np.array(scales), best.epsilon, best.noise_var)
                if lml > best_lml:
                    best, best_lml = replace(best, lengthscales=tuple(scales)), lml
    model = condition(best, T, X, y, y_mean, y_std)
    model.diagnostics["flat_targets"] = False
    return model


def posterior_batch(model: GpModel, t, X) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance (standardized units) at several points."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    T = np.broadcast_to(np.asarray(t, dtype=np.float64), (X.shape[0],))
    prior_var = np.full(X.shape[0], model.params.signal_var)
    if model.n == 0:
        return np.zeros(X.shape[0]), prior_var
    ks = kernel_matrix(model.params, T, X, model.T, model.X)
    mean = ks @ model.alpha
    v = solve_triangular(model.chol, ks.T, lower=True)
    var = prior_var - (v * v).sum(0)
    return mean, np.maximum(var, 0.0)


def posterior(model: GpModel, t: int, x) -> tuple[float, float]:
    mean, var = posterior_batch(model, t, np.atleast_1d(np.asarray(x, dtype=np.float64))[None, :])
    return float(mean[0]), float(var[0])


@dataclass(frozen=True)
class AcquisitionConfig:
    kappa: float = 2.0
    schedule: str = "constant"
    n_candidates: int = 1000
    n_local: int = 100
    local_scale: float = 0.05

    def __post_init__(self):
        if self.kappa < 0:
            raise InvalidArgument("kappa must be >= 0")
        if self.n_candidates < 1:
            raise InvalidArgument("candidate count must be >= 1")
        if self.schedule not in ("constant", "log"):
            raise InvalidArgument(f"unknown kappa schedule {self.schedule!r}")

    def kappa_at(self, t: int, dim: int) -> float:
        if self.schedule == "constant":
            return self.kappa
        t = max(int(t), 1)
        return math.sqrt(2.0 * math.log(dim * t * t * math.pi**2 / 0.6))


def _hallucinate(model: GpModel, t: int, pending) -> GpModel:
    for x in pending:
        x = np.asarray(x, dtype=np.float64)
        mean, _ = posterior(model, t, x)
        model = condition(
            model.params,
            np.append(model.T, t),
            np.vstack([model.X, x[None, :]]),
            np.append(model.y, mean),
            model.y_mean,
            model.y_std,
        )
    return model


def suggest(
    model: GpModel,
    t: int,
    bounds=None,
    pending: Sequence = (),
    cfg: AcquisitionConfig = AcquisitionConfig(),
    seed: int = 0,
) -> np.ndarray:
    """Maximize ``mean + kappa * std`` over a seeded candidate set.

    Candidates are uniform draws inside ``bounds`` (a ``(d, 2)`` array in
    unit coordinates, default the whole box) plus Gaussian perturbations of
    the observed point with the highest posterior mean. Points in
    ``pending`` are added at their posterior mean first so concurrent
    selections spread out.
    """
    d = model.dim
    bounds = np.tile([0.0, 1.0], (d, 1)) if bounds is None else np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (d, 2):
        raise InvalidArgument(f"bounds must have shape ({d}, 2)")
    lo, hi = bounds[:, 0], bounds[:, 1]
    rng = np.random.default_rng(seed)
    if model.n == 0 and not len(pending):
        return rng.uniform(lo, hi)

    model = _hallucinate(model, t, pending)
    cands = [rng.uniform(lo, hi, size=(cfg.n_candidates, d))]
    if model.n and cfg.n_local:
        means, _ = posterior_batch(model, t, model.X)
        incumbent = model.X[int(np.argmax(means))]
        local = incumbent + cfg.local_scale * rng.standard_normal((cfg.n_local, d))
        cands += [np.clip(incumbent, lo, hi)[None, :], np.clip(local, lo, hi)]
    cands = np.vstack(cands)
    mean, var = posterior_batch(model, t, cands)
    ucb = mean + cfg.kappa_at(t, d) * np.sqrt(var)
    return cands[int(np.argmax(ucb))].copy()
