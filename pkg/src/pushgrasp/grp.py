"""Gaussian random paths: a GP over planar paths pinned at anchor points.

Each output dimension (x and y) is an independent squared-exponential GP
over normalized time; the two share the anchor times and hence one
posterior covariance. The mean path interpolates the anchors when the
noise variance is tiny, and posterior samples give trajectory variation
around it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, LinAlgError

# Free anchors sit at these times; time 0 is the fixed start.
ANCHOR_TIMES = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)
DEFAULT_QUERY_POINTS = 64

CONDITION_LIMIT = 1e12
BASE_JITTER = 1e-9
MAX_JITTER = 1e-6


class GRPError(ValueError):
    pass


@dataclass
class KernelParams:
    length_scale: float = 0.25
    signal_variance: float = 0.05
    noise_variance: float = 1e-8

    def __post_init__(self) -> None:
        if self.length_scale <= 0 or self.signal_variance <= 0 or self.noise_variance < 0:
            raise GRPError("kernel parameters out of range")


@dataclass
class AnchorSet:
    """Time-stamped waypoints; the first is the fixed start at time 0."""
    times: np.ndarray
    points: np.ndarray  # (n, 2)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.times.ndim != 1 or self.points.shape != (len(self.times), 2):
            raise GRPError("anchor times and points must align as (n,) and (n, 2)")
        if len(self.times) < 1 or self.times[0] != 0.0:
            raise GRPError("first anchor must sit at time 0")
        if np.any(np.diff(self.times) <= 0):
            raise GRPError("anchor times must be strictly increasing")
        if not (np.isfinite(self.times).all() and np.isfinite(self.points).all()):
            raise GRPError("anchors must be finite")

    @classmethod
    def from_free_anchors(cls, start: tuple[float, float],
                          free_points: np.ndarray) -> "AnchorSet":
        free_points = np.asarray(free_points, dtype=float).reshape(-1, 2)
        if len(free_points) != len(ANCHOR_TIMES) - 1:
            raise GRPError(f"expected {len(ANCHOR_TIMES) - 1} free anchors")
        pts = np.vstack([np.asarray(start, dtype=float), free_points])
        return cls(times=np.array(ANCHOR_TIMES), points=pts)


@dataclass
class GRPPosterior:
    query_times: np.ndarray          # (T,)
    mean: np.ndarray                 # (T, 2)
    covariance: np.ndarray           # (T, T), shared by both dimensions
    kernel: KernelParams = field(default_factory=KernelParams)

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.covariance)


def se_kernel(t1: np.ndarray, t2: np.ndarray, kernel: KernelParams) -> np.ndarray:
    diff = np.subtract.outer(np.asarray(t1, float), np.asarray(t2, float))
    return kernel.signal_variance * np.exp(-(diff ** 2) / (2.0 * kernel.length_scale ** 2))


def build_posterior(anchors: AnchorSet, kernel: KernelParams | None = None,
                    query_points: int = DEFAULT_QUERY_POINTS) -> GRPPosterior:
    """GP regression conditioned on the anchors at uniform query times."""
    kernel = kernel or KernelParams()
    if query_points < 2:
        raise GRPError("need at least 2 query points")

    ta = anchors.times
    tq = np.linspace(0.0, 1.0, query_points)
    k_aa = se_kernel(ta, ta, kernel) + kernel.noise_variance * np.eye(len(ta))
    if np.linalg.cond(k_aa) > CONDITION_LIMIT:
        raise GRPError("anchor kernel matrix is numerically singular")
    k_qa = se_kernel(tq, ta, kernel)
    k_qq = se_kernel(tq, tq, kernel)

    factor = cho_factor(k_aa, lower=True)
    mean = k_qa @ cho_solve(factor, anchors.points)
    cov = k_qq - k_qa @ cho_solve(factor, k_qa.T)
    cov = 0.5 * (cov + cov.T)
    return GRPPosterior(query_times=tq, mean=mean, covariance=cov, kernel=kernel)


def _factor_with_jitter(cov: np.ndarray) -> np.ndarray:
    jitter = BASE_JITTER
    while True:
        try:
            return cholesky(cov + jitter * np.eye(len(cov)), lower=True)
        except LinAlgError:
            if jitter >= MAX_JITTER:
                raise GRPError("posterior covariance factorization failed")
            jitter = min(jitter * 10.0, MAX_JITTER)


def sample_path(posterior: GRPPosterior, seed: int) -> np.ndarray:
    """One posterior draw, deterministic per seed; shape (T, 2)."""
    chol = _factor_with_jitter(posterior.covariance)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((len(posterior.query_times), 2))
    return posterior.mean + chol @ eps


def mean_path(posterior: GRPPosterior) -> np.ndarray:
    """The zero-noise special case of sample_path."""
    return posterior.mean.copy()
