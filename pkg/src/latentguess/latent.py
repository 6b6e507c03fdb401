"""Latent-space distributions: standard-normal prior, isotropic pivot
Gaussians, and finite Gaussian mixtures over guessed-password latents.

All densities are isotropic. Distributions are immutable values;
`append_component` returns a new mixture. Sampling takes an explicit
numpy Generator so concurrent callers stay independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Prior:
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


@dataclass(frozen=True)
class Pivot:
    center: np.ndarray
    sigma: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if c.ndim != 1:
            raise ValueError("center must be a vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("center must be finite")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class Mixture:
    centers: np.ndarray  # [n, k]
    weights: np.ndarray  # [n], positive, sums to 1
    sigma: float

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("centers must be a non-empty [n, k] array")
        if w.shape != (c.shape[0],):
            raise ValueError("weights must match component count")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_components(self) -> int:
        return self.centers.shape[0]


LatentDistribution = Prior | Pivot | Mixture


def sample(d: LatentDistribution, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw one latent point ([k]) or a batch ([size, k]) from d."""
    n = 1 if size is None else size
    if isinstance(d, Prior):
        out = rng.standard_normal((n, d.dim))
    elif isinstance(d, Pivot):
        out = d.center[None, :] + d.sigma * rng.standard_normal((n, d.dim))
    elif isinstance(d, Mixture):
        comp = rng.choice(d.n_components, size=n, p=d.weights)
        out = d.centers[comp] + d.sigma * rng.standard_normal((n, d.dim))
    else:
        raise TypeError(f"not a latent distribution: {type(d).__name__}")
    return out[0] if size is None else out


def _gauss_logpdf(z: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """log N(z | center_j, sigma^2 I) for every center, shape [n]."""
    k = z.shape[0]
    sq = ((z[None, :] - centers) ** 2).sum(axis=1)
    return -0.5 * (sq / (sigma * sigma) + k * _LOG_2PI) - k * np.log(sigma)


def log_density(d: LatentDistribution, z: np.ndarray) -> float:
    """Exact log density of z under d (log-sum-exp over mixture components)."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("z must be a vector")
    if z.shape[0] != d.dim:
        raise ValueError(f"dimension mismatch: z has {z.shape[0]}, distribution has {d.dim}")
    if isinstance(d, Prior):
        return float(-0.5 * ((z * z).sum() + d.dim * _LOG_2PI))
    if isinstance(d, Pivot):
        return float(_gauss_logpdf(z, d.center[None, :], d.sigma)[0])
    lp = _gauss_logpdf(z, d.centers, d.sigma) + np.log(d.weights)
    m = lp.max()
    return float(m + np.log(np.exp(lp - m).sum()))


def make_latent_distribution(
    points: np.ndarray,
    sigma: float,
    weights: np.ndarray | None = None,
) -> Mixture:
    """Gaussian mixture with one component per latent point.

    Weights are normalized to sum 1; omitted weights mean uniform.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 1:
        raise ValueError("empty point set")
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        w = w / w.sum()
    return Mixture(pts, w, sigma)


def append_component(d: Mixture, z: np.ndarray, weight: float | None = None) -> Mixture:
    """New mixture with one more component centered at z.

    Uniform mixtures stay uniform; weighted mixtures renormalize with the
    new component's raw `weight` (required in that case).
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (d.dim,):
        raise ValueError(f"dimension mismatch: component has {z.shape}, mixture has ({d.dim},)")
    centers = np.vstack([d.centers, z[None, :]])
    uniform = np.allclose(d.weights, 1.0 / d.n_components)
    if weight is None:
        if not uniform:
            raise ValueError("append to a weighted mixture requires a weight")
        w = np.full(centers.shape[0], 1.0 / centers.shape[0])
    else:
        if weight <= 0:
            raise ValueError("weights must be positive")
        w = np.concatenate([d.weights, [weight]])
        w = w / w.sum()
    return Mixture(centers, w, d.sigma)


def export_csv(points: np.ndarray, path) -> None:
    """Write latent points one row per point (plain CSV, no header)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in pts:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
