"""Mollified chaos integrals, truncation events, and the Sobolev diagnostic.

The chaos integral is a plain quadrature of Wick-normalized exponentials of
the sampled mollified field against a compactly supported test function.
Overflow of the exponential is saturated to zero and flagged, never left as
a silent infinity; estimators downstream exclude flagged replicas and report
the exclusion count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import Grid

OVERFLOW_EXPONENT = 700.0


@dataclass(frozen=True)
class ChaosParams:
    """Chaos parameters: single-gamma or two-field mode, plus truncation.

    f is the test-function table on the full grid (zeros outside its
    support); supp(f) must sit inside D_eps for every eps in play.
    """

    f: np.ndarray
    mode: str = "single"
    gamma: complex = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    truncation: bool = False
    q: int = 1
    lam: float = 0.0

    def __post_init__(self):
        if self.mode not in ("single", "two-field"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.truncation and self.q < 1:
            raise ValueError("truncation level q must be >= 1")


@dataclass(frozen=True)
class ChaosValue:
    """One replica's chaos integral with its overflow/truncation state."""

    value: complex
    mode: str
    eps: float
    truncated: bool
    overflow: bool
    manifest: str


def wick_exp_flagged(u, z, v):
    """Wick exponential exp(u z - u^2 v / 2) with overflow saturation.

    Returns (values, overflow_mask); overflowing entries are set to 0 and
    flagged rather than propagating infinities.
    """
    u = complex(u)
    z = np.asarray(z)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("variance v must be nonnegative")
    expo = np.asarray(u * z - 0.5 * u * u * v, dtype=complex)
    mask = expo.real > OVERFLOW_EXPONENT
    safe = np.where(mask, 0.0, expo)
    vals = np.exp(safe)
    vals = np.where(mask, 0.0, vals)
    return vals, mask


def wick_exp(u, z, v):
    """Wick exponential exp(u z - u^2 v / 2); overflow saturates to 0."""
    vals, _ = wick_exp_flagged(u, z, v)
    return complex(vals) if vals.ndim == 0 else vals


def q0_for(f, grid):
    """Smallest q with supp(f) inside the shrunken domain D_{e^{-q}}."""
    f = np.asarray(f, dtype=float)
    support = np.flatnonzero(f != 0.0)
    if support.size == 0:
        raise ValueError("test function is identically zero")
    pts = grid.points[support]
    lo, hi = grid.box
    margin = min(float((pts - lo).min()), float((hi - pts).min()))
    if margin <= 0:
        raise ValueError("test function touches the boundary")
    return max(1, math.floor(math.log(2.0 / margin)) + 1)


def _field_rows(sample, eps):
    if eps not in sample.mollified:
        raise KeyError(f"mollified level eps={eps} missing from sample")
    return sample.mollified[eps], sample.mollified_rows[eps]


def _check_support(f, rows, grid):
    mask = np.ones(grid.n, dtype=bool)
    mask[rows] = False
    if np.any(f[mask] != 0.0):
        raise ValueError("test function support leaks outside D_eps")


def truncation_indicator(sample, q, lam, support_idx, variant="y"):
    """Barrier event indicators at the support points.

    Y-variant (default): A_{q,lam}(x) = [Y_k(x) <= k lam for all k in
    q..n_max], boundary inclusive.  X-variant replaces Y_k by the mollified
    field X_{e^{-k}} (levels must be present on the sample).  Returns
    (per_point bools, global conjunction).
    """
    if q > sample.n_max:
        raise ValueError(f"q={q} exceeds n_max={sample.n_max}")
    if q < 1:
        raise ValueError("q must be >= 1")
    idx = np.asarray(support_idx)
    ok = np.ones(idx.shape, dtype=bool)
    if variant == "y":
        y = sample.z[0].copy()
        for k in range(1, sample.n_max + 1):
            y += sample.z[k]
            if k >= q:
                ok &= y[idx] <= k * lam
    elif variant == "x":
        for k in range(q, sample.n_max + 1):
            eps_k = math.exp(-k)
            vals, rows = _field_rows(sample, eps_k)
            pos = np.searchsorted(rows, idx)
            if np.any(pos >= rows.size) or np.any(rows[np.minimum(pos, rows.size - 1)] != idx):
                raise ValueError(f"support point outside D_eps at level k={k}")
            ok &= vals[pos] <= k * lam
    else:
        raise ValueError(f"unknown truncation variant {variant!r}")
    return ok, bool(ok.all())


def _integrand(sample, params, eps, k_eps, sample2):
    x_eps, rows = _field_rows(sample, eps)
    _check_support(params.f, rows, sample.grid)
    k_eps = np.asarray(k_eps, dtype=float)
    if k_eps.shape != x_eps.shape:
        raise ValueError("K_eps table misaligned with the mollified field")
    if params.mode == "single":
        vals, mask = wick_exp_flagged(params.gamma, x_eps, k_eps)
    else:
        if sample2 is None:
            raise ValueError("two-field mode needs an independent second sample")
        y_eps, rows2 = _field_rows(sample2, eps)
        if not np.array_equal(rows, rows2):
            raise ValueError("second sample on mismatched rows")
        expo = (params.alpha * x_eps + 1j * params.beta * y_eps
                + 0.5 * (params.beta ** 2 - params.alpha ** 2) * k_eps)
        mask = expo.real > OVERFLOW_EXPONENT
        vals = np.exp(np.where(mask, 0.0, expo))
        vals = np.where(mask, 0.0, vals)
    return vals, mask, rows


def chaos_integral(sample, params, eps, k_eps, sample2=None):
    """Quadrature Sum wick(gamma, X_eps, K_eps) f w over the grid.

    k_eps is the variance table K_eps(x) aligned with the sample's
    mollified rows (the diagonal of the grid-rule kernel table).  In
    two-field mode the integrand is exp(alpha X + i beta X' + (beta^2 -
    alpha^2) K / 2) with an independent second sample.
    """
    vals, mask, rows = _integrand(sample, params, eps, k_eps, sample2)
    w = sample.grid.weight
    total = complex((vals * params.f[rows]).sum() * w)
    manifest = f"{sample.seed}:{sample.replica}:{sample.grid.digest()}"
    return ChaosValue(value=total, mode=params.mode, eps=float(eps),
                      truncated=False, overflow=bool(mask.any()),
                      manifest=manifest)


def truncated_chaos(sample, params, eps, k_eps, sample2=None, variant="y"):
    """Chaos integral with the per-point barrier indicator inserted.

    Equals the untruncated value exactly on every replica where the global
    event holds.
    """
    if not params.truncation:
        raise ValueError("params.truncation is not enabled")
    vals, mask, rows = _integrand(sample, params, eps, k_eps, sample2)
    keep, _ = truncation_indicator(sample, params.q, params.lam, rows, variant)
    w = sample.grid.weight
    total = complex((vals * keep * params.f[rows]).sum() * w)
    manifest = f"{sample.seed}:{sample.replica}:{sample.grid.digest()}"
    return ChaosValue(value=total, mode=params.mode, eps=float(eps),
                      truncated=True, overflow=bool(mask.any()),
                      manifest=manifest)


def sobolev_diag(density, grid, u):
    """Negative-index Sobolev mass Sum |M^(xi)|^2 (1+|xi|^2)^{-u} dxi.

    density is a (complex) field on the full grid, already multiplied by
    the smooth cutoff; the box is treated as a torus for the transform.
    Requires u > d/2 for the continuum weight to be integrable.
    """
    if grid.h is None:
        raise ValueError("sobolev_diag needs a regular grid")
    if u <= grid.d / 2.0:
        raise ValueError(f"u={u} must exceed d/2 = {grid.d / 2.0}")
    arr = np.asarray(density).reshape(grid.shape)
    h = grid.h
    m_hat = np.fft.fftn(arr) * (h ** grid.d)
    axes = [2.0 * np.pi * np.fft.fftfreq(nn, d=h) for nn in grid.shape]
    if grid.d == 1:
        xi2 = axes[0] ** 2
    else:
        xi2 = axes[0][:, None] ** 2 + axes[1][None, :] ** 2
    length = grid.box[1] - grid.box[0]
    dxi = (2.0 * np.pi / length) ** grid.d
    return float(((np.abs(m_hat) ** 2) * (1.0 + xi2) ** (-u)).sum() * dxi)


def bump_function(grid, center=None, radius=0.2, height=1.0):
    """Smooth compactly supported test function on the grid (tensor in d=2).

    The profile is exp(1 - 1/(1 - rho^2)) per axis, equal to `height` at the
    center and identically zero outside the radius.
    """
    pts = grid.points
    if center is None:
        center = [0.5 * (grid.box[0] + grid.box[1])] * grid.d
    center = np.atleast_1d(np.asarray(center, dtype=float))
    out = np.full(grid.n, float(height))
    for ax in range(grid.d):
        rho = (pts[:, ax] - center[ax]) / radius
        vals = np.zeros(grid.n)
        inside = np.abs(rho) < 1.0
        vals[inside] = np.exp(1.0 - 1.0 / (1.0 - rho[inside] ** 2))
        out *= vals
    return out
