"""Oracles and statistical checks for the chaos laboratory.

Everything Monte Carlo runs through a Bench: factor matrices, convolution
weights, and kernel tables are computed once, then replicas are processed
in the sampler's fixed blocks of 32.  Worker threads claim whole blocks and
results are assembled in block order, so every estimate is byte-identical
for any worker count.

Ladder cells for squared-difference quantities use median-of-means over 40
fixed replica blocks: |M_eps - M_eps'|^2 has a one-sided heavy tail in the
non-L2 subcritical phase (tail index d/alpha^2 < 2), so the plain mean is
noise-dominated at desk-scale R while the block median concentrates.
Moment estimates proper (means against analytic oracles) keep the plain
mean and the standard unbiased SE.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from . import kernels
from .chaos import OVERFLOW_EXPONENT
from .grids import Grid
from .mollifier import Mollifier, weight_matrix
from .phase import PhaseError
from .sampler import (BLOCK, TiltShift, block_z, increment_factors,
                      tilt_shift_rows)

ENV_WORKERS = "LOGCHAOS_WORKERS"

MOM_BLOCKS = 40
# sd of the median of n block means, relative to block sd: sqrt(pi/2)/sqrt(n)
_MEDIAN_FACTOR = math.sqrt(math.pi / 2.0)


def default_workers():
    return max(1, int(os.environ.get(ENV_WORKERS, "1")))


@dataclass(frozen=True)
class MomentEstimate:
    """Plain-mean Monte Carlo estimate with per-component SEs.

    z-scores are (estimate - oracle) / SE componentwise when an oracle is
    present; overflow-flagged replicas are excluded and counted.
    """

    estimator: str
    replicas: int
    estimate: complex
    se_re: float
    se_im: float
    oracle: complex | None = None
    z_re: float | None = None
    z_im: float | None = None
    excluded: int = 0

    @property
    def max_z(self):
        zs = [abs(z) for z in (self.z_re, self.z_im) if z is not None]
        return max(zs) if zs else None


def _component_z(diff, se, scale=0.0):
    # differences below float resolution carry no statistical meaning; this
    # happens in deterministic degenerate runs (gamma = 0) where the SE is
    # pure summation rounding
    if abs(diff) <= 16.0 * np.finfo(float).eps * scale:
        return 0.0
    if se > 0:
        return diff / se
    return math.copysign(math.inf, diff)


def moment_from_values(estimator, values, oracle=None, exclude=None):
    """Build a MomentEstimate from per-replica (complex) values."""
    values = np.asarray(values)
    excluded = 0
    if exclude is not None:
        excluded = int(np.count_nonzero(exclude))
        values = values[~np.asarray(exclude)]
    n = values.size
    if n < 2:
        raise ValueError("need at least two surviving replicas")
    est = complex(values.mean())
    se_re = float(values.real.std(ddof=1) / math.sqrt(n))
    se_im = float(values.imag.std(ddof=1) / math.sqrt(n))
    z_re = z_im = None
    if oracle is not None:
        oracle = complex(oracle)
        z_re = _component_z(est.real - oracle.real, se_re,
                            max(abs(est.real), abs(oracle.real)))
        z_im = _component_z(est.imag - oracle.imag, se_im,
                            max(abs(est.imag), abs(oracle.imag)))
    return MomentEstimate(estimator=estimator, replicas=n, estimate=est,
                          se_re=se_re, se_im=se_im, oracle=oracle,
                          z_re=z_re, z_im=z_im, excluded=excluded)


@dataclass(frozen=True)
class LadderReport:
    """Ladder of nonnegative cells with a decreasing-within-noise verdict.

    Cells are median-of-means over MOM_BLOCKS fixed replica blocks;
    consecutive differences carry SEs from the paired per-block means.
    Verdict rule: every consecutive difference is negative or within 2 SE
    of zero, and the last cell is below half the first (an all-zero ladder
    counts as converged).
    """

    estimator: str
    steps: tuple
    values: tuple
    ses: tuple
    diffs: tuple
    diff_ses: tuple
    verdict: bool
    excluded: int = 0


def trend_verdict(values, diff_ses):
    values = np.asarray(values, dtype=float)
    diffs = np.diff(values)
    for d, se in zip(diffs, diff_ses):
        if d >= 0 and abs(d) > 2.0 * se:
            return False
    if values[0] == 0.0 and values[-1] == 0.0:
        return True
    return values[-1] < 0.5 * values[0]


def _mom_blocks(values, keep):
    """Per-block means of one cell's replica values; NaN for empty blocks."""
    r = values.shape[-1]
    bins = np.array_split(np.arange(r), MOM_BLOCKS)
    out = np.full(MOM_BLOCKS, np.nan)
    for b, idx in enumerate(bins):
        k = keep[idx]
        if k.any():
            out[b] = values[idx][k].mean()
    return out


def ladder_from_values(estimator, steps, values, keep=None):
    """Median-of-means ladder cells plus paired-difference SEs and verdict.

    values has shape (cells, R); keep marks surviving replicas per cell.
    """
    values = np.asarray(values, dtype=float)
    c, r = values.shape
    if keep is None:
        keep = np.ones_like(values, dtype=bool)
    bm = np.stack([_mom_blocks(values[i], keep[i]) for i in range(c)])
    counts = np.sum(np.isfinite(bm), axis=1)
    cells = np.nanmedian(bm, axis=1)
    ses = _MEDIAN_FACTOR * np.nanstd(bm, axis=1, ddof=1) / np.sqrt(counts)
    paired = np.diff(bm, axis=0)
    diff_counts = np.sum(np.isfinite(paired), axis=1)
    diff_ses = _MEDIAN_FACTOR * np.nanstd(paired, axis=1, ddof=1) / np.sqrt(diff_counts)
    verdict = trend_verdict(cells, diff_ses)
    return LadderReport(estimator=estimator, steps=tuple(steps),
                        values=tuple(float(v) for v in cells),
                        ses=tuple(float(s) for s in ses),
                        diffs=tuple(float(d) for d in np.diff(cells)),
                        diff_ses=tuple(float(s) for s in diff_ses),
                        verdict=bool(verdict),
                        excluded=int((~keep).sum()))


class Bench:
    """Shared immutable state for block-deterministic Monte Carlo runs.

    One Bench per (spec, grid, n_max).  Convolution weights, support-row
    restrictions of them, and kernel-table diagonals are cached per
    (mollifier channel, eps).  The summed level Gram g_total makes every
    grid-rule kernel quantity a couple of matrix products.
    """

    def __init__(self, spec, grid, n_max, f=None, mol=None):
        self.spec = spec
        self.grid = grid
        self.n_max = int(n_max)
        self.f = None if f is None else np.asarray(f, dtype=float)
        self.factors = increment_factors(spec, grid, n_max)
        g = kernels.gram(spec, 0, grid)
        for k in range(1, n_max + 1):
            g += kernels.gram(spec, k, grid)
        self.g_total = g
        self.channels = {"main": mol if mol is not None else Mollifier(d=spec.d)}
        self.supp = None if self.f is None else np.flatnonzero(self.f != 0.0)
        self.shifts = None
        self.tilt = None
        self._weights = {}
        self._supp_tables = {}

    def add_channel(self, name, mol):
        self.channels[name] = mol

    def set_tilt(self, tilt, nodes=32):
        self.tilt = tilt
        if tilt is None or tilt.alpha == 0.0:
            self.shifts = None
        else:
            self.shifts = tilt_shift_rows(self.spec, self.grid, tilt,
                                          self.n_max, self.channels["main"],
                                          nodes=nodes)

    def weights(self, channel, eps):
        key = (channel, float(eps))
        if key not in self._weights:
            rows, w = weight_matrix(self.grid, self.channels[channel], eps)
            self._weights[key] = (rows, w)
        return self._weights[key]

    def supp_tables(self, channel, eps):
        """(W_supp, k_diag_supp, pos) on the test-function support rows."""
        key = (channel, float(eps))
        if key not in self._supp_tables:
            if self.supp is None:
                raise ValueError("bench has no test function")
            rows, w = self.weights(channel, eps)
            pos = np.searchsorted(rows, self.supp)
            if np.any(pos >= rows.size) or not np.array_equal(rows[np.minimum(pos, rows.size - 1)], self.supp):
                raise ValueError(f"test function support leaks outside D_eps at eps={eps}")
            w_supp = w[pos]
            k_diag = np.einsum("ij,jk,ik->i", w_supp, self.g_total, w_supp,
                               optimize=True)
            self._supp_tables[key] = (w_supp, k_diag, pos)
        return self._supp_tables[key]

    def cross_table(self, channel, eps, channel2, eps2):
        """K_{eps,eps2} on support x support rows (grid rule, exact)."""
        wa, _, _ = self.supp_tables(channel, eps)
        wb, _, _ = self.supp_tables(channel2, eps2)
        return wa @ self.g_total @ wb.T

    def map_blocks(self, seed, replicas, consume, workers=None):
        """Run consume(start, z_block) over all blocks; fixed-order assembly.

        consume returns a tuple of arrays with trailing axis BLOCK; the
        concatenated arrays are trimmed to the replica budget.
        """
        workers = workers if workers is not None else default_workers()
        starts = list(range(0, replicas, BLOCK))
        outs = [None] * len(starts)

        def work(i):
            z = block_z(self.spec, self.grid, self.factors, seed, starts[i],
                        self.n_max, self.shifts)
            outs[i] = consume(starts[i], z)

        if workers <= 1:
            for i in range(len(starts)):
                work(i)
        else:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                list(ex.map(work, range(len(starts))))
        parts = len(outs[0])
        return tuple(np.concatenate([o[j] for o in outs], axis=-1)[..., :replicas]
                     for j in range(parts))


def _wick_block(gamma, x, k_diag):
    """Wick factors for a (S, B) field block; returns values and overflow."""
    expo = gamma * x - 0.5 * gamma * gamma * k_diag[:, None]
    mask = expo.real > OVERFLOW_EXPONENT
    vals = np.exp(np.where(mask, 0.0, expo))
    return np.where(mask, 0.0, vals), mask.any(axis=0)


def _event_block(z, supp, q, lam, n_max):
    """Per-point barrier indicators on the support rows for one block."""
    y = np.cumsum(z[:, supp, :], axis=0)
    ok = np.ones((supp.size, z.shape[2]), dtype=bool)
    for k in range(q, n_max + 1):
        ok &= y[k] <= k * lam
    return ok


def _chaos_values_consume(bench, params, eps_list, channel="main",
                          trunc=None):
    """Build a consume closure returning per-eps chaos values and flags."""
    tabs = [bench.supp_tables(channel, eps) for eps in eps_list]
    f_supp = bench.f[bench.supp]
    wgt = bench.grid.weight
    gamma = params.gamma

    def consume(start, z):
        y_top = z.sum(axis=0)
        ind = None
        if trunc is not None:
            q, lam = trunc
            ind = _event_block(z, bench.supp, q, lam, bench.n_max)
        vals = np.empty((len(eps_list), z.shape[2]), dtype=complex)
        ovf = np.zeros((len(eps_list), z.shape[2]), dtype=bool)
        for i, (w_supp, k_diag, _) in enumerate(tabs):
            x = w_supp @ y_top
            wick, flag = _wick_block(gamma, x, k_diag)
            if ind is not None:
                wick = wick * ind
            vals[i] = (wick * f_supp[:, None]).sum(axis=0) * wgt
            ovf[i] = flag
        return vals, ovf

    return consume


def second_moment_oracle(spec, gamma, eps, eps_prime, f, grid, mol=None,
                         n_levels=None, rule="grid"):
    """Quadrature oracle for E[M_eps conj(M_eps')].

    Sum_{x,y} exp(|gamma|^2 K_{eps,eps'}(x,y)) f(x) f(y) w^2, finite because
    the mollified kernel is bounded.  With the grid rule and n_levels equal
    to the sampler's level count this is exact for the sampled fields.
    """
    mol = mol if mol is not None else Mollifier(d=spec.d)
    table = kernels.mollified_table(spec, grid, eps, eps_prime, mol=mol,
                                    rule=rule, n_levels=n_levels)
    f = np.asarray(f, dtype=float)
    mask = np.ones(grid.n, dtype=bool)
    mask[table.rows] = False
    if np.any(f[mask] != 0.0):
        raise ValueError("test function support leaks outside D_eps")
    mask[:] = True
    mask[table.rows_prime] = False
    if np.any(f[mask] != 0.0):
        raise ValueError("test function support leaks outside D_eps'")
    g2 = abs(complex(gamma)) ** 2
    fa = f[table.rows]
    fb = f[table.rows_prime]
    w = grid.weight
    return float(fa @ np.exp(g2 * table.values) @ fb * w * w)


def mc_moment(bench, params, estimand, eps, eps_prime=None, replicas=1000,
              seed=0, workers=None, trunc=None):
    """Seeded Monte Carlo estimate of one chaos moment.

    estimand: "mean" (E[M], oracle int f), "product" (E[M conj(M')], oracle
    from second_moment_oracle in single mode), "distance2" (E|M - M'|^2,
    oracle by expanding the square), or "event" (P[global barrier event],
    needs trunc=(q, lam)).
    """
    if estimand == "event":
        if trunc is None:
            raise ValueError("event estimand needs trunc=(q, lam)")
        q, lam = trunc

        def consume(start, z):
            ok = _event_block(z, bench.supp, q, lam, bench.n_max)
            return (ok.all(axis=0).astype(float),)

        (ind,) = bench.map_blocks(seed, replicas, consume, workers)
        return moment_from_values(f"P[event q={q}]", ind, oracle=None)

    pair = estimand in ("product", "distance2")
    eps_list = [eps, eps_prime] if pair else [eps]
    if pair and eps_prime is None:
        raise ValueError(f"estimand {estimand} needs eps_prime")
    consume = _chaos_values_consume(bench, params, eps_list, trunc=trunc)
    vals, ovf = bench.map_blocks(seed, replicas, consume, workers)
    if estimand == "mean":
        oracle = complex(bench.f.sum() * bench.grid.weight)
        return moment_from_values(f"E[M] eps={eps}", vals[0], oracle=oracle,
                                  exclude=ovf[0])
    gamma = params.gamma
    drop = ovf.any(axis=0)
    if estimand == "product":
        prod = vals[0] * np.conj(vals[1])
        oracle = None
        if params.mode == "single" and trunc is None:
            oracle = second_moment_oracle(bench.spec, gamma, eps, eps_prime,
                                          bench.f, bench.grid,
                                          mol=bench.channels["main"],
                                          n_levels=bench.n_max)
        return moment_from_values(f"E[M Mbar'] {eps}x{eps_prime}", prod,
                                  oracle=oracle, exclude=drop)
    if estimand == "distance2":
        d2 = np.abs(vals[0] - vals[1]) ** 2
        oracle = None
        if params.mode == "single" and trunc is None:
            paa = second_moment_oracle(bench.spec, gamma, eps, eps,
                                       bench.f, bench.grid,
                                       mol=bench.channels["main"],
                                       n_levels=bench.n_max)
            pbb = second_moment_oracle(bench.spec, gamma, eps_prime, eps_prime,
                                       bench.f, bench.grid,
                                       mol=bench.channels["main"],
                                       n_levels=bench.n_max)
            pab = second_moment_oracle(bench.spec, gamma, eps, eps_prime,
                                       bench.f, bench.grid,
                                       mol=bench.channels["main"],
                                       n_levels=bench.n_max)
            oracle = paa + pbb - 2.0 * pab
        return moment_from_values(f"E|M-M'|^2 {eps}x{eps_prime}", d2,
                                  oracle=oracle, exclude=drop)
    raise ValueError(f"unknown estimand {estimand!r}")


def cauchy_ladder(bench, params, eps_ladder, replicas, seed, workers=None):
    """Coupled E|M_{eps,q} - M_{eps',q}|^2 down the ladder.

    Consecutive-pair cells from the same underlying increments; truncation
    per params (enabled outside the L2 region, with params.q, params.lam).
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if any(a <= b for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    trunc = (params.q, params.lam) if params.truncation else None
    consume = _chaos_values_consume(bench, params, eps_ladder, trunc=trunc)
    vals, ovf = bench.map_blocks(seed, replicas, consume, workers)
    pairs = list(zip(eps_ladder, eps_ladder[1:]))
    d2 = np.stack([np.abs(vals[i] - vals[i + 1]) ** 2 for i in range(len(pairs))])
    keep = np.stack([~(ovf[i] | ovf[i + 1]) for i in range(len(pairs))])
    name = "cauchy" + (" truncated" if params.truncation else "")
    return ladder_from_values(name, pairs, d2, keep)


def mollifier_independence(bench, params, eps_ladder, replicas, seed,
                           alt="alt", workers=None):
    """Coupled E|M_eps^theta - M_eps^theta'|^2 per ladder entry.

    Both convolutions act on the same partial sum; each chaos value is
    Wick-normalized by its own channel's variance table.
    """
    if alt not in bench.channels:
        raise ValueError(f"bench is missing mollifier channel {alt!r}")
    eps_ladder = [float(e) for e in eps_ladder]
    tabs_a = [bench.supp_tables("main", eps) for eps in eps_ladder]
    tabs_b = [bench.supp_tables(alt, eps) for eps in eps_ladder]
    f_supp = bench.f[bench.supp]
    wgt = bench.grid.weight
    gamma = params.gamma
    trunc = (params.q, params.lam) if params.truncation else None

    def consume(start, z):
        y_top = z.sum(axis=0)
        ind = 1.0
        if trunc is not None:
            ind = _event_block(z, bench.supp, trunc[0], trunc[1], bench.n_max)
        d2 = np.empty((len(eps_ladder), z.shape[2]))
        keep = np.ones((len(eps_ladder), z.shape[2]), dtype=bool)
        for i in range(len(eps_ladder)):
            wa, ka, _ = tabs_a[i]
            wb, kb, _ = tabs_b[i]
            va, fa = _wick_block(gamma, wa @ y_top, ka)
            vb, fb = _wick_block(gamma, wb @ y_top, kb)
            ma = (va * ind * f_supp[:, None]).sum(axis=0) * wgt
            mb = (vb * ind * f_supp[:, None]).sum(axis=0) * wgt
            d2[i] = np.abs(ma - mb) ** 2
            keep[i] = ~(fa | fb)
        return d2, keep

    d2, keep = bench.map_blocks(seed, replicas, consume, workers)
    return ladder_from_values("mollifier independence", eps_ladder, d2, keep)


@dataclass(frozen=True)
class KernelEstimateReport:
    """Suprema of a kernel-gap quantity along a refinement ladder."""

    kind: str
    steps: tuple
    suprema: tuple
    ratios: tuple
    stable: bool


def kernel_estimate_check(spec, kind, grid, mol=None, eps_ladder=(),
                          n_ladder=(), eps_fixed=None, rule="midpoint",
                          log_floor=True, nodes=32):
    """Empirical suprema of the kernel-estimate gaps, with stability verdict.

    kind "mollified": per eps rung, sup over grid pairs of
    |K_{eps,eps'}(x,y) - log(1/(|x-y| v eps v eps'))| for eps' in {eps, next
    rung}.  kind "partial": per level rung n at fixed eps, sup of
    |K_{n,eps,eps}(x,y) - min(log 1/|x-y|, log 1/eps, n)|.  Stability =
    consecutive suprema within a factor 1.5.  log_floor=False drops the log
    comparison term (degenerate-kernel calibration).
    """
    mol = mol if mol is not None else Mollifier(d=spec.d)

    def gap_table(eps, eps2, n_levels, cap=None):
        table = kernels.mollified_table(spec, grid, eps, eps2, mol=mol,
                                        rule=rule, n_levels=n_levels,
                                        nodes=nodes)
        pa = grid.points[table.rows]
        pb = grid.points[table.rows_prime]
        r = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=-1))
        if not log_floor:
            ref = 0.0
        elif cap is None:
            ref = -np.log(np.maximum(r, max(eps, eps2)))
        else:
            with np.errstate(divide="ignore"):
                ref = np.minimum(np.where(r > 0, -np.log(np.where(r > 0, r, 1.0)), np.inf),
                                 min(-math.log(eps), cap))
        return float(np.abs(table.values - ref).max())

    sups = []
    if kind == "mollified":
        steps = [float(e) for e in eps_ladder]
        for i, eps in enumerate(steps):
            worst = gap_table(eps, eps, None)
            if i + 1 < len(steps):
                worst = max(worst, gap_table(eps, steps[i + 1], None))
            sups.append(worst)
    elif kind == "partial":
        if eps_fixed is None:
            raise ValueError("kind 'partial' needs eps_fixed")
        steps = [int(n) for n in n_ladder]
        for n in steps:
            sups.append(gap_table(eps_fixed, eps_fixed, n, cap=float(n)))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    ratios = [sups[i + 1] / sups[i] for i in range(len(sups) - 1)] if len(sups) > 1 else []
    stable = all(q <= 1.5 for q in ratios)
    return KernelEstimateReport(kind=kind, steps=tuple(steps),
                                suprema=tuple(sups), ratios=tuple(ratios),
                                stable=stable)


@dataclass(frozen=True)
class TailBoundReport:
    """Exact Gaussian tails against the corrected two-sided bound."""

    rows: tuple            # (sigma, u, exact, bound, holds)
    all_hold: bool
    literal_exact: float   # exact tail at (sigma=1, u=3)
    literal_bound: float   # the uncorrected bound 2 exp(-u^2/sigma^2) there
    literal_violated: bool


def tail_bound_check(sigmas=(0.5, 1.0, 2.0, 4.0), u_over_sigma=(0, 1, 2, 3, 4, 5)):
    """Tabulate the upper Gaussian tail against 2 exp(-u^2 / (2 sigma^2)).

    The exact tail is (1/sqrt(2 pi) sigma) int_u^inf e^{-x^2/(2 sigma^2)} dx
    = erfc(u / (sigma sqrt 2)) / 2.  With the exponent u^2/(2 sigma^2) the
    bound holds everywhere; with the uncorrected exponent u^2/sigma^2 it
    fails at (sigma=1, u=3), where the exact tail 1.35e-3 exceeds
    2 e^{-9} = 2.47e-4.  Both facts are recorded.
    """
    rows = []
    all_hold = True
    for s in sigmas:
        for k in u_over_sigma:
            u = k * s
            exact = 0.5 * float(erfc(u / (s * math.sqrt(2.0))))
            bound = 2.0 * math.exp(-u * u / (2.0 * s * s))
            holds = exact <= bound
            all_hold &= holds
            rows.append((float(s), float(u), exact, bound, holds))
    lit_exact = 0.5 * float(erfc(3.0 / math.sqrt(2.0)))
    lit_bound = 2.0 * math.exp(-9.0)
    return TailBoundReport(rows=tuple(rows), all_hold=all_hold,
                           literal_exact=lit_exact, literal_bound=lit_bound,
                           literal_violated=lit_exact > lit_bound)


@dataclass(frozen=True)
class SupFieldReport:
    """Barrier exceedance and global-event probabilities with trend fits."""

    lam: float
    ks: tuple
    k_probs: tuple          # MomentEstimate per k
    slope: float
    slope_se: float
    decay_ok: bool          # slope + 2 SE < 0 over the nonzero cells
    qs: tuple
    q_probs: tuple          # MomentEstimate per q
    q_increasing: bool
    q_final: float


def _ls_fit(xs, ys):
    """Least-squares slope with its SE; needs >= 3 points for the SE."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = xs.size
    a = np.vstack([np.ones(n), xs]).T
    coef, res, _, _ = np.linalg.lstsq(a, ys, rcond=None)
    if n > 2 and res.size:
        sigma2 = float(res[0]) / (n - 2)
        cov = sigma2 * np.linalg.inv(a.T @ a)
        return float(coef[1]), float(math.sqrt(cov[1, 1]))
    return float(coef[1]), float("nan")


def sup_field_prob(bench, lam, ks, qs, replicas, seed, workers=None):
    """P(sup over support of Y_k > lam k) per k, and P[global event] per q.

    Events are evaluated on the shared replica set, so the q-ladder of
    global-event probabilities is exactly monotone samplewise.  Requires
    lam > sqrt(2d) (the barrier regime where the decay argument applies).
    """
    if lam <= math.sqrt(2.0 * bench.spec.d):
        raise ValueError(f"lam={lam} must exceed sqrt(2d)")
    ks = [int(k) for k in ks]
    qs = [int(q) for q in qs]
    if max(ks + qs) > bench.n_max:
        raise ValueError("k or q ladder exceeds n_max")
    supp = bench.supp

    def consume(start, z):
        y = np.cumsum(z[:, supp, :], axis=0)
        exceed = np.stack([(y[k].max(axis=0) > lam * k).astype(float) for k in ks])
        below = y <= lam * np.arange(z.shape[0])[:, None, None]
        ok_all = np.stack([below[q:].all(axis=(0, 1)).astype(float) for q in qs])
        return exceed, ok_all

    exceed, ok_all = bench.map_blocks(seed, replicas, consume, workers)
    k_probs = [moment_from_values(f"P[sup Y_{k} > {lam}k]", exceed[i])
               for i, k in enumerate(ks)]
    q_probs = [moment_from_values(f"P[event q={q}]", ok_all[i])
               for i, q in enumerate(qs)]
    counts = exceed.sum(axis=1)
    live = counts > 0
    xs = np.asarray(ks, dtype=float)[live]
    ys = np.log(np.asarray([p.estimate.real for p in k_probs])[live])
    slope, slope_se = _ls_fit(xs, ys)
    decay_ok = bool(live.sum() >= 3 and slope + 2.0 * slope_se < 0.0)
    q_vals = [p.estimate.real for p in q_probs]
    q_increasing = all(b >= a for a, b in zip(q_vals, q_vals[1:]))
    return SupFieldReport(lam=float(lam), ks=tuple(ks), k_probs=tuple(k_probs),
                          slope=slope, slope_se=slope_se, decay_ok=decay_ok,
                          qs=tuple(qs), q_probs=tuple(q_probs),
                          q_increasing=bool(q_increasing),
                          q_final=float(q_vals[-1]) if q_vals else float("nan"))


@dataclass(frozen=True)
class TiltedEventReport:
    """Tilted barrier-event probabilities across a separation ladder."""

    separations: tuple
    estimates: tuple        # MomentEstimate per separation
    slope: float
    slope_se: float
    exponent_target: float  # (2 alpha - lam)^2 / 2
    one_sided_ok: bool      # slope >= target - 0.3


def tilted_event_prob(spec, separations, eps, eps_prime, q, lam, alpha,
                      n_max, replicas, seed, center=0.5, mol=None,
                      workers=None):
    """P-tilde[A_q(x, y)] under the two-point Cameron-Martin tilt.

    For each separation s the field is sampled jointly at x = center - s/2,
    y = center + s/2 with the alpha-tilt toward both points, and the event
    {Y_k(x) <= k lam and Y_k(y) <= k lam for all k in q..n_max} is counted.
    The log-probability is then regressed on log(s v eps); the decay
    exponent should dominate (2 alpha - lam)^2 / 2 - 0.3 one-sidedly.
    """
    if len(separations) < 4:
        raise ValueError("exponent fits need at least 4 separations")
    if not q >= 1 or q > n_max:
        raise ValueError(f"q={q} outside 1..{n_max}")
    if lam <= math.sqrt(2.0 * spec.d):
        raise PhaseError(f"lam={lam} must exceed sqrt(2d)")
    mol = mol if mol is not None else Mollifier(d=spec.d)
    estimates = []
    for si, s in enumerate(separations):
        x, y = center - 0.5 * s, center + 0.5 * s
        grid2 = Grid.from_points(np.array([[x], [y]]), spec.box)
        bench = Bench(spec, grid2, n_max, mol=mol)
        bench.set_tilt(TiltShift(x=x, y=y, eps=eps, eps_prime=eps_prime,
                                 alpha=alpha))

        def consume(start, z):
            ycum = np.cumsum(z, axis=0)
            ok = np.ones((2, z.shape[2]), dtype=bool)
            for k in range(q, n_max + 1):
                ok &= ycum[k] <= k * lam
            return (ok.all(axis=0).astype(float),)

        (ind,) = bench.map_blocks(seed + si, replicas, consume, workers)
        estimates.append(moment_from_values(f"P~[A_{q}] sep={s}", ind))
    xs = np.log(np.maximum(np.asarray(separations, dtype=float), eps))
    probs = np.asarray([max(e.estimate.real, 0.5 / replicas) for e in estimates])
    slope, slope_se = _ls_fit(xs, np.log(probs))
    target = 0.5 * (2.0 * alpha - lam) ** 2
    return TiltedEventReport(separations=tuple(float(s) for s in separations),
                             estimates=tuple(estimates), slope=slope,
                             slope_se=slope_se, exponent_target=target,
                             one_sided_ok=bool(slope >= target - 0.3))


def field_stats(bench, ns, n_probes, eps, eps_prime, replicas, seed,
                workers=None):
    """Covariance-fidelity estimates against exact kernel oracles.

    Var(Y_n(x)) at a center point for each n (oracle Q_0 + n), plus
    Cov(X_eps(x), X_eps'(y)) on n_probes seeded random support pairs
    (oracle: grid-rule cross table).
    """
    rng = np.random.default_rng([seed, 424242])
    wa, _, pos_a = bench.supp_tables("main", eps)
    wb, _, pos_b = bench.supp_tables("main", eps_prime)
    cross = bench.cross_table("main", eps, "main", eps_prime)
    s = bench.supp.size
    probes = np.stack([rng.integers(0, s, n_probes),
                       rng.integers(0, s, n_probes)])
    mid = s // 2

    def consume(start, z):
        ysum = np.cumsum(z[:, bench.supp, :], axis=0)
        var_rows = np.stack([ysum[n][mid] ** 2 for n in ns])
        xa = wa @ z.sum(axis=0)
        xb = wb @ z.sum(axis=0)
        prods = np.stack([xa[probes[0, j]] * xb[probes[1, j]]
                          for j in range(n_probes)])
        return var_rows, prods

    var_rows, prods = bench.map_blocks(seed, replicas, consume, workers)
    out = []
    for i, n in enumerate(ns):
        oracle = bench.spec.q0_value + n
        out.append(moment_from_values(f"Var(Y_{n})", var_rows[i], oracle=oracle))
    for j in range(n_probes):
        oracle = cross[probes[0, j], probes[1, j]]
        out.append(moment_from_values(f"Cov(X,X') probe {j}", prods[j],
                                      oracle=oracle))
    return out


def sobolev_ladder(bench, params, u, eps_ladder, replicas, seed,
                   workers=None):
    """H^{-u} distance between consecutive chaos densities, per replica.

    The density at level eps is the Wick integrand times the test function
    (times the barrier indicator when truncation is on), placed on the full
    periodized grid; consecutive-pair squared distances feed the usual
    ladder machinery.
    """
    grid = bench.grid
    if u <= grid.d / 2.0:
        raise ValueError(f"u={u} must exceed d/2")
    if grid.d != 1:
        raise NotImplementedError("density ladder is wired for d=1 grids")
    eps_ladder = [float(e) for e in eps_ladder]
    tabs = [bench.supp_tables("main", eps) for eps in eps_ladder]
    f_supp = bench.f[bench.supp]
    gamma = params.gamma
    trunc = (params.q, params.lam) if params.truncation else None
    h = grid.h
    xi = 2.0 * np.pi * np.fft.fftfreq(grid.shape[0], d=h)
    weight = (1.0 + xi ** 2) ** (-u)
    length = grid.box[1] - grid.box[0]
    dxi = (2.0 * np.pi / length) ** grid.d

    def consume(start, z):
        y_top = z.sum(axis=0)
        ind = 1.0
        if trunc is not None:
            ind = _event_block(z, bench.supp, trunc[0], trunc[1], bench.n_max)
        dens = np.zeros((len(eps_ladder), grid.n, z.shape[2]), dtype=complex)
        keep = np.ones((len(eps_ladder), z.shape[2]), dtype=bool)
        for i, (w_supp, k_diag, _) in enumerate(tabs):
            wick, flag = _wick_block(gamma, w_supp @ y_top, k_diag)
            dens[i, bench.supp, :] = wick * ind * f_supp[:, None]
            keep[i] = ~flag
        out = np.empty((len(eps_ladder) - 1, z.shape[2]))
        kout = np.empty((len(eps_ladder) - 1, z.shape[2]), dtype=bool)
        for i in range(len(eps_ladder) - 1):
            diff = dens[i] - dens[i + 1]
            m_hat = np.fft.fft(diff, axis=0) * (h ** grid.d)
            out[i] = ((np.abs(m_hat) ** 2) * weight[:, None]).sum(axis=0) * dxi
            kout[i] = keep[i] & keep[i + 1]
        return out, kout

    d2, keep = bench.map_blocks(seed, replicas, consume, workers)
    pairs = list(zip(eps_ladder, eps_ladder[1:]))
    return ladder_from_values(f"sobolev u={u}", pairs, d2, keep)
