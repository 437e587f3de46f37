import math

import numpy as np
import pytest

from logchaos import (Bench, ChaosParams, Grid, KernelSpec, Mollifier,
                      PhaseError, bump_function, cauchy_ladder, field_stats,
                      kernel_estimate_check, ladder_from_values, mc_moment,
                      moment_from_values, mollifier_independence,
                      sample_increments, second_moment_oracle, sobolev_ladder,
                      sup_field_prob, tail_bound_check, tilted_event_prob,
                      trend_verdict)

SPEC = KernelSpec(d=1)
GRID = Grid.regular((0.0, 1.0), 128)
F = bump_function(GRID, center=0.5, radius=0.2)


def small_bench(n_max=7, f=F, grid=GRID):
    return Bench(SPEC, grid, n_max, f=f)


class TestMomentEstimate:
    def test_moments_and_se(self):
        vals = np.array([1.0, 2.0, 3.0, 4.0])
        m = moment_from_values("t", vals)
        assert m.estimate == 2.5 + 0j
        assert abs(m.se_re - vals.std(ddof=1) / 2.0) < 1e-15
        assert m.se_im == 0.0
        assert m.oracle is None and m.max_z is None

    def test_z_scores(self):
        vals = np.array([1.0, 2.0, 3.0, 4.0])
        m = moment_from_values("t", vals, oracle=2.0)
        assert abs(m.z_re - 0.5 / m.se_re) < 1e-12
        assert m.z_im == 0.0, "zero imag diff with zero imag SE is z=0"

    def test_exclusion(self):
        vals = np.array([1.0, 1.0, 1.0, 500.0])
        m = moment_from_values("t", vals, exclude=np.array([0, 0, 0, 1],
                                                           dtype=bool))
        assert m.excluded == 1
        assert m.replicas == 3
        assert m.estimate == 1.0 + 0j
        assert m.se_re == 0.0

    def test_degenerate_se_infinite_z(self):
        m = moment_from_values("t", np.array([2.0, 2.0]), oracle=1.0)
        assert math.isinf(m.z_re) and m.z_re > 0

    def test_too_few_survivors(self):
        with pytest.raises(ValueError):
            moment_from_values("t", np.array([1.0]))


class TestTrendVerdict:
    def test_clean_decrease(self):
        assert trend_verdict([1.0, 0.6, 0.3], [0.01, 0.01])

    def test_noise_bump_tolerated(self):
        # one small up-step within 2 SE does not spoil the verdict
        assert trend_verdict([1.0, 0.4, 0.41, 0.2], [0.02, 0.02, 0.02])

    def test_significant_increase_fails(self):
        assert not trend_verdict([1.0, 0.4, 0.9, 0.2], [0.02, 0.02, 0.02])

    def test_weak_total_decay_fails(self):
        assert not trend_verdict([1.0, 0.9, 0.8, 0.6], [1.0, 1.0, 1.0])

    def test_all_zero_ladder_converged(self):
        assert trend_verdict([0.0, 0.0, 0.0], [0.0, 0.0])

    def test_ladder_from_values_shapes(self):
        vals = np.abs(np.random.default_rng(0).standard_normal((3, 400)))
        vals[1] *= 0.5
        vals[2] *= 0.2
        rep = ladder_from_values("t", [(1, 2), (2, 3), (3, 4)], vals)
        assert len(rep.values) == 3
        assert len(rep.diffs) == 2 and len(rep.diff_ses) == 2
        assert rep.verdict


class TestSecondMomentOracle:
    def test_gamma_zero(self):
        val = second_moment_oracle(SPEC, 0.0, 2 ** -4, 2 ** -4, F, GRID)
        target = (F.sum() * GRID.weight) ** 2
        assert abs(val - target) < 1e-12

    def test_degenerate_zero_kernel(self):
        # truncating the level sum at 0 with the zero smooth part kills K
        val = second_moment_oracle(SPEC, 0.8, 2 ** -4, 2 ** -4, F, GRID,
                                   n_levels=0)
        target = (F.sum() * GRID.weight) ** 2
        assert abs(val - target) < 1e-12

    def test_support_violation(self):
        with pytest.raises(ValueError):
            second_moment_oracle(SPEC, 0.5, 2 ** -4, 2 ** -4,
                                 np.ones(GRID.n), GRID)

    def test_complex_gamma_uses_modulus(self):
        a = second_moment_oracle(SPEC, 0.5 + 0.5j, 2 ** -4, 2 ** -4, F, GRID)
        b = second_moment_oracle(SPEC, math.sqrt(0.5), 2 ** -4, 2 ** -4, F,
                                 GRID)
        assert abs(a - b) < 1e-12, "oracle depends on gamma only through |gamma|^2"


class TestBench:
    def test_block_determinism_across_workers(self):
        bench = small_bench()
        params = ChaosParams(f=F, gamma=0.6)
        a = mc_moment(bench, params, "mean", 2 ** -4, replicas=100, seed=5,
                      workers=1)
        b = mc_moment(bench, params, "mean", 2 ** -4, replicas=100, seed=5,
                      workers=3)
        assert a.estimate == b.estimate, "worker count leaked into bytes"
        assert a.se_re == b.se_re

    def test_support_leak_rejected(self):
        bench = Bench(SPEC, GRID, 7, f=np.ones(GRID.n))
        with pytest.raises(ValueError):
            bench.supp_tables("main", 2 ** -4)

    def test_cross_table_matches_variance_diag(self):
        bench = small_bench()
        _, k_diag, _ = bench.supp_tables("main", 2 ** -4)
        cross = bench.cross_table("main", 2 ** -4, "main", 2 ** -4)
        assert np.abs(np.diag(cross) - k_diag).max() < 1e-12

    def test_channels(self):
        bench = small_bench()
        bench.add_channel("alt", Mollifier(d=1, profile="quartic"))
        wa, _, _ = bench.supp_tables("main", 2 ** -4)
        wb, _, _ = bench.supp_tables("alt", 2 ** -4)
        assert wa.shape == wb.shape
        assert np.abs(wa - wb).max() > 1e-3, "profiles must differ"


class TestMcMoment:
    def test_mean_gamma_zero_exact(self):
        bench = small_bench()
        m = mc_moment(bench, ChaosParams(f=F, gamma=0.0), "mean", 2 ** -4,
                      replicas=50, seed=0)
        # every replica integrates the same constant, so the spread is pure
        # summation rounding (np.std of a constant array is ulp-level, not 0)
        assert m.se_re < 1e-15 and m.se_im < 1e-15
        assert m.excluded == 0
        assert abs(m.estimate - m.oracle) < 5e-14
        assert m.max_z == 0.0, "ulp-level gaps must not register as z-failures"

    def test_mean_identity_z_gate(self):
        bench = small_bench()
        m = mc_moment(bench, ChaosParams(f=F, gamma=0.5), "mean", 2 ** -4,
                      replicas=1500, seed=1)
        assert m.max_z is not None and m.max_z <= 4.0, f"z = {m.max_z}"

    def test_product_oracle_z_gate(self):
        bench = small_bench()
        m = mc_moment(bench, ChaosParams(f=F, gamma=0.5), "product", 2 ** -4,
                      eps_prime=2 ** -4, replicas=1500, seed=2)
        assert m.oracle is not None and m.oracle.imag == 0.0
        assert m.max_z <= 4.0, f"z = {m.max_z}"

    def test_distance2_gamma_zero_exactly_zero(self):
        bench = small_bench()
        m = mc_moment(bench, ChaosParams(f=F, gamma=0.0), "distance2",
                      2 ** -3, eps_prime=2 ** -4, replicas=50, seed=3)
        assert m.estimate == 0.0 + 0.0j
        assert m.se_re == 0.0
        assert m.z_re == 0.0, "constants cancel exactly at gamma = 0"

    def test_distance2_oracle_z_gate(self):
        bench = small_bench()
        m = mc_moment(bench, ChaosParams(f=F, gamma=0.5), "distance2",
                      2 ** -3, eps_prime=2 ** -4, replicas=2000, seed=4)
        assert m.oracle is not None and m.oracle.real > 0
        assert m.max_z <= 4.0, f"z = {m.max_z}"

    def test_event_sure_at_huge_lambda(self):
        bench = small_bench()
        params = ChaosParams(f=F, gamma=0.8, truncation=True, q=2, lam=50.0)
        m = mc_moment(bench, params, "event", 2 ** -4, replicas=200, seed=5,
                      trunc=(2, 50.0))
        assert m.estimate == 1.0 + 0j and m.se_re == 0.0

    def test_event_needs_trunc(self):
        bench = small_bench()
        with pytest.raises(ValueError):
            mc_moment(bench, ChaosParams(f=F, gamma=0.8), "event", 2 ** -4,
                      replicas=64, seed=0)

    def test_unknown_estimand(self):
        bench = small_bench()
        with pytest.raises(ValueError):
            mc_moment(bench, ChaosParams(f=F, gamma=0.5), "variance", 2 ** -4,
                      replicas=64, seed=0)

    def test_pair_estimand_needs_eps_prime(self):
        bench = small_bench()
        with pytest.raises(ValueError):
            mc_moment(bench, ChaosParams(f=F, gamma=0.5), "product", 2 ** -4,
                      replicas=64, seed=0)


class TestCauchyLadder:
    def test_gamma_zero_identically_zero(self):
        bench = small_bench()
        rep = cauchy_ladder(bench, ChaosParams(f=F, gamma=0.0),
                            [2 ** -3, 2 ** -4, 2 ** -5], replicas=100, seed=0)
        assert all(v == 0.0 for v in rep.values)
        assert rep.verdict, "all-zero ladder counts as converged"

    def test_values_nonnegative(self):
        bench = small_bench()
        rep = cauchy_ladder(bench, ChaosParams(f=F, gamma=0.5),
                            [2 ** -3, 2 ** -4, 2 ** -5], replicas=800, seed=1)
        assert all(v >= 0.0 for v in rep.values)
        assert len(rep.steps) == 2

    def test_ladder_must_decrease(self):
        bench = small_bench()
        with pytest.raises(ValueError):
            cauchy_ladder(bench, ChaosParams(f=F, gamma=0.5),
                          [2 ** -4, 2 ** -4], replicas=64, seed=0)


class TestMollifierIndependence:
    def test_same_profile_is_zero(self):
        bench = small_bench()
        bench.add_channel("alt", Mollifier(d=1, profile="bump"))
        rep = mollifier_independence(bench, ChaosParams(f=F, gamma=0.5),
                                     [2 ** -3, 2 ** -4], replicas=100, seed=0)
        assert all(v == 0.0 for v in rep.values)
        assert rep.verdict

    def test_distinct_profiles_nonzero(self):
        bench = small_bench()
        bench.add_channel("alt", Mollifier(d=1, profile="quartic"))
        rep = mollifier_independence(bench, ChaosParams(f=F, gamma=0.5),
                                     [2 ** -3, 2 ** -4, 2 ** -5],
                                     replicas=800, seed=1)
        assert all(v > 0.0 for v in rep.values)


class TestKernelEstimateCheck:
    def test_single_rung_matches_manual_rebuild(self):
        import logchaos.kernels as kernels
        spec = KernelSpec(d=1, q0_kind="constant", q0_const=0.7)
        grid = Grid.regular((0.0, 1.0), 256)
        eps = 2 ** -4
        rep = kernel_estimate_check(spec, "mollified", grid,
                                    eps_ladder=[eps])
        tab = kernels.mollified_table(spec, grid, eps, eps,
                                      mol=Mollifier(d=1), rule="midpoint",
                                      nodes=32)
        pa = grid.points[tab.rows]
        pb = grid.points[tab.rows_prime]
        r = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=-1))
        ref = -np.log(np.maximum(r, eps))
        manual = float(np.abs(tab.values - ref).max())
        assert rep.suprema[0] == manual
        assert rep.ratios == () and rep.stable

    def test_log_floor_off_keeps_divergence(self):
        # dropping the log reference leaves the full |K| magnitude behind
        grid = Grid.regular((0.0, 1.0), 256)
        with_ref = kernel_estimate_check(SPEC, "mollified", grid,
                                         eps_ladder=[2 ** -4])
        without = kernel_estimate_check(SPEC, "mollified", grid,
                                        eps_ladder=[2 ** -4],
                                        log_floor=False)
        assert without.suprema[0] > with_ref.suprema[0]
        assert without.suprema[0] > 0.5 * math.log(16.0)

    def test_mollified_stability_short_ladder(self):
        grid = Grid.regular((0.0, 1.0), 256)
        rep = kernel_estimate_check(SPEC, "mollified", grid,
                                    eps_ladder=[2 ** -3, 2 ** -4, 2 ** -5])
        assert rep.stable, f"ratios {rep.ratios}"
        assert all(s < 5.0 for s in rep.suprema)

    def test_partial_stability(self):
        grid = Grid.regular((0.0, 1.0), 256)
        rep = kernel_estimate_check(SPEC, "partial", grid,
                                    n_ladder=[4, 6, 8, 10],
                                    eps_fixed=2 ** -4)
        assert rep.stable, f"ratios {rep.ratios}"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            kernel_estimate_check(SPEC, "uniform", GRID,
                                  eps_ladder=[2 ** -3])

    def test_partial_needs_eps(self):
        with pytest.raises(ValueError):
            kernel_estimate_check(SPEC, "partial", GRID, n_ladder=[4, 6])


class TestTailBound:
    def test_table_and_flags(self):
        rep = tail_bound_check()
        assert rep.all_hold, "corrected bound must dominate the exact tail"
        assert rep.literal_violated, "the u^2/sigma^2 exponent must fail at 3 sigma"
        by_key = {(s, u): (exact, bound) for s, u, exact, bound, _ in rep.rows}
        exact0, bound0 = by_key[(1.0, 0.0)]
        assert exact0 == 0.5 and bound0 == 2.0
        exact3, bound3 = by_key[(1.0, 3.0)]
        assert abs(exact3 - 0.0013499) < 1e-6
        assert abs(bound3 - 2 * math.exp(-4.5)) < 1e-12
        assert abs(rep.literal_bound - 2 * math.exp(-9.0)) < 1e-12
        assert rep.literal_exact > rep.literal_bound

    def test_tail_monotone_in_u(self):
        rep = tail_bound_check(sigmas=(1.0,), u_over_sigma=(0, 1, 2, 3))
        exacts = [r[2] for r in rep.rows]
        assert all(b < a for a, b in zip(exacts, exacts[1:]))

    def test_literal_flags_independent_of_table(self):
        # the 3-sigma counterexample is recorded even when the table
        # never visits that point
        rep = tail_bound_check(sigmas=(0.5,), u_over_sigma=(0,))
        assert rep.literal_violated
        assert abs(rep.literal_exact - 0.0013499) < 1e-6


class TestSupFieldProb:
    def test_huge_lambda_no_exceedance(self):
        grid = Grid.regular((0.0, 1.0), 64)
        bench = Bench(SPEC, grid, 6, f=bump_function(grid, radius=0.2))
        rep = sup_field_prob(bench, 10.0, ks=[5], qs=[2], replicas=500,
                             seed=0)
        assert rep.k_probs[0].estimate == 0.0 + 0j, "10k is way past 4 sd"
        assert rep.q_probs[0].estimate == 1.0 + 0j

    def test_barrier_slope_guard(self):
        bench = small_bench()
        with pytest.raises(ValueError):
            sup_field_prob(bench, 1.0, ks=[2, 3], qs=[2], replicas=64, seed=0)

    def test_ladder_depth_guard(self):
        bench = small_bench(n_max=5)
        with pytest.raises(ValueError):
            sup_field_prob(bench, 1.6, ks=[4, 6], qs=[2], replicas=64, seed=0)

    def test_event_monotone_samplewise(self):
        grid = Grid.regular((0.0, 1.0), 64)
        bench = Bench(SPEC, grid, 8, f=bump_function(grid, radius=0.2))
        rep = sup_field_prob(bench, 1.6, ks=[4, 5, 6], qs=[2, 4, 6, 8],
                             replicas=600, seed=3)
        probs = [p.estimate.real for p in rep.q_probs]
        assert rep.q_increasing, f"event probabilities {probs}"


class TestTiltedEventProb:
    SEPS = [math.exp(-2), math.exp(-3), math.exp(-4), math.exp(-5)]

    def test_zero_tilt_matches_direct(self):
        eps = math.exp(-5)
        q, lam, n_max = 2, 1.6, 6
        rep = tilted_event_prob(SPEC, self.SEPS, eps, eps, q, lam, alpha=0.0,
                                n_max=n_max, replicas=1200, seed=7)
        # direct untilted estimate at the first separation
        s = self.SEPS[0]
        x, y = 0.5 - s / 2, 0.5 + s / 2
        grid2 = Grid.from_points(np.array([[x], [y]]), (0.0, 1.0))
        hits = []
        for samp in sample_increments(SPEC, grid2, n_max, seed=99,
                                      replicas=1200):
            ok = True
            for k in range(q, n_max + 1):
                yk = samp.y(k)
                ok = ok and yk[0] <= k * lam and yk[1] <= k * lam
            hits.append(float(ok))
        direct = float(np.mean(hits))
        se_d = float(np.std(hits, ddof=1) / math.sqrt(len(hits)))
        est = rep.estimates[0]
        gap = abs(est.estimate.real - direct)
        se = math.hypot(est.se_re, se_d)
        assert gap <= 4 * se, f"tilt-free vs direct: {est.estimate.real} vs {direct}"

    def test_needs_four_separations(self):
        with pytest.raises(ValueError):
            tilted_event_prob(SPEC, self.SEPS[:3], math.exp(-5), math.exp(-5),
                              2, 1.6, 1.1, 6, replicas=64, seed=0)

    def test_barrier_guard(self):
        with pytest.raises(PhaseError):
            tilted_event_prob(SPEC, self.SEPS, math.exp(-5), math.exp(-5),
                              2, 1.0, 1.1, 6, replicas=64, seed=0)

    def test_exponent_target_formula(self):
        rep = tilted_event_prob(SPEC, self.SEPS, math.exp(-5), math.exp(-5),
                                2, 1.5, 1.1, 6, replicas=400, seed=8)
        assert abs(rep.exponent_target - 0.5 * (2.2 - 1.5) ** 2) < 1e-12
        # raising lambda toward 2 alpha shrinks the target exponent
        rep2 = tilted_event_prob(SPEC, self.SEPS, math.exp(-5), math.exp(-5),
                                 2, 2.0, 1.1, 6, replicas=400, seed=8)
        assert rep2.exponent_target < rep.exponent_target


class TestFieldStats:
    def test_oracle_gates_small_run(self):
        bench = small_bench(n_max=8)
        ests = field_stats(bench, ns=[2, 5], n_probes=5, eps=2 ** -4,
                           eps_prime=2 ** -5, replicas=800, seed=11)
        assert len(ests) == 7
        for m in ests:
            assert m.oracle is not None
            assert m.max_z <= 4.0, f"{m.estimator}: z = {m.max_z}"

    def test_variance_oracle_value(self):
        bench = small_bench(n_max=8)
        ests = field_stats(bench, ns=[3], n_probes=1, eps=2 ** -4,
                           eps_prime=2 ** -4, replicas=200, seed=12)
        assert ests[0].oracle == 3.0 + 0j, "Var(Y_n) oracle is Q_0 + n"


class TestSobolevLadder:
    def test_index_guard(self):
        bench = small_bench()
        with pytest.raises(ValueError):
            sobolev_ladder(bench, ChaosParams(f=F, gamma=0.5), 0.5,
                           [2 ** -3, 2 ** -4], replicas=64, seed=0)

    def test_gamma_zero_identically_zero(self):
        bench = small_bench()
        rep = sobolev_ladder(bench, ChaosParams(f=F, gamma=0.0), 0.75,
                             [2 ** -3, 2 ** -4, 2 ** -5], replicas=100,
                             seed=0)
        assert all(v == 0.0 for v in rep.values)
        assert rep.verdict

    def test_values_nonnegative(self):
        bench = small_bench()
        rep = sobolev_ladder(bench, ChaosParams(f=F, gamma=0.5), 0.75,
                             [2 ** -3, 2 ** -4, 2 ** -5], replicas=400,
                             seed=1)
        assert all(v >= 0.0 for v in rep.values)
