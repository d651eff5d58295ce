"""Two-step calibration: marginal least squares and dependence fitting."""

import math

import numpy as np
import pytest

from sdlevy import (
    MarketFrame,
    ModelSpec,
    OptionQuote,
    RngStream,
    SSDDependence,
    VGMarginal,
    carr_madan_calls,
    fit_dependence,
    fit_marginal_vg,
    historical_correlation,
    max_attainable_correlation,
    model_correlation,
    simulate_terminals,
    validate,
)

from conftest import GAS_M1, GAS_M2, POWER_M1, POWER_M2

F0, R, T = 50.0, 0.015, 1.0
LADDER = [F0 + off for off in (-9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0)]


def make_quotes(m: VGMarginal, noise: float = 0.0, seed: int = 0,
                asset: str = "A") -> list[OptionQuote]:
    frame = MarketFrame(F0, R, T)
    prices = [r.price for r in carr_madan_calls(m, frame, LADDER)]
    if noise:
        rng = np.random.default_rng(seed)
        prices = [p * (1.0 + noise * rng.standard_normal()) for p in prices]
    return [OptionQuote(asset, T, k, p) for k, p in zip(LADDER, prices)]


class TestMarginalFit:
    def test_round_trip_exact_quotes(self):
        quotes = make_quotes(POWER_M1)
        fit = fit_marginal_vg(quotes, F0, R)
        assert fit.rmse < 1e-6
        assert fit.converged and not fit.boundary
        assert fit.marginal.mu == pytest.approx(0.40, abs=0.004)
        assert fit.marginal.sigma == pytest.approx(0.31, abs=0.0031)
        assert fit.marginal.alpha == pytest.approx(0.02, abs=0.0002)

    def test_bumped_quotes_repriced_within_one_percent(self):
        # a flat +0.5% premium shift is absorbed almost exactly
        frame = MarketFrame(F0, R, T)
        prices = [1.005 * r.price
                  for r in carr_madan_calls(POWER_M2, frame, LADDER)]
        quotes = [OptionQuote("B", T, k, p) for k, p in zip(LADDER, prices)]
        fit = fit_marginal_vg(quotes, F0, R, init=POWER_M2, n_starts=2)
        model = carr_madan_calls(fit.marginal, frame, LADDER)
        for q, res in zip(quotes, model):
            assert abs(res.price - q.price) / q.price < 0.01

    def test_random_noise_smoothed_not_chased(self):
        # iid +-0.5% noise cannot be interpolated by three parameters; the
        # least-squares fit must stay within a few noise widths of every
        # quote instead of blowing up
        quotes = make_quotes(POWER_M2, noise=0.005, seed=3, asset="B")
        fit = fit_marginal_vg(quotes, F0, R, init=POWER_M2, n_starts=2)
        frame = MarketFrame(F0, R, T)
        model = carr_madan_calls(fit.marginal, frame, LADDER)
        for q, res in zip(quotes, model):
            assert abs(res.price - q.price) / q.price < 0.02

    def test_intrinsic_quotes_flagged_as_boundary(self):
        disc = math.exp(-R * T)
        quotes = [OptionQuote("A", T, k, max(disc * (F0 - k), 0.0) + 1e-4)
                  for k in LADDER]
        fit = fit_marginal_vg(quotes, F0, R, n_starts=4)
        assert fit.boundary
        assert fit.marginal.sigma < 0.02 or fit.marginal.alpha < 0.02

    def test_per_quote_errors_reported(self):
        quotes = make_quotes(POWER_M1)
        fit = fit_marginal_vg(quotes, F0, R, init=POWER_M1, n_starts=2)
        assert len(fit.per_quote_errors) == len(quotes)
        assert all(abs(e) < 1e-6 for e in fit.per_quote_errors)

    def test_needs_three_quotes(self):
        with pytest.raises(ValueError, match="3 quotes"):
            fit_marginal_vg(make_quotes(POWER_M1)[:2], F0, R)

    def test_rejects_mixed_assets(self):
        quotes = make_quotes(POWER_M1) + make_quotes(POWER_M2, asset="B")
        with pytest.raises(ValueError, match="several assets"):
            fit_marginal_vg(quotes, F0, R)

    def test_rejects_infeasible_init(self):
        with pytest.raises(ValueError, match="infeasible"):
            fit_marginal_vg(make_quotes(POWER_M1), F0, R,
                            init=VGMarginal(2.0, 1.0, 1.0))

    def test_relative_weighting_flag(self):
        quotes = make_quotes(POWER_M1)
        fit = fit_marginal_vg(quotes, F0, R, relative=True, init=POWER_M1,
                              n_starts=2)
        assert fit.rmse < 1e-6

    def test_interleaved_maturities_keep_quote_order(self):
        # per-quote errors must line up with the input order even when
        # maturities interleave; the bumped quote carries the big error
        frame_half = MarketFrame(F0, R, 0.5)
        frame_one = MarketFrame(F0, R, 1.0)
        quotes = []
        for k in (45.0, 50.0, 55.0):
            p_half = carr_madan_calls(POWER_M1, frame_half, [k])[0].price
            p_one = carr_madan_calls(POWER_M1, frame_one, [k])[0].price
            quotes.append(OptionQuote("A", 0.5, k, p_half))
            quotes.append(OptionQuote("A", 1.0, k, p_one))
        bumped = quotes[2]
        quotes[2] = OptionQuote("A", bumped.T, bumped.K, 1.02 * bumped.price)
        fit = fit_marginal_vg(quotes, F0, R, init=POWER_M1, n_starts=2)
        errors = [abs(e) for e in fit.per_quote_errors]
        assert len(errors) == 6
        assert errors.index(max(errors)) == 2


class TestTwoStepSeparation:
    def test_marginal_prices_ignore_dependence(self):
        # dependence parameters never touch the marginal pricer inputs
        frame = MarketFrame(F0, R, T)
        base = [r.price for r in carr_madan_calls(POWER_M1, frame, LADDER)]
        for dep in (SSDDependence(A=41.89, a=0.2),
                    SSDDependence(A=5.0, a=0.9)):
            spec = ModelSpec.ssd(POWER_M1, POWER_M2, dep)
            again = [r.price
                     for r in carr_madan_calls(spec.marginals[0], frame,
                                               LADDER)]
            assert again == base


class TestDependenceFit:
    def test_clock_only_model_cannot_reach_high_target(self):
        fit = fit_dependence("ssd", (POWER_M1, POWER_M2), 0.94)
        assert fit.shortfall
        assert fit.max_attainable < 0.10
        assert fit.rho_mod == pytest.approx(fit.max_attainable, abs=1e-3)

    def test_attainable_target_hit(self):
        for kind, target in (("ssd", 0.03), ("lssd", 0.57), ("bbsd", 0.54)):
            fit = fit_dependence(kind, (GAS_M1, GAS_M2), target)
            assert not fit.shortfall
            assert fit.rho_mod == pytest.approx(target, abs=1e-3)
            assert validate(fit_spec(kind, fit)).ok

    def test_zero_target_drives_lag_down(self):
        fit = fit_dependence("ssd", (POWER_M1, POWER_M2), 0.0)
        assert abs(fit.rho_mod) < 1e-3
        dep = fit.dependence
        assert dep.a <= 0.02 or dep.A <= 1e-4

    def test_objective_not_worse_than_init(self):
        init = {"A": 10.0, "a": 0.5}
        target = 0.02
        fit = fit_dependence("ssd", (POWER_M1, POWER_M2), target, init=init)
        spec0 = ModelSpec.ssd(POWER_M1, POWER_M2,
                              SSDDependence(A=10.0, a=0.5))
        init_obj = (model_correlation(spec0) - target) ** 2
        assert fit.objective <= init_obj + 1e-15

    def test_pinned_parameter_respected(self):
        fit = fit_dependence("ssd", (POWER_M1, POWER_M2), 0.02,
                             pinned={"a": 0.5})
        assert fit.dependence.a == 0.5
        assert fit.rho_mod == pytest.approx(0.02, abs=1e-3)

    def test_pinned_unknown_rejected(self):
        with pytest.raises(ValueError, match="pin"):
            fit_dependence("ssd", (POWER_M1, POWER_M2), 0.5,
                           pinned={"rho": 0.5})

    def test_target_range_checked(self):
        with pytest.raises(ValueError, match="rho_target"):
            fit_dependence("ssd", (POWER_M1, POWER_M2), 1.5)

    def test_underdetermined_fit_reports_alternatives(self):
        # one scalar target, four free parameters: expect near-optimal ties
        fit = fit_dependence("bbsd", (GAS_M1, GAS_M2), 0.30)
        assert fit.alternatives

    def test_consistency_loop_simulation_matches_fit(self):
        fit = fit_dependence("bbsd", (GAS_M1, GAS_M2), 0.54)
        spec = fit_spec("bbsd", fit)
        batch = simulate_terminals(spec, 1.0, 10**6, RngStream(50))
        rho = np.corrcoef(batch.terminals(0), batch.terminals(1))[0, 1]
        assert rho == pytest.approx(fit.rho_mod, abs=0.01)


def fit_spec(kind, fit):
    marginals = (GAS_M1, GAS_M2)
    if kind == "ssd":
        return ModelSpec.ssd(*marginals, fit.dependence)
    if kind == "lssd":
        return ModelSpec.lssd(*marginals, fit.dependence)
    return ModelSpec.bbsd(*marginals, fit.dependence)


class TestMaxAttainable:
    def test_dominates_any_fit(self):
        best = max_attainable_correlation("ssd", (POWER_M1, POWER_M2))
        for target in (0.02, 0.04, 0.94):
            fit = fit_dependence("ssd", (POWER_M1, POWER_M2), target)
            assert fit.rho_mod <= best + 1e-9

    def test_ssd_oracle_value(self):
        # supremum is at a -> 1, A = 1/max(alpha): evaluate directly
        num = 0.40 * 0.61 * 0.02 * 0.02 * 0.999 * (1.0 / 0.02)
        den = math.sqrt(0.31**2 + 0.40**2 * 0.02) * math.sqrt(
            0.32**2 + 0.61**2 * 0.02)
        best = max_attainable_correlation("ssd", (POWER_M1, POWER_M2))
        assert best == pytest.approx(num / den, rel=1e-3)

    def test_loaded_model_reaches_high_targets(self):
        best = max_attainable_correlation("bbsd", (POWER_M1, POWER_M2))
        assert best >= 0.94

    def test_zero_drift_clock_only_is_zero(self):
        m1 = VGMarginal(0.0, 0.3, 0.1)
        m2 = VGMarginal(0.0, 0.2, 0.1)
        assert max_attainable_correlation("ssd", (m1, m2)) == pytest.approx(
            0.0, abs=1e-12)


class TestHistoricalCorrelation:
    def test_identical_series(self):
        p = [1.0, 1.3, 0.9, 1.7, 2.2]
        assert historical_correlation(p, p) == pytest.approx(1.0)

    def test_reciprocal_series(self):
        p = np.array([1.0, 1.3, 0.9, 1.7, 2.2])
        assert historical_correlation(p, 5.0 / p) == pytest.approx(-1.0)

    def test_hand_computed_case(self):
        p1 = [1.0, 2.0, 3.0, 6.0]
        p2 = [1.0, 3.0, 4.0, 8.0]
        r1 = np.diff(np.log(p1))
        r2 = np.diff(np.log(p2))
        # direct Pearson oracle
        c1, c2 = r1 - r1.mean(), r2 - r2.mean()
        oracle = (c1 * c2).sum() / math.sqrt((c1**2).sum() * (c2**2).sum())
        assert historical_correlation(p1, p2) == pytest.approx(oracle)

    def test_constant_log_returns_rejected(self):
        # geometric series has constant returns: correlation is undefined
        with pytest.raises(ValueError, match="zero-variance"):
            historical_correlation([1.0, 2.0, 4.0, 8.0],
                                   [1.0, 2.0, 4.0, 16.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="aligned"):
            historical_correlation([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 3"):
            historical_correlation([1.0, 2.0], [1.0, 2.0])

    def test_nonpositive_prices(self):
        with pytest.raises(ValueError, match="positive"):
            historical_correlation([1.0, -2.0, 3.0], [1.0, 2.0, 3.0])
