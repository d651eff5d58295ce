"""Fourier pricers against Monte Carlo and no-arbitrage bounds."""

import math

import pytest

from sdlevy import (
    BBSDDependence,
    FourierGrid,
    MarketFrame,
    ModelSpec,
    RngStream,
    VGMarginal,
    carr_madan_calls,
    cf_spread_lower_bound,
    mc_spread_price,
    mc_spread_prices,
    mc_vanilla_price,
    model_correlation,
)
from sdlevy.pricing import DampingError, StrikeRangeError

from conftest import (
    GAS_M1,
    GAS_M2,
    POWER_M1,
    bbsd_gas,
    bbsd_power,
    lssd_gas,
    lssd_power,
    ssd_gas,
    ssd_power,
)

FRAME1 = MarketFrame(50.0, 0.015, 1.0)
SPREAD_FRAME = MarketFrame((20.0, 20.0), 0.015, 1.0)
N = 400_000


class TestFourierGrid:
    def test_power_of_two_required(self):
        with pytest.raises(ValueError, match="power of two"):
            FourierGrid(1000, 0.25, 1.5)

    def test_positive_eta_and_damping(self):
        with pytest.raises(ValueError):
            FourierGrid(1024, -0.1, 1.5)
        with pytest.raises(ValueError):
            FourierGrid(1024, 0.25, 0.0)


class TestCarrMadan:
    def test_zero_strike_is_discounted_forward(self):
        res = carr_madan_calls(POWER_M1, FRAME1, [0.0])[0]
        assert res.price == pytest.approx(math.exp(-0.015) * 50.0,
                                          rel=1e-3)

    def test_tiny_strike_lattice_consistent(self):
        # the lattice itself approaches the discounted forward at tiny K
        res = carr_madan_calls(POWER_M1, FRAME1, [0.005])[0]
        target = math.exp(-0.015) * (50.0 - 0.005)
        assert res.price == pytest.approx(target, rel=1e-6)

    def test_above_intrinsic(self):
        disc = math.exp(-0.015)
        for strike in (40.0, 50.0, 60.0):
            res = carr_madan_calls(POWER_M1, FRAME1, [strike])[0]
            assert res.price >= disc * max(50.0 - strike, 0.0)

    def test_matches_mc(self):
        strikes = [42.0, 46.0, 50.0, 54.0, 58.0]
        fft = carr_madan_calls(POWER_M1, FRAME1, strikes)
        for strike, res in zip(strikes, fft):
            mc = mc_vanilla_price(POWER_M1, FRAME1, strike, N, RngStream(40))
            assert abs(res.price - mc.price) <= 3.0 * mc.stderr

    def test_monotone_in_strike(self):
        strikes = [40.0 + 2.0 * i for i in range(11)]
        prices = [r.price for r in carr_madan_calls(GAS_M1, FRAME1, strikes)]
        assert all(a > b for a, b in zip(prices, prices[1:]))

    def test_lattice_refinement_converged(self):
        base = carr_madan_calls(POWER_M1, FRAME1, [50.0],
                                FourierGrid(4096, 0.25, 1.5))[0].price
        finer_n = carr_madan_calls(POWER_M1, FRAME1, [50.0],
                                   FourierGrid(8192, 0.25, 1.5))[0].price
        finer_eta = carr_madan_calls(POWER_M1, FRAME1, [50.0],
                                     FourierGrid(8192, 0.125, 1.5))[0].price
        assert abs(finer_n - base) / base < 1e-6
        assert abs(finer_eta - base) / base < 1e-6

    def test_strike_outside_lattice_rejected(self):
        with pytest.raises(StrikeRangeError):
            carr_madan_calls(POWER_M1, FRAME1, [50.0 * math.exp(13.0)])
        with pytest.raises(StrikeRangeError):
            carr_madan_calls(POWER_M1, FRAME1, [-1.0])

    def test_damping_outside_strip_rejected(self):
        # heavy marginal: strip fails once extended by the damping shift
        heavy = VGMarginal(0.9, 0.5, 0.9)
        assert heavy.martingale_margin > 0.0
        with pytest.raises(DampingError):
            carr_madan_calls(heavy, FRAME1, [50.0], FourierGrid(4096, 0.25,
                                                                1.5))


class TestMcVanilla:
    def test_zero_strike(self):
        res = mc_vanilla_price(POWER_M1, FRAME1, 0.0, N, RngStream(41))
        assert abs(res.price - math.exp(-0.015) * 50.0) <= 3.0 * res.stderr

    def test_put_call_parity_same_paths(self):
        strike = 52.0
        call = mc_vanilla_price(POWER_M1, FRAME1, strike, N, RngStream(42))
        put = mc_vanilla_price(POWER_M1, FRAME1, strike, N, RngStream(42),
                               put=True)
        target = math.exp(-0.015) * (50.0 - strike)
        assert abs((call.price - put.price) - target) <= 3.0 * (
            call.stderr + put.stderr)

    def test_stderr_positive(self):
        res = mc_vanilla_price(POWER_M1, FRAME1, 50.0, 10_000, RngStream(43))
        assert res.stderr > 0.0


SPREAD_SPECS = [("ssd", ssd_gas), ("lssd", lssd_gas), ("bbsd", bbsd_gas)]


class TestSpreadLowerBound:
    @pytest.mark.parametrize("name,make", SPREAD_SPECS,
                             ids=[n for n, _ in SPREAD_SPECS])
    def test_against_mc(self, name, make):
        spec = make()
        strikes = [0.0, 1.0, 2.0]
        mcs = mc_spread_prices(spec, SPREAD_FRAME, strikes, N, RngStream(44))
        for strike, mc in zip(strikes, mcs):
            res = cf_spread_lower_bound(spec, SPREAD_FRAME, strike)
            assert res.price <= mc.price + 3.0 * mc.stderr
            assert abs(res.price - mc.price) <= max(3.0 * mc.stderr,
                                                    0.01 * mc.price)

    def test_worthless_for_huge_strike(self):
        res = cf_spread_lower_bound(ssd_gas(), SPREAD_FRAME, 1000.0 * 20.0)
        assert res.price < 1e-4 * 20.0

    def test_monotone_nonincreasing_in_strike_and_positive(self):
        spec = bbsd_gas()
        prices = [cf_spread_lower_bound(spec, SPREAD_FRAME, k).price
                  for k in (-4.0, -2.0, 0.0, 2.0, 4.0)]
        assert all(a >= b for a, b in zip(prices, prices[1:]))
        assert all(p > 0.0 for p in prices)

    def test_independent_assets_match_mc(self):
        dep = BBSDDependence(a1=0.0, a2=0.0, a=0.5, nuR=0.11)
        spec = ModelSpec.bbsd(GAS_M1, GAS_M2, dep)
        res = cf_spread_lower_bound(spec, SPREAD_FRAME, 0.0)
        mc = mc_spread_price(spec, SPREAD_FRAME, 0.0, N, RngStream(45))
        assert abs(res.price - mc.price) <= 3.0 * mc.stderr

    def test_refinement_converged(self):
        spec = bbsd_gas()
        base = cf_spread_lower_bound(spec, SPREAD_FRAME, 1.0,
                                     FourierGrid(8192, 0.125, 0.75)).price
        finer_n = cf_spread_lower_bound(spec, SPREAD_FRAME, 1.0,
                                        FourierGrid(16384, 0.125, 0.75)).price
        finer_eta = cf_spread_lower_bound(spec, SPREAD_FRAME, 1.0,
                                          FourierGrid(16384, 0.0625,
                                                      0.75)).price
        assert abs(finer_n - base) / base < 1e-6
        assert abs(finer_eta - base) / base < 1e-6

    def test_needs_two_assets(self):
        with pytest.raises(ValueError, match="two-asset"):
            cf_spread_lower_bound(ssd_gas(), FRAME1, 0.0)

    def test_strike_below_negative_forward_rejected(self):
        with pytest.raises(ValueError, match="F2"):
            cf_spread_lower_bound(ssd_gas(), SPREAD_FRAME, -25.0)


class TestMcSpread:
    def test_degenerate_second_leg_reduces_to_forward(self):
        quiet = VGMarginal(0.0, 1e-9, 0.02)
        spec = ModelSpec.bbsd(GAS_M1, quiet,
                              BBSDDependence(a1=0.0, a2=0.0, a=0.5, nuR=0.11))
        frame = MarketFrame((20.0, 1e-12), 0.015, 1.0)
        res = mc_spread_price(spec, frame, 0.0, 400_000, RngStream(46))
        assert abs(res.price - math.exp(-0.015) * 20.0) <= 3.0 * res.stderr

    def test_monotone_under_common_random_numbers(self):
        spec = ssd_gas()
        prices = [r.price for r in mc_spread_prices(
            spec, SPREAD_FRAME, [0.0, 1.0, 5.0], 50_000, RngStream(47))]
        assert prices[0] >= prices[1] >= prices[2]

    def test_same_seed_reproduces(self):
        a = mc_spread_price(ssd_gas(), SPREAD_FRAME, 1.0, 20_000,
                            RngStream(48))
        b = mc_spread_price(ssd_gas(), SPREAD_FRAME, 1.0, 20_000,
                            RngStream(48))
        assert a.price == b.price and a.stderr == b.stderr


class TestCorrelationOrdering:
    def test_spread_price_decreases_with_model_correlation(self):
        # same marginals, three dependence structures with increasing
        # correlation; spread value falls as the legs co-move more
        frame = MarketFrame((50.0, 50.0), 0.015, 1.0)
        specs = [ssd_power(),
                 lssd_power(),
                 bbsd_power(nuR=0.021)]
        rhos = [model_correlation(s) for s in specs]
        assert rhos[0] < rhos[1] < rhos[2]
        for strike in range(-4, 5):
            prices = [cf_spread_lower_bound(s, frame, float(strike)).price
                      for s in specs]
            assert prices[0] > prices[1] >= prices[2]

    def test_mc_agrees_on_ordering_with_common_random_numbers(self):
        frame = MarketFrame((50.0, 50.0), 0.015, 1.0)
        p = [mc_spread_price(s, frame, 0.0, 100_000, RngStream(49)).price
             for s in (ssd_power(), lssd_power(), bbsd_power(nuR=0.021))]
        assert p[0] > p[1] > p[2]
