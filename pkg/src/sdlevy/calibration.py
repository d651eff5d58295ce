"""Two-step calibration: marginal variance-gamma fits to vanilla quotes
by nonlinear least squares over FFT prices, then a dependence fit to a
historical correlation target through the closed-form model correlation.

The split is exact, not an approximation: the marginal laws do not depend
on any dependence parameter, so step one fixes the marginals once and
step two only moves the dependence record.  With a single scalar target
and two to four free dependence parameters the second step is typically
underdetermined; the fit reports every near-optimal solution it saw and
lets callers pin parameters to resolve ties explicitly.

The optimiser is a derivative-free simplex search run from Latin-
hypercube multi-starts inside box constraints enforced by a logistic
reparametrisation.  Objective evaluations are pure; the multi-start
reduce is deterministic (ordered by start index, ties broken by lower
objective).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit as _expit

from .models import (
    BBSDDependence,
    ChfStripError,
    Dependence,
    LSSDDependence,
    ModelSpec,
    SSDDependence,
    VGMarginal,
    model_correlation,
    validate,
)
from .pricing import (
    BranchContinuityError,
    DampingError,
    FourierGrid,
    MarketFrame,
    VANILLA_GRID,
    carr_madan_calls,
)

__all__ = [
    "OptionQuote",
    "MarginalFit",
    "DependenceFit",
    "CalibrationResult",
    "ConvergenceError",
    "fit_marginal_vg",
    "fit_dependence",
    "max_attainable_correlation",
    "historical_correlation",
]


class ConvergenceError(RuntimeError):
    """The optimiser failed to converge and no usable iterate exists."""


@dataclass(frozen=True)
class OptionQuote:
    """One observed vanilla call: asset id, maturity (years), strike, premium."""

    asset: str
    T: float
    K: float
    price: float

    def __post_init__(self):
        if self.K <= 0.0 or self.T <= 0.0 or self.price <= 0.0:
            raise ValueError(f"quote needs K, T, price > 0: {self}")


@dataclass
class MarginalFit:
    """Fitted marginal plus diagnostics of the least-squares step."""

    marginal: VGMarginal
    objective: float
    rmse: float
    per_quote_errors: tuple[float, ...]  # (model - market)/market per quote
    converged: bool
    boundary: bool
    n_starts: int
    iterations: int


@dataclass
class DependenceFit:
    """Fitted dependence record plus diagnostics of the correlation step."""

    kind: str
    dependence: Dependence
    rho_mod: float
    rho_target: float
    objective: float
    converged: bool
    shortfall: bool
    max_attainable: float
    alternatives: tuple[Dependence, ...] = ()


@dataclass
class CalibrationResult:
    """Persistable outcome of the full two-step pipeline."""

    kind: str
    assets: tuple[str, str]
    marginals: tuple[VGMarginal, VGMarginal]
    dependence: Dependence
    rho_mod: float
    rho_mkt: float
    marginal_objectives: tuple[float, float]
    dependence_objective: float
    per_quote_errors: tuple[tuple[float, ...], tuple[float, ...]]
    solver: dict
    version: int = 1

    def spec(self) -> ModelSpec:
        m1, m2 = self.marginals
        if self.kind == "ssd":
            return ModelSpec.ssd(m1, m2, self.dependence)
        if self.kind == "lssd":
            return ModelSpec.lssd(m1, m2, self.dependence)
        return ModelSpec.bbsd(m1, m2, self.dependence)


# ---------------------------------------------------------------------------
# Box-constrained simplex search with Latin-hypercube multi-starts
# ---------------------------------------------------------------------------


def _logit(p):
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return np.log(p / (1.0 - p))


def _to_box(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return lo + (hi - lo) * _expit(x)


def _from_box(p: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return _logit((np.asarray(p, dtype=float) - lo) / (hi - lo))


def _latin_hypercube(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    strata = np.tile(np.arange(n, dtype=float), (dims, 1))
    for d in range(dims):
        rng.shuffle(strata[d])
    return ((strata + rng.random((dims, n))) / n).T


@dataclass
class _SearchResult:
    params: np.ndarray
    objective: float
    converged: bool
    iterations: int
    all_solutions: list[tuple[np.ndarray, float]]


def _multistart_minimize(fn: Callable[[np.ndarray], float], lo, hi,
                         init: np.ndarray | None, n_starts: int,
                         seed: int) -> _SearchResult:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rng = np.random.default_rng(seed)
    starts = list(_latin_hypercube(n_starts, lo.size, rng) * (hi - lo) + lo)
    if init is not None:
        starts.insert(0, np.clip(np.asarray(init, dtype=float), lo, hi))

    def wrapped(x):
        return fn(_to_box(x, lo, hi))

    best: tuple[int, float, np.ndarray, bool, int] | None = None
    seen: list[tuple[np.ndarray, float]] = []
    iterations = 0
    for idx, p0 in enumerate(starts):
        res = minimize(wrapped, _from_box(p0, lo, hi), method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-14,
                                "maxiter": 4000, "maxfev": 6000})
        iterations += res.nit
        params = _to_box(res.x, lo, hi)
        seen.append((params, float(res.fun)))
        key = (float(res.fun), idx)
        if best is None or key < (best[1], best[0]):
            best = (idx, float(res.fun), res.x.copy(), bool(res.success), res.nit)
    # polish the winner with a tighter simplex
    res = minimize(wrapped, best[2], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-22,
                            "maxiter": 6000, "maxfev": 9000,
                            "initial_simplex": _tight_simplex(best[2])})
    iterations += res.nit
    final_x, final_f = res.x, float(res.fun)
    if final_f > best[1]:
        final_x, final_f = best[2], best[1]
    return _SearchResult(_to_box(final_x, lo, hi), final_f,
                         best[3] or res.success, iterations, seen)


def _tight_simplex(x: np.ndarray, scale: float = 1e-4) -> np.ndarray:
    n = x.size
    simplex = np.tile(x, (n + 1, 1))
    for d in range(n):
        simplex[d + 1, d] += scale
    return simplex


# ---------------------------------------------------------------------------
# Step one: marginal fit
# ---------------------------------------------------------------------------

_MARGINAL_LO = np.array([-3.0, 1e-4, 1e-4])
_MARGINAL_HI = np.array([3.0, 3.0, 3.0])
_PENALTY = 1e12


def fit_marginal_vg(quotes: Sequence[OptionQuote], f0: float, r: float,
                    init: VGMarginal | None = None,
                    grid: FourierGrid = VANILLA_GRID,
                    relative: bool = False, n_starts: int = 8,
                    seed: int = 0) -> MarginalFit:
    """Least-squares fit of (mu, sigma, alpha) to one asset's call quotes.

    Minimises the sum of squared price errors (squared relative errors
    with ``relative=True``) with model prices from the FFT pricer, subject
    to positivity and to the chf strip needed by the damping.  Needs at
    least three quotes, all for the same asset.  Never raises on a flat
    objective: non-convergence is reported through the ``converged`` flag
    with the best iterate retained.
    """
    if len(quotes) < 3:
        raise ValueError("need at least 3 quotes to fit 3 parameters")
    assets = {q.asset for q in quotes}
    if len(assets) > 1:
        raise ValueError(f"quotes span several assets: {sorted(assets)}")
    if init is not None:
        margin = init.martingale_margin
        if margin <= 0.0 or init.sigma <= 0.0 or init.alpha <= 0.0:
            raise ValueError("infeasible initial marginal")

    by_t: dict[float, list[tuple[int, OptionQuote]]] = {}
    for i, q in enumerate(quotes):
        by_t.setdefault(q.T, []).append((i, q))

    def model_prices(m: VGMarginal) -> list[float]:
        """FFT prices aligned to the input quote order."""
        prices = [0.0] * len(quotes)
        for t, group in by_t.items():
            frame = MarketFrame(f0, r, t)
            fft = carr_madan_calls(m, frame, [q.K for _, q in group], grid)
            for (i, _), res in zip(group, fft):
                prices[i] = res.price
        return prices

    d = grid.damping

    def objective(p: np.ndarray) -> float:
        m = VGMarginal(*p)
        strip = (1.0 - m.mu * m.alpha * (1.0 + d)
                 - 0.5 * m.sigma**2 * m.alpha * (1.0 + d) ** 2)
        if strip <= 1e-9 or m.martingale_margin <= 1e-9:
            return _PENALTY * (1.0 + abs(min(strip, m.martingale_margin)))
        try:
            prices = model_prices(m)
        except (BranchContinuityError, ChfStripError, DampingError):
            # pathological corner of the box; steer the search away
            return _PENALTY
        total = 0.0
        for q, price in zip(quotes, prices):
            err = price - q.price
            if relative:
                err /= q.price
            total += err * err
        return total

    init_vec = None if init is None else np.array([init.mu, init.sigma,
                                                   init.alpha])
    search = _multistart_minimize(objective, _MARGINAL_LO, _MARGINAL_HI,
                                  init_vec, n_starts, seed)
    fitted = VGMarginal(*(float(p) for p in search.params))
    boundary = bool(np.any(search.params - _MARGINAL_LO
                           < 1e-4 * (_MARGINAL_HI - _MARGINAL_LO))
                    or np.any(_MARGINAL_HI - search.params
                              < 1e-4 * (_MARGINAL_HI - _MARGINAL_LO)))

    fitted_prices = model_prices(fitted)
    errors = tuple((price - q.price) / q.price
                   for q, price in zip(quotes, fitted_prices))
    rmse = math.sqrt(sum((price - q.price) ** 2
                         for q, price in zip(quotes, fitted_prices))
                     / len(quotes))
    return MarginalFit(fitted, search.objective, rmse, errors,
                       search.converged, boundary, n_starts,
                       search.iterations)


# ---------------------------------------------------------------------------
# Step two: dependence fit
# ---------------------------------------------------------------------------

_A_BOUNDS = (0.01, 0.999)


def _dependence_space(kind: str, marginals: tuple[VGMarginal, VGMarginal],
                      pinned: Mapping[str, float] | None):
    """Free parameter names, box bounds and a record builder per model."""
    pinned = dict(pinned or {})
    alpha_max = max(m.alpha for m in marginals)
    if kind == "ssd":
        names = ["A", "a"]
        lo = {"A": 1e-6, "a": _A_BOUNDS[0]}
        hi = {"A": 1.0 / alpha_max, "a": _A_BOUNDS[1]}

        def build(p: Mapping[str, float]) -> Dependence:
            return SSDDependence(A=p["A"], a=p["a"], B=1.0)
    elif kind == "lssd":
        names = ["A", "a", "rho"]
        lo = {"A": 1e-6, "a": _A_BOUNDS[0], "rho": -1.0}
        hi = {"A": 1.0 / alpha_max, "a": _A_BOUNDS[1], "rho": 1.0}

        def build(p: Mapping[str, float]) -> Dependence:
            return LSSDDependence(A=p["A"], a=p["a"], rho=p["rho"], B=1.0)
    elif kind == "bbsd":
        names = ["a1", "a2", "a", "nuR"]
        lo = {"a1": 0.05, "a2": 0.05, "a": _A_BOUNDS[0],
              "nuR": alpha_max * (1.0 + 1e-6)}
        hi = {"a1": 1.5, "a2": 1.5, "a": _A_BOUNDS[1],
              "nuR": max(100.0 * alpha_max, 10.0)}

        def build(p: Mapping[str, float]) -> Dependence:
            return BBSDDependence(a1=p["a1"], a2=p["a2"], a=p["a"],
                                  nuR=p["nuR"])
    else:
        raise ValueError(f"unknown model kind {kind!r}")

    for name in pinned:
        if name not in names:
            raise ValueError(f"cannot pin unknown parameter {name!r} "
                             f"for {kind}")
    free = [n for n in names if n not in pinned]
    if not free:
        raise ValueError("all dependence parameters pinned; nothing to fit")
    return free, lo, hi, pinned, build


def _spec_for(kind: str, marginals, dep: Dependence) -> ModelSpec:
    if kind == "ssd":
        return ModelSpec.ssd(*marginals, dep)
    if kind == "lssd":
        return ModelSpec.lssd(*marginals, dep)
    return ModelSpec.bbsd(*marginals, dep)


def _correlation_objective(kind, marginals, free, pinned, build,
                           target_sign_flip: bool,
                           rho_target: float) -> Callable[[np.ndarray], float]:
    def fn(x: np.ndarray) -> float:
        params = dict(zip(free, x))
        params.update(pinned)
        spec = _spec_for(kind, marginals, build(params))
        if not validate(spec).ok:
            return _PENALTY
        rho = model_correlation(spec)
        if target_sign_flip:
            return -rho
        return (rho - rho_target) ** 2

    return fn


def fit_dependence(kind: str, marginals: tuple[VGMarginal, VGMarginal],
                   rho_target: float,
                   pinned: Mapping[str, float] | None = None,
                   init: Mapping[str, float] | None = None,
                   n_starts: int = 8, seed: int = 0) -> DependenceFit:
    """Fit the dependence record so the model correlation hits the target.

    The feasible box keeps every candidate spec valid (for ``ssd``/``lssd``
    the common shape A stays below B/max(alpha_j); for ``bbsd`` the common
    variance rate stays above max(alpha_j)).  When the target exceeds the
    maximal attainable correlation the fit returns the closest achievable
    value with ``shortfall=True`` and reports that maximum.
    """
    if abs(rho_target) > 1.0:
        raise ValueError("|rho_target| must be <= 1")
    free, lo_map, hi_map, pinned, build = _dependence_space(kind, marginals,
                                                            pinned)
    lo = np.array([lo_map[n] for n in free])
    hi = np.array([hi_map[n] for n in free])
    if np.any(lo >= hi):
        raise ValueError("empty feasible dependence box for these marginals")
    init_vec = None
    if init is not None:
        init_vec = np.array([init[n] for n in free])

    fn = _correlation_objective(kind, marginals, free, pinned, build,
                                False, rho_target)
    search = _multistart_minimize(fn, lo, hi, init_vec, n_starts, seed)
    params = {k: float(v) for k, v in zip(free, search.params)}
    params.update(pinned)
    dep = build(params)
    spec = _spec_for(kind, marginals, dep)
    achieved = model_correlation(spec)

    max_rho = max_attainable_correlation(kind, marginals, pinned=pinned,
                                         n_starts=n_starts, seed=seed)
    shortfall = rho_target > max_rho + 1e-6 or abs(achieved - rho_target) > 1e-3

    alternatives = []
    for cand, obj in search.all_solutions:
        if obj <= search.objective + 1e-6:
            p = {k: float(v) for k, v in zip(free, cand)}
            p.update(pinned)
            rec = build(p)
            if rec != dep and all(not _records_close(rec, other)
                                  for other in alternatives):
                alternatives.append(rec)
    return DependenceFit(kind, dep, achieved, rho_target, search.objective,
                         search.converged, shortfall, max_rho,
                         tuple(alternatives))


def _records_close(a: Dependence, b: Dependence, tol: float = 1e-6) -> bool:
    if type(a) is not type(b):
        return False
    va = np.array([getattr(a, f) for f in a.__dataclass_fields__])
    vb = np.array([getattr(b, f) for f in b.__dataclass_fields__])
    return bool(np.all(np.abs(va - vb) <= tol * (1.0 + np.abs(va))))


def max_attainable_correlation(kind: str,
                               marginals: tuple[VGMarginal, VGMarginal],
                               pinned: Mapping[str, float] | None = None,
                               n_starts: int = 8, seed: int = 0) -> float:
    """Supremum of the model correlation over the feasible dependence box."""
    free, lo_map, hi_map, pinned, build = _dependence_space(kind, marginals,
                                                            pinned)
    lo = np.array([lo_map[n] for n in free])
    hi = np.array([hi_map[n] for n in free])
    fn = _correlation_objective(kind, marginals, free, pinned, build,
                                True, 0.0)
    search = _multistart_minimize(fn, lo, hi, None, n_starts, seed)
    return -search.objective


# ---------------------------------------------------------------------------
# Historical correlation target
# ---------------------------------------------------------------------------


def historical_correlation(series1, series2) -> float:
    """Pearson correlation of one-step log returns of two price series."""
    p1 = np.asarray(series1, dtype=float)
    p2 = np.asarray(series2, dtype=float)
    if p1.shape != p2.shape or p1.ndim != 1:
        raise ValueError(f"aligned 1-d series required, got shapes "
                         f"{p1.shape} and {p2.shape}")
    if p1.size < 3:
        raise ValueError("need at least 3 aligned prices")
    if np.any(p1 <= 0.0) or np.any(p2 <= 0.0):
        raise ValueError("prices must be strictly positive")
    r1 = np.diff(np.log(p1))
    r2 = np.diff(np.log(p2))
    for r in (r1, r2):
        if r.std() <= 1e-12 * (1.0 + float(np.abs(r).max())):
            raise ValueError("zero-variance log-return series: correlation "
                             "undefined")
    return float(np.corrcoef(r1, r2)[0, 1])
