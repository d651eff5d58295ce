"""Parameter containers and closed-form evaluations for a pair of
variance-gamma drivers coupled through self-decomposable gamma clocks.

The common building block is a pair of gamma subordinators that "run
together" up to a random lag: the second clock is a scaled copy of the
first plus an independent remainder process,

    H2(t) = a * H1(t) + Z_a(t),        0 < a < 1,

where Z_a is the a-remainder of the gamma law (the residual in the
self-decomposability factorisation phi(u) = phi(a*u) * chi_a(u)).  A single
parameter ``a`` therefore controls how tightly the two markets move.
Three dependence structures are built on top of this pair:

* ``ssd``  - dependence enters only through the coupled clocks.
* ``lssd`` - adds a correlated Brownian pair evaluated at the coupled
  clocks on top of the ``ssd`` structure.
* ``bbsd`` - each asset is the sum of an idiosyncratic subordinated
  Brownian motion and a loaded common one; convolution constraints on the
  component parameters keep each marginal law variance-gamma.

Everything in this module is pure and closed-form: characteristic
functions, linear correlations, feasibility validation and martingale
drift corrections.  All containers are frozen dataclasses, so instances
are safe to share across threads.

Characteristic-function evaluators accept real or complex scalars and
numpy arrays; complex powers always use the principal logarithm and are
evaluated in exponent form exp(-shape * Log(.)) to avoid overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

ComplexArg = Union[float, complex, np.ndarray]

__all__ = [
    "ComplexArg",
    "VGMarginal",
    "SSDDependence",
    "LSSDDependence",
    "BBSDDependence",
    "BBSDInternal",
    "ModelSpec",
    "Violation",
    "ValidationReport",
    "FeasibilityError",
    "MartingaleError",
    "ChfStripError",
    "validate",
    "gamma_chf",
    "za_chf",
    "marginal_vg_chf",
    "joint_chf",
    "ssd_joint_chf",
    "lssd_joint_chf",
    "bbsd_joint_chf",
    "model_correlation",
    "bbsd_correlation_from_components",
    "drift_correction",
    "derive_bbsd_internal",
    "ssd_idio_shapes",
]


class FeasibilityError(ValueError):
    """Model parameters violate a feasibility constraint."""


class MartingaleError(FeasibilityError):
    """The martingale drift correction is undefined for these parameters."""


class ChfStripError(ValueError):
    """A complex chf argument left the analyticity strip of the law."""


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VGMarginal:
    """Variance-gamma law of one asset's log driver.

    mu    - drift of the subordinated Brownian motion per unit time.
    sigma - diffusion coefficient, > 0.
    alpha - variance rate of the unit-mean gamma time change, > 0.
    """

    mu: float
    sigma: float
    alpha: float

    @property
    def variance(self) -> float:
        """Var of the unit-time driver: sigma^2 + mu^2 * alpha."""
        return self.sigma**2 + self.mu**2 * self.alpha

    @property
    def martingale_margin(self) -> float:
        """1 - mu*alpha - sigma^2*alpha/2; must be > 0 for a drift correction."""
        return 1.0 - self.mu * self.alpha - 0.5 * self.sigma**2 * self.alpha


@dataclass(frozen=True)
class SSDDependence:
    """Clock-coupling parameters: common gamma shape A, rate B, lag a.

    The per-asset idiosyncratic gamma shapes A_j = B/alpha_j - A are always
    derived (see :func:`ssd_idio_shapes`), which makes the unit-mean
    condition on the composite time change hold by construction.  B is
    redundant given that normalisation and defaults to 1.
    """

    A: float
    a: float
    B: float = 1.0


@dataclass(frozen=True)
class LSSDDependence:
    """Clock coupling plus correlation rho of the common Brownian pair."""

    A: float
    a: float
    rho: float
    B: float = 1.0


@dataclass(frozen=True)
class BBSDDependence:
    """Loadings a1, a2 on the common components, lag a, and the common
    subordinator variance rate nuR (one rate serves both common legs)."""

    a1: float
    a2: float
    a: float
    nuR: float


@dataclass(frozen=True)
class BBSDInternal:
    """Component parameters of the two-part ``bbsd`` construction.

    Asset j is X_j + a_j * R_j where X_j is a subordinated BM with
    (beta_j, gamma_j, nu_j) and R_j one with (betaR_j, gammaR_j, nuR).
    Derived from the marginals and the dependence record; see
    :func:`derive_bbsd_internal`.
    """

    betaR1: float
    betaR2: float
    gammaR1: float
    gammaR2: float
    beta1: float
    beta2: float
    gamma1: float
    gamma2: float
    nu1: float
    nu2: float


Dependence = Union[SSDDependence, LSSDDependence, BBSDDependence]

_KIND_FOR_DEP = {
    SSDDependence: "ssd",
    LSSDDependence: "lssd",
    BBSDDependence: "bbsd",
}


@dataclass(frozen=True)
class ModelSpec:
    """One of the three models: a pair of marginals plus its dependence.

    ``limit_mode`` relaxes the strict 0 < a < 1 range to allow a == 1
    exactly, which degenerates the clock pair to a single shared clock
    (the un-lagged version of each model); used for regression tests.
    """

    kind: str
    marginals: tuple[VGMarginal, VGMarginal]
    dependence: Dependence
    internal: BBSDInternal | None = None
    limit_mode: bool = False

    @classmethod
    def ssd(cls, m1: VGMarginal, m2: VGMarginal, dep: SSDDependence,
            limit_mode: bool = False) -> "ModelSpec":
        return cls("ssd", (m1, m2), dep, None, limit_mode)

    @classmethod
    def lssd(cls, m1: VGMarginal, m2: VGMarginal, dep: LSSDDependence,
             limit_mode: bool = False) -> "ModelSpec":
        return cls("lssd", (m1, m2), dep, None, limit_mode)

    @classmethod
    def bbsd(cls, m1: VGMarginal, m2: VGMarginal, dep: BBSDDependence,
             limit_mode: bool = False) -> "ModelSpec":
        """Build from marginals; component parameters are derived, never
        user input, so the spec cannot be internally inconsistent."""
        try:
            internal = derive_bbsd_internal((m1, m2), dep)
        except FeasibilityError:
            internal = None  # validate() reports the violation
        return cls("bbsd", (m1, m2), dep, internal, limit_mode)

    @classmethod
    def bbsd_from_components(cls, internal: BBSDInternal, dep: BBSDDependence,
                             limit_mode: bool = False) -> "ModelSpec":
        """Build directly from component parameters.

        The marginals are the ones implied by the additive relations
        mu_j = beta_j + a_j*betaR_j, sigma_j^2 = gamma_j^2 + a_j^2*gammaR_j^2
        and alpha_j = nu_j*nuR/(nu_j + nuR).  If the components do not
        satisfy the full convolution conditions the model is still well
        defined (and simulable), but its marginals are only approximately
        variance-gamma; validate() notes the residual.
        """
        mus = (internal.beta1 + dep.a1 * internal.betaR1,
               internal.beta2 + dep.a2 * internal.betaR2)
        sigmas = (math.sqrt(internal.gamma1**2 + dep.a1**2 * internal.gammaR1**2),
                  math.sqrt(internal.gamma2**2 + dep.a2**2 * internal.gammaR2**2))
        alphas = (internal.nu1 * dep.nuR / (internal.nu1 + dep.nuR),
                  internal.nu2 * dep.nuR / (internal.nu2 + dep.nuR))
        marginals = (VGMarginal(mus[0], sigmas[0], alphas[0]),
                     VGMarginal(mus[1], sigmas[1], alphas[1]))
        return cls("bbsd", marginals, dep, internal, limit_mode)

    def with_lag(self, a: float, limit_mode: bool = False) -> "ModelSpec":
        """Same model with a different lag parameter a."""
        dep = replace(self.dependence, a=a)
        if self.kind == "bbsd":
            return ModelSpec.bbsd(*self.marginals, dep, limit_mode)
        return ModelSpec(self.kind, self.marginals, dep, None, limit_mode)


# ---------------------------------------------------------------------------
# Derived quantities and validation
# ---------------------------------------------------------------------------


def ssd_idio_shapes(marginals: tuple[VGMarginal, VGMarginal],
                    dep: SSDDependence | LSSDDependence) -> tuple[float, float]:
    """Idiosyncratic gamma shapes A_j = B/alpha_j - A of the clock mixture."""
    return (dep.B / marginals[0].alpha - dep.A,
            dep.B / marginals[1].alpha - dep.A)


def derive_bbsd_internal(marginals: tuple[VGMarginal, VGMarginal],
                         dep: BBSDDependence) -> BBSDInternal:
    """Component parameters implied by the marginals and the loadings.

    For a_j != 0 the common leg takes betaR_j = alpha_j*mu_j/(nuR*a_j) and
    gammaR_j = sigma_j*sqrt(alpha_j/nuR)/|a_j|, the idiosyncratic leg keeps
    the rest: beta_j = mu_j*(1 - alpha_j/nuR), gamma_j^2 = sigma_j^2*(1 -
    alpha_j/nuR), nu_j = alpha_j*nuR/(nuR - alpha_j).  Feasibility requires
    nuR > alpha_j.  A zero loading removes the common leg for that asset,
    in which case the idiosyncratic component carries the whole marginal.
    """
    out: list[float] = []
    idio: list[tuple[float, float, float]] = []
    for j, (m, aj) in enumerate(zip(marginals, (dep.a1, dep.a2)), start=1):
        if aj == 0.0:
            out.extend([0.0, 0.0])
            idio.append((m.mu, m.sigma, m.alpha))
            continue
        if dep.nuR <= m.alpha:
            raise FeasibilityError(
                f"nu_{j} = alpha_{j}*nuR/(nuR - alpha_{j}) <= 0: requires "
                f"nuR > alpha_{j} ({dep.nuR:.6g} <= {m.alpha:.6g})")
        betaR = m.alpha * m.mu / (dep.nuR * aj)
        gammaR = m.sigma * math.sqrt(m.alpha / dep.nuR) / abs(aj)
        beta = m.mu * (1.0 - m.alpha / dep.nuR)
        gamma_sq = m.sigma**2 * (1.0 - m.alpha / dep.nuR)
        nu = m.alpha * dep.nuR / (dep.nuR - m.alpha)
        out.extend([betaR, gammaR])
        idio.append((beta, math.sqrt(gamma_sq), nu))
    (b1, s1, n1), (b2, s2, n2) = idio
    return BBSDInternal(betaR1=out[0], gammaR1=out[1], betaR2=out[2],
                        gammaR2=out[3], beta1=b1, beta2=b2, gamma1=s1,
                        gamma2=s2, nu1=n1, nu2=n2)


@dataclass(frozen=True)
class Violation:
    parameter: str
    constraint: str
    value: float
    bound: float

    def __str__(self) -> str:
        return (f"{self.parameter} = {self.value:.6g} violates "
                f"{self.constraint} (bound {self.bound:.6g})")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "feasible" + (f" ({'; '.join(self.notes)})" if self.notes else "")
        return "; ".join(str(v) for v in self.violations)


def _marginal_violations(m: VGMarginal, j: int) -> list[Violation]:
    out = []
    if not m.sigma > 0.0:
        out.append(Violation(f"sigma_{j}", "sigma > 0", m.sigma, 0.0))
    if not m.alpha > 0.0:
        out.append(Violation(f"alpha_{j}", "alpha > 0", m.alpha, 0.0))
    if not m.martingale_margin > 0.0:
        out.append(Violation(
            f"marginal_{j}", "1 - mu*alpha - sigma^2*alpha/2 > 0",
            m.martingale_margin, 0.0))
    return out


def validate(spec: ModelSpec) -> ValidationReport:
    """Check every feasibility constraint; reports instead of raising.

    The report lists each violated constraint with the offending parameter
    and its bound; it is empty exactly when the spec is feasible.
    """
    v: list[Violation] = []
    notes: list[str] = []
    m1, m2 = spec.marginals
    v += _marginal_violations(m1, 1)
    v += _marginal_violations(m2, 2)

    dep = spec.dependence
    expected = _KIND_FOR_DEP.get(type(dep))
    if expected != spec.kind:
        v.append(Violation("kind", f"dependence record matches kind "
                           f"({expected!r} != {spec.kind!r})", 0.0, 0.0))
        return ValidationReport(tuple(v))

    a_hi = 1.0 if spec.limit_mode else 1.0 - 1e-15
    if isinstance(dep, (SSDDependence, LSSDDependence)):
        if not dep.A > 0.0:
            v.append(Violation("A", "A > 0", dep.A, 0.0))
        if not dep.B > 0.0:
            v.append(Violation("B", "B > 0", dep.B, 0.0))
        if not 0.0 < dep.a <= a_hi:
            v.append(Violation("a", "0 < a < 1 (a = 1 only in limit mode)",
                               dep.a, 1.0))
        if dep.A > 0.0 and dep.B > 0.0:
            for j, m in enumerate(spec.marginals, start=1):
                if m.alpha > 0.0 and m.alpha > dep.B / dep.A:
                    v.append(Violation(
                        f"alpha_{j}", "0 < alpha_j <= B/A (idiosyncratic "
                        "shape A_j >= 0)", m.alpha, dep.B / dep.A))
            if all(m.alpha > 0 for m in spec.marginals):
                a1s, a2s = ssd_idio_shapes(spec.marginals, dep)
                for j, (aj, m) in enumerate(zip((a1s, a2s), spec.marginals), 1):
                    mean = m.alpha * (aj + dep.A) / dep.B
                    if abs(mean - 1.0) > 1e-12:
                        v.append(Violation(
                            f"E[G_{j}(1)]", "unit-mean time change", mean, 1.0))
                    else:
                        notes.append(f"E[G_{j}(1)] = 1 holds")
        if dep.B != 1.0:
            notes.append("B != 1: marginal variance rate is alpha_j/B, and "
                         "forward drift corrections assume B = 1")
        if isinstance(dep, LSSDDependence) and not abs(dep.rho) <= 1.0:
            v.append(Violation("rho", "|rho| <= 1", dep.rho, 1.0))
    else:
        if not dep.nuR > 0.0:
            v.append(Violation("nuR", "nuR > 0", dep.nuR, 0.0))
        if not 0.0 < dep.a <= a_hi:
            v.append(Violation("a", "0 < a < 1 (a = 1 only in limit mode)",
                               dep.a, 1.0))
        for j, (m, aj) in enumerate(zip(spec.marginals, (dep.a1, dep.a2)), 1):
            if aj != 0.0 and m.alpha > 0.0 and dep.nuR <= m.alpha:
                v.append(Violation(
                    f"nu_{j}", f"nu_{j} = alpha_{j}*nuR/(nuR - alpha_{j}) > 0 "
                    f"(requires nuR > alpha_{j})",
                    dep.nuR - m.alpha, 0.0))
        if spec.internal is None and not v:
            v.append(Violation("internal", "component parameters derivable",
                               0.0, 0.0))
        if spec.internal is not None:
            it = spec.internal
            for j, (m, aj, bR, gR) in enumerate(
                    zip(spec.marginals, (dep.a1, dep.a2),
                        (it.betaR1, it.betaR2), (it.gammaR1, it.gammaR2)), 1):
                if aj == 0.0:
                    continue
                res_b = m.alpha * m.mu - dep.nuR * aj * bR
                res_g = m.alpha * m.sigma**2 - dep.nuR * aj**2 * gR**2
                if abs(res_b) > 1e-10 or abs(res_g) > 1e-10:
                    notes.append(
                        f"asset {j}: convolution residuals ({res_b:.3g}, "
                        f"{res_g:.3g}); marginal is only approximately "
                        "variance-gamma")
    return ValidationReport(tuple(v), tuple(notes))


def _require_feasible(spec: ModelSpec) -> None:
    report = validate(spec)
    if not report.ok:
        raise FeasibilityError(f"infeasible {spec.kind} spec: {report}")


# ---------------------------------------------------------------------------
# Characteristic functions
# ---------------------------------------------------------------------------


def _as_complex(u: ComplexArg, what: str) -> np.ndarray:
    arr = np.asarray(u, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite chf argument for {what}")
    return arr


def _principal_power(base: np.ndarray, exponent: float, what: str) -> np.ndarray:
    if np.any(base.real <= 0.0):
        raise ChfStripError(
            f"{what}: argument outside the analyticity strip "
            "(Re(1 - i*u/rate) <= 0)")
    return np.exp(exponent * np.log(base))


def _maybe_scalar(res: np.ndarray, u: ComplexArg):
    return complex(res) if np.ndim(u) == 0 else res


def gamma_chf(shape: float, rate: float, u: ComplexArg) -> ComplexArg:
    """Characteristic function (1 - i*u/rate)^(-shape) of a gamma law.

    Exact at u = 0; shape 0 denotes the point mass at 0 (chf identically 1).
    Principal branch; complex u must keep Re(1 - i*u/rate) > 0.
    """
    if shape < 0.0 or rate <= 0.0:
        raise ValueError(f"gamma_chf needs shape >= 0 and rate > 0, got "
                         f"({shape}, {rate})")
    arr = _as_complex(u, "gamma_chf")
    val = 1.0 - 1j * arr / rate
    return _maybe_scalar(_principal_power(val, -shape, "gamma_chf"), u)


def za_chf(A: float, B: float, a: float, t: float, u: ComplexArg) -> ComplexArg:
    """chf ((B - i*u)/(B - i*a*u))^(-t*A) of the gamma a-remainder at time t.

    This is the residual factor in the self-decomposability factorisation
    of the gamma(t*A, B) law: gamma_chf(t*A, B, u) =
    gamma_chf(t*A, B, a*u) * za_chf(A, B, a, t, u).  Degenerates to 1 as
    a -> 1.
    """
    if A <= 0.0 or B <= 0.0 or t <= 0.0:
        raise ValueError("za_chf needs A, B, t > 0")
    if not 0.0 < a <= 1.0:
        raise ValueError(f"za_chf needs 0 < a <= 1, got {a}")
    arr = _as_complex(u, "za_chf")
    num = B - 1j * arr
    den = B - 1j * a * arr
    if np.any(num.real <= 0.0) or np.any(den.real <= 0.0):
        raise ChfStripError("za_chf: argument outside the analyticity strip")
    res = np.exp(-t * A * (np.log(num) - np.log(den)))
    return _maybe_scalar(res, u)


def _psi(m: VGMarginal, u: np.ndarray) -> np.ndarray:
    """Brownian exponent psi(u) = u*mu + i*sigma^2*u^2/2 of one driver."""
    return u * m.mu + 0.5j * m.sigma**2 * u * u


def marginal_vg_chf(m: VGMarginal, t: float, u: ComplexArg) -> ComplexArg:
    """Variance-gamma chf (1 - i*alpha*(u*mu + i*sigma^2*u^2/2))^(-t/alpha).

    For complex u the argument must stay in the strip where the base has
    positive real part, else :class:`ChfStripError` is raised.
    """
    if t <= 0.0:
        raise ValueError("marginal_vg_chf needs t > 0")
    arr = _as_complex(u, "marginal_vg_chf")
    val = 1.0 - 1j * m.alpha * _psi(m, arr)
    return _maybe_scalar(_principal_power(val, -t / m.alpha, "marginal_vg_chf"), u)


def ssd_joint_chf(spec: ModelSpec, t: float, u1: ComplexArg,
                  u2: ComplexArg) -> ComplexArg:
    """Joint chf of the clock-coupled model at time t.

    Product of the two idiosyncratic clock factors, the remainder-clock
    factor (argument scaled by alpha_2, the weight the second composite
    clock puts on the lagged common clock) and the common-clock factor.
    """
    _require_feasible(spec)
    m1, m2 = spec.marginals
    dep = spec.dependence
    a1s, a2s = ssd_idio_shapes(spec.marginals, dep)
    v1 = _as_complex(u1, "ssd_joint_chf")
    v2 = _as_complex(u2, "ssd_joint_chf")
    p1, p2 = _psi(m1, v1), _psi(m2, v2)
    res = (gamma_chf(t * a1s, dep.B / m1.alpha, p1)
           * gamma_chf(t * a2s, dep.B / m2.alpha, p2)
           * za_chf(dep.A, dep.B, dep.a, t, m2.alpha * p2)
           * gamma_chf(t * dep.A, dep.B, m1.alpha * p1 + dep.a * m2.alpha * p2))
    return res if (np.ndim(u1) or np.ndim(u2)) else complex(res)


def lssd_joint_chf(spec: ModelSpec, t: float, u1: ComplexArg,
                   u2: ComplexArg) -> ComplexArg:
    """Joint chf of the Brownian-correlated clock-coupled model.

    The common-clock factor carries the drift vector (alpha_1*mu_1,
    a*alpha_2*mu_2) plus the quadratic form of the correlated Brownian
    pair; the leading asset keeps the un-lagged share of its own variance
    through the (1 - a) term.
    """
    _require_feasible(spec)
    m1, m2 = spec.marginals
    dep = spec.dependence
    a1s, a2s = ssd_idio_shapes(spec.marginals, dep)
    v1 = _as_complex(u1, "lssd_joint_chf")
    v2 = _as_complex(u2, "lssd_joint_chf")
    p1, p2 = _psi(m1, v1), _psi(m2, v2)
    al1, al2 = m1.alpha, m2.alpha
    cross = math.sqrt(al1 * al2) * m1.sigma * m2.sigma * dep.rho
    quad = (v1 * v1 * al1 * m1.sigma**2 + 2.0 * v1 * v2 * cross
            + v2 * v2 * al2 * m2.sigma**2)
    arg_h = (v1 * al1 * m1.mu + v2 * dep.a * al2 * m2.mu
             + 0.5j * (v1 * v1 * al1 * m1.sigma**2 * (1.0 - dep.a)
                       + dep.a * quad))
    res = (gamma_chf(t * a1s, dep.B / al1, p1)
           * gamma_chf(t * a2s, dep.B / al2, p2)
           * gamma_chf(t * dep.A, dep.B, arg_h)
           * za_chf(dep.A, dep.B, dep.a, t, al2 * p2))
    return res if (np.ndim(u1) or np.ndim(u2)) else complex(res)


def bbsd_joint_chf(spec: ModelSpec, t: float, u1: ComplexArg,
                   u2: ComplexArg) -> ComplexArg:
    """Joint chf of the loaded-common-component model.

    Two idiosyncratic subordinated-BM factors times the common-pair chf
    evaluated at the loaded arguments (a1*u1, a2*u2); the common pair
    itself splits into a shared-clock factor and a remainder factor.
    """
    _require_feasible(spec)
    dep = spec.dependence
    it = spec.internal
    v1 = _as_complex(u1, "bbsd_joint_chf")
    v2 = _as_complex(u2, "bbsd_joint_chf")
    w1, w2 = dep.a1 * v1, dep.a2 * v2
    arg_h = (w1 * it.betaR1 + w2 * it.betaR2 * dep.a
             + 0.5j * (w1 * w1 * it.gammaR1**2
                       + 2.0 * w1 * w2 * it.gammaR1 * it.gammaR2 * dep.a
                       + w2 * w2 * dep.a * it.gammaR2**2))
    arg_z = w2 * it.betaR2 + 0.5j * w2 * w2 * it.gammaR2**2
    rate_r = 1.0 / dep.nuR
    res = (gamma_chf(t / it.nu1, 1.0 / it.nu1,
                     v1 * it.beta1 + 0.5j * v1 * v1 * it.gamma1**2)
           * gamma_chf(t / it.nu2, 1.0 / it.nu2,
                       v2 * it.beta2 + 0.5j * v2 * v2 * it.gamma2**2)
           * gamma_chf(t * rate_r, rate_r, arg_h)
           * za_chf(rate_r, rate_r, dep.a, t, arg_z))
    return res if (np.ndim(u1) or np.ndim(u2)) else complex(res)


_JOINT_CHF = {"ssd": ssd_joint_chf, "lssd": lssd_joint_chf,
              "bbsd": bbsd_joint_chf}


def joint_chf(spec: ModelSpec, t: float, u1: ComplexArg,
              u2: ComplexArg) -> ComplexArg:
    """Joint chf of (Y1(t), Y2(t)) for any of the three models."""
    return _JOINT_CHF[spec.kind](spec, t, u1, u2)


# ---------------------------------------------------------------------------
# Moments, correlation, drift correction
# ---------------------------------------------------------------------------


def model_correlation(spec: ModelSpec, t: float = 1.0) -> float:
    """Closed-form linear correlation of (Y1(t), Y2(t)).

    Evaluated from the general covariance formulas with the gamma-clock
    moments E[H1(t)] and Var[H1(t)]; with gamma subordinators the time
    dependence cancels, so the value is t-free.
    """
    _require_feasible(spec)
    m1, m2 = spec.marginals
    dep = spec.dependence
    if spec.kind in ("ssd", "lssd"):
        mean_h = dep.A * t / dep.B
        var_h = dep.A * t / dep.B**2
        var1 = t * (m1.sigma**2 + m1.mu**2 * m1.alpha / dep.B)
        var2 = t * (m2.sigma**2 + m2.mu**2 * m2.alpha / dep.B)
        cov = dep.a * m1.mu * m2.mu * m1.alpha * m2.alpha * var_h
        if spec.kind == "lssd":
            cov += (dep.a * dep.rho * m1.sigma * m2.sigma
                    * math.sqrt(m1.alpha * m2.alpha) * mean_h)
    else:
        it = spec.internal
        mean_h = t
        var_h = dep.nuR * t
        var1 = t * m1.variance
        var2 = t * m2.variance
        cov = dep.a1 * dep.a2 * dep.a * (it.betaR1 * it.betaR2 * var_h
                                         + it.gammaR1 * it.gammaR2 * mean_h)
    if var1 <= 0.0 or var2 <= 0.0:
        raise ValueError("zero marginal variance: correlation undefined")
    return float(cov / math.sqrt(var1 * var2))


def bbsd_correlation_from_components(dep: BBSDDependence,
                                     internal: BBSDInternal) -> float:
    """Correlation of the two-part construction from its component moments.

    Uses the exact per-unit-time variances Var[Y_j] = gamma_j^2 +
    beta_j^2*nu_j + a_j^2*(gammaR_j^2 + betaR_j^2*nuR), which coincides
    with :func:`model_correlation` whenever the component parameters were
    derived exactly from a marginal pair, but stays meaningful for
    externally supplied (e.g. rounded) component sets too.
    """
    it = internal
    var1 = (it.gamma1**2 + it.beta1**2 * it.nu1
            + dep.a1**2 * (it.gammaR1**2 + it.betaR1**2 * dep.nuR))
    var2 = (it.gamma2**2 + it.beta2**2 * it.nu2
            + dep.a2**2 * (it.gammaR2**2 + it.betaR2**2 * dep.nuR))
    if var1 <= 0.0 or var2 <= 0.0:
        raise ValueError("zero component variance: correlation undefined")
    cov = dep.a1 * dep.a2 * dep.a * (it.betaR1 * it.betaR2 * dep.nuR
                                     + it.gammaR1 * it.gammaR2)
    return float(cov / math.sqrt(var1 * var2))


def drift_correction(m: VGMarginal) -> float:
    """Martingale drift omega = ln(1 - mu*alpha - sigma^2*alpha/2)/alpha.

    Chosen so that exp(omega*t) * E[exp(Y(t))] = 1 for every t, i.e. the
    exponential forward F(0)*exp(omega*t + Y(t)) is driftless.
    """
    margin = m.martingale_margin
    if margin <= 0.0:
        raise MartingaleError(
            "martingale-infeasible marginal: 1 - mu*alpha - sigma^2*alpha/2 "
            f"= {margin:.6g} <= 0")
    return math.log(margin) / m.alpha
