"""Command-line front end wiring data, calibration, simulation and
pricing into reproducible batch runs.

Commands: ``calibrate``, ``price``, ``simulate``, ``validate``.  Global
flags (``--config``, ``--seed``, ``--model``, ``--paths``, ``--out``)
override the TOML config file.  Exit codes: 0 success, 2 parse or file
errors, 3 infeasible parameters, 4 optimizer or quadrature
non-convergence.

Every command writes a manifest (config hash, artifact version, seed)
next to its outputs, and identical config + seed reproduce byte-identical
outputs: <out>/{calibration.json, prices.csv, paths.bin, hpaths.csv,
report.txt, manifest.json}.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import market_data
from .calibration import (
    CalibrationResult,
    ConvergenceError,
    fit_dependence,
    fit_marginal_vg,
    historical_correlation,
)
from .market_data import (
    ARTIFACT_VERSION,
    DataFileError,
    SchemaError,
    load_calibration,
    load_forward_history,
    load_option_quotes,
    save_calibration,
)
from .models import (
    BBSDDependence,
    FeasibilityError,
    LSSDDependence,
    ModelSpec,
    SSDDependence,
    gamma_chf,
    joint_chf,
    model_correlation,
    validate,
    za_chf,
)
from .pricing import (
    BranchContinuityError,
    DampingError,
    FourierGrid,
    IntegrationError,
    MarketFrame,
    StrikeRangeError,
    carr_madan_calls,
    cf_spread_lower_bound,
    mc_spread_prices,
    mc_vanilla_price,
)
from .sampling import (
    RngStream,
    TimeGrid,
    sample_a_remainder,
    sample_gamma,
    sample_polya,
    sample_sd_subordinator_pair,
    simulate_terminals,
    simulate_paths,
    to_forward_prices,
    write_path_dump,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGENCE = 4

DEFAULT_SEED = 12345
_KIND_DEPS = {"ssd": SSDDependence, "lssd": LSSDDependence,
              "bbsd": BBSDDependence}


class ConfigError(ValueError):
    """Invalid or missing run configuration."""


@dataclass
class RunConfig:
    """Resolved run settings: config file merged with flag overrides."""

    model: str = "ssd"
    quotes: str | None = None
    history: str | None = None
    calibration: str | None = None
    out: str = "out"
    r: float = 0.015
    f0: dict = field(default_factory=dict)
    assets: list = field(default_factory=list)
    seed: int = DEFAULT_SEED
    n_paths: int = 100_000
    n_steps: int = 32
    maturity: float = 1.0
    strike_window: float = 10.0
    strikes: list | None = None
    rho_target: float | None = None
    n_starts: int = 8
    fourier: dict = field(default_factory=dict)
    pinned: dict = field(default_factory=dict)
    dependence: dict = field(default_factory=dict)

    @classmethod
    def load(cls, args: argparse.Namespace) -> "RunConfig":
        raw = {}
        if args.config:
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            try:
                raw = tomli.loads(path.read_text(encoding="utf-8"))
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        cfg = cls()
        known = set(cfg.__dataclass_fields__)
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        # flags win over the file
        if getattr(args, "model", None):
            cfg.model = args.model
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "paths", None) is not None:
            cfg.n_paths = args.paths
        if getattr(args, "out", None):
            cfg.out = args.out
        cfg.validate_self()
        return cfg

    def validate_self(self) -> None:
        if self.model not in _KIND_DEPS:
            raise ConfigError(f"model must be one of ssd|lssd|bbsd, "
                              f"got {self.model!r}")
        if self.n_paths < 1000:
            raise ConfigError(f"n_paths must be >= 1000, got {self.n_paths}")
        if not self.assets:
            self.assets = sorted(self.f0) if self.f0 else []

    def asset_pair(self) -> tuple[str, str]:
        if len(self.assets) != 2:
            raise ConfigError("config needs exactly two assets (set [f0] "
                              "with two entries or 'assets = [..]')")
        return tuple(self.assets)

    def f0_pair(self) -> tuple[float, float]:
        a1, a2 = self.asset_pair()
        try:
            return (float(self.f0[a1]), float(self.f0[a2]))
        except KeyError as exc:
            raise ConfigError(f"missing f0 entry for asset {exc}") from exc

    def vanilla_grid(self) -> FourierGrid:
        return FourierGrid(self.fourier.get("n_points", 4096),
                           self.fourier.get("eta", 0.25),
                           self.fourier.get("damping_vanilla", 1.5))

    def spread_grid(self) -> FourierGrid:
        return FourierGrid(self.fourier.get("n_points", 4096),
                           self.fourier.get("eta", 0.25),
                           self.fourier.get("damping_spread", 0.75))

    def digest(self) -> str:
        blob = json.dumps({k: getattr(self, k)
                           for k in sorted(self.__dataclass_fields__)},
                          sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _write_manifest(cfg: RunConfig, command: str) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "config_sha256": cfg.digest(),
           "seed": cfg.seed, "artifact_version": ARTIFACT_VERSION}
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_dependence(kind: str, params: dict):
    try:
        return _KIND_DEPS[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"bad dependence parameters for {kind}: "
                          f"{exc}") from exc


def _spec_from_result(result: CalibrationResult) -> ModelSpec:
    spec = result.spec()
    report = validate(spec)
    if not report.ok:
        raise FeasibilityError(f"calibration artifact is infeasible: "
                               f"{report}")
    return spec


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


def cmd_calibrate(cfg: RunConfig) -> int:
    if not cfg.quotes or not cfg.history:
        raise ConfigError("calibrate needs 'quotes' and 'history' paths")
    quote_set = load_option_quotes(cfg.quotes, cfg.f0, cfg.r,
                                   cfg.strike_window)
    history = load_forward_history(cfg.history)
    assets = cfg.asset_pair()

    fits = []
    for asset in assets:
        asset_quotes = quote_set.for_asset(asset)
        fits.append(fit_marginal_vg(asset_quotes, cfg.f0[asset], cfg.r,
                                    grid=cfg.vanilla_grid(), seed=cfg.seed,
                                    n_starts=cfg.n_starts))
    marginals = tuple(f.marginal for f in fits)

    if cfg.rho_target is not None:
        rho_mkt = float(cfg.rho_target)
    else:
        rho_mkt = historical_correlation(history.series(assets[0]),
                                         history.series(assets[1]))
    dep_fit = fit_dependence(cfg.model, marginals, rho_mkt,
                             pinned=cfg.pinned or None, seed=cfg.seed,
                             n_starts=cfg.n_starts)

    result = CalibrationResult(
        kind=cfg.model,
        assets=assets,
        marginals=marginals,
        dependence=dep_fit.dependence,
        rho_mod=dep_fit.rho_mod,
        rho_mkt=rho_mkt,
        marginal_objectives=tuple(f.objective for f in fits),
        dependence_objective=dep_fit.objective,
        per_quote_errors=tuple(f.per_quote_errors for f in fits),
        solver={
            "marginal_converged": [f.converged for f in fits],
            "marginal_boundary": [f.boundary for f in fits],
            "marginal_iterations": [f.iterations for f in fits],
            "n_starts": fits[0].n_starts,
            "dependence_converged": dep_fit.converged,
            "shortfall": dep_fit.shortfall,
            "max_attainable": dep_fit.max_attainable,
            "pinned": dict(cfg.pinned),
        },
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_calibration(result, out / "calibration.json")
    _write_calibration_report(cfg, result, fits, dep_fit, quote_set,
                              out / "report.txt")
    _write_manifest(cfg, "calibrate")
    print(f"calibrated {cfg.model}: rho_mod={dep_fit.rho_mod:.4f} vs "
          f"rho_mkt={rho_mkt:.4f}"
          + (" [SHORTFALL]" if dep_fit.shortfall else ""))
    if not all(f.converged for f in fits) or not dep_fit.converged:
        print("optimizer failed to converge; best iterate kept",
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _fmt_dep(dep) -> list[str]:
    return [f"  {name:<6} {getattr(dep, name):>12.6f}"
            for name in dep.__dataclass_fields__]


def _write_calibration_report(cfg, result, fits, dep_fit, quote_set,
                              path) -> None:
    lines = [f"model: {result.kind}", ""]
    lines.append(f"{'asset':<8}{'mu':>10}{'sigma':>10}{'alpha':>10}"
                 f"{'rmse':>12}{'converged':>11}")
    for asset, m, f in zip(result.assets, result.marginals, fits):
        lines.append(f"{asset:<8}{m.mu:>10.4f}{m.sigma:>10.4f}"
                     f"{m.alpha:>10.4f}{f.rmse:>12.3e}"
                     f"{str(f.converged):>11}")
    lines.append("")
    lines.append("dependence:")
    lines.extend(_fmt_dep(result.dependence))
    lines.append(f"  rho_mod {result.rho_mod:>10.4f}")
    lines.append(f"  rho_mkt {result.rho_mkt:>10.4f}")
    if dep_fit.shortfall:
        lines.append(f"  SHORTFALL: target {result.rho_mkt:.4f} above "
                     f"maximal attainable {dep_fit.max_attainable:.4f}")
    if dep_fit.alternatives:
        lines.append(f"  note: {len(dep_fit.alternatives)} near-optimal "
                     "alternative solution(s); pin parameters to select")
    lines.append("")
    lines.append("per-quote percentage errors:")
    lines.append(f"{'asset':<8}{'T':>8}{'strike':>10}{'market':>12}"
                 f"{'error_pct':>12}")
    for asset, f in zip(result.assets, fits):
        for q, err in zip(quote_set.for_asset(asset), f.per_quote_errors):
            lines.append(f"{asset:<8}{q.T:>8.4f}{q.K:>10.4f}"
                         f"{q.price:>12.6f}{100.0 * err:>12.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# price
# ---------------------------------------------------------------------------


def cmd_price(cfg: RunConfig) -> int:
    result = _load_artifact(cfg)
    spec = _spec_from_result(result)
    f0 = cfg.f0_pair()
    frame = MarketFrame(f0, cfg.r, cfg.maturity)
    center = f0[0] - f0[1]
    strikes = (list(cfg.strikes) if cfg.strikes
               else [center + off for off in range(-4, 5)])
    mc = mc_spread_prices(spec, frame, strikes, cfg.n_paths,
                          RngStream(cfg.seed))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["strike,mc_price,mc_stderr,fourier_price,gap"]
    for k, mc_res in zip(strikes, mc):
        fr = cf_spread_lower_bound(spec, frame, k, cfg.spread_grid())
        gap = fr.price - mc_res.price
        rows.append(f"{k:.6f},{mc_res.price:.8f},{mc_res.stderr:.8f},"
                    f"{fr.price:.8f},{gap:.8f}")
    (out / "prices.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    _write_manifest(cfg, "price")
    print(f"priced {len(strikes)} strikes -> {out / 'prices.csv'}")
    return EXIT_OK


def _load_artifact(cfg: RunConfig) -> CalibrationResult:
    path = Path(cfg.calibration) if cfg.calibration else \
        Path(cfg.out) / "calibration.json"
    if not path.exists():
        raise DataFileError(path, None, "calibration artifact not found")
    return load_calibration(path)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    result = _load_artifact(cfg)
    spec = _spec_from_result(result)
    f0 = cfg.f0_pair()
    grid = TimeGrid.uniform(cfg.maturity, cfg.n_steps)
    batch = simulate_paths(spec, grid, cfg.n_paths, RngStream(cfg.seed))
    fwd = to_forward_prices(batch, f0, spec.marginals)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_path_dump(fwd, out / "paths.bin")

    # clock-pair sample paths across lag levels, for lag-effect plots
    dep = spec.dependence
    if spec.kind == "bbsd":
        shape_a, rate_b = 1.0 / dep.nuR, 1.0 / dep.nuR
    else:
        shape_a, rate_b = dep.A, dep.B
    rows = ["a,t,h1,h2"]
    lag_gaps = {}
    for lag in (0.1, 0.5, 0.9, 0.99):
        h1, h2 = sample_sd_subordinator_pair(
            shape_a, rate_b, lag, grid, RngStream(cfg.seed, stream=1), 64)
        lag_gaps[lag] = float(np.mean(np.abs(h2[:, -1] - h1[:, -1])))
        for t, v1, v2 in zip(grid.array, h1[0], h2[0]):
            rows.append(f"{lag},{t:.6f},{v1:.8f},{v2:.8f}")
    (out / "hpaths.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    y1 = batch.terminals(0)
    y2 = batch.terminals(1)
    sample_corr = float(np.corrcoef(y1, y2)[0, 1])
    rho_mod = model_correlation(spec)
    report = [
        f"paths: {cfg.n_paths} x {cfg.n_steps} steps to T={cfg.maturity}",
        f"terminal sample correlation: {sample_corr:.4f}",
        f"model correlation:           {rho_mod:.4f}",
        "mean terminal clock gap |H2-H1| by lag a:",
    ]
    report += [f"  a={lag}: {gap:.6f}" for lag, gap in lag_gaps.items()]
    for j, asset in enumerate(result.assets):
        mart = float(np.mean(fwd.terminals(j))) / f0[j]
        report.append(f"forward martingale check {asset}: "
                      f"mean F(T)/F(0) = {mart:.5f}")
    (out / "report.txt").write_text("\n".join(report) + "\n",
                                    encoding="utf-8")
    _write_manifest(cfg, "simulate")
    print("\n".join(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _default_spec(cfg: RunConfig) -> ModelSpec:
    m1, m2 = market_data.DEMO_MARGINALS
    kind = cfg.model
    defaults = {
        "ssd": {"A": 41.89, "a": 0.99},
        "lssd": {"A": 42.31, "a": 0.99, "rho": 0.95},
        "bbsd": {"a1": 0.62, "a2": 0.68, "a": 0.99, "nuR": 0.04},
    }[kind]
    defaults.update(cfg.dependence)
    dep = _build_dependence(kind, defaults)
    if kind == "ssd":
        return ModelSpec.ssd(m1, m2, dep)
    if kind == "lssd":
        return ModelSpec.lssd(m1, m2, dep)
    return ModelSpec.bbsd(m1, m2, dep)


def cmd_validate(cfg: RunConfig) -> int:
    """Desk-scale invariant suite; prints one pass/fail line per check."""
    checks: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str) -> None:
        checks.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

    spec = _default_spec(cfg)
    report = validate(spec)
    check("spec feasibility", report.ok, str(report))
    if not report.ok:
        _write_manifest(cfg, "validate")
        return EXIT_INFEASIBLE

    rng = RngStream(cfg.seed)
    n = max(100_000, min(cfg.n_paths, 500_000))

    # chf factorization of the gamma self-decomposition
    worst = 0.0
    u = np.linspace(-50.0, 50.0, 101)
    for A in (0.5, 2.0, 41.89):
        for B in (0.7, 1.0, 2.0):
            for a in (0.1, 0.5, 0.99):
                lhs = gamma_chf(1.7 * A, B, u)
                rhs = gamma_chf(1.7 * A, B, a * u) * za_chf(A, B, a, 1.7, u)
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    check("chf factorization", worst < 1e-12, f"max |lhs-rhs| = {worst:.2e}")

    # gamma sampler moments
    draws = sample_gamma(2.0, 3.0, rng, n)
    se = draws.std() / np.sqrt(n)
    err = abs(draws.mean() - 2.0 / 3.0)
    check("gamma sampler mean", err < 4.0 * se,
          f"|mean err| {err:.2e} vs 4se {4 * se:.2e}")

    # compound count pgf
    s = sample_polya(2.0, 0.5, rng, n)
    pgf = np.mean(0.5 ** s)
    target = (0.5 / (1.0 - 0.5 * 0.5)) ** 2.0
    check("count pgf", abs(pgf - target) < 0.01,
          f"|pgf err| = {abs(pgf - target):.2e}")

    # a-remainder moments and chf
    alpha, lam, a = 2.0, 3.0, 0.5
    z = sample_a_remainder(alpha, lam, a, rng, n)
    mean_err = abs(z.mean() - alpha * (1 - a) / lam)
    se = z.std() / np.sqrt(n)
    chf_err = 0.0
    for uu in (-2.0, -1.0, 1.0, 2.0):
        emp = np.mean(np.exp(1j * uu * z))
        chf_err = max(chf_err, abs(emp - za_chf(alpha, lam, a, 1.0, uu)))
    check("a-remainder sampler", mean_err < 4 * se and chf_err < 0.02,
          f"mean err {mean_err:.2e}, chf err {chf_err:.3f}")

    # simulated joint chf vs closed form
    batch = simulate_terminals(spec, 1.0, n, RngStream(cfg.seed, stream=2))
    y1, y2 = batch.terminals(0), batch.terminals(1)
    worst_z = 0.0
    for (u1, u2) in ((1.0, 1.0), (0.5, -0.5), (-2.0, 1.0), (2.0, 2.0),
                     (0.0, 1.5)):
        zs = np.exp(1j * (u1 * y1 + u2 * y2))
        se = np.sqrt((zs.real.var() + zs.imag.var()) / n)
        err = abs(np.mean(zs) - joint_chf(spec, 1.0, u1, u2))
        worst_z = max(worst_z, err / (4.0 * se))
    check("joint chf vs simulation", worst_z < 1.0,
          f"worst |err|/4se = {worst_z:.3f}")

    # correlation closed form vs sample
    rho_mod = model_correlation(spec)
    sample_rho = float(np.corrcoef(y1, y2)[0, 1])
    check("correlation closed form", abs(sample_rho - rho_mod) < 0.02,
          f"sample {sample_rho:.4f} vs model {rho_mod:.4f}")

    # martingale forwards
    f0 = (50.0, 49.0)
    fwd = to_forward_prices(batch, f0, spec.marginals)
    ok_mart, detail = True, []
    for j in range(2):
        rel = fwd.terminals(j) / f0[j]
        err = abs(rel.mean() - 1.0)
        se = rel.std() / np.sqrt(n)
        ok_mart &= err < 4 * se
        detail.append(f"{err:.2e}")
    check("forward martingale", ok_mart,
          f"|mean-1| = {', '.join(detail)}")

    # vanilla Fourier vs MC
    frame1 = MarketFrame(f0[0], cfg.r, 1.0)
    ok_v = True
    details = []
    for strike in (44.0, 50.0, 56.0):
        fft_p = carr_madan_calls(spec.marginals[0], frame1, [strike],
                                 cfg.vanilla_grid())[0]
        mc_p = mc_vanilla_price(spec.marginals[0], frame1, strike, n,
                                RngStream(cfg.seed, stream=3))
        gap = abs(fft_p.price - mc_p.price)
        ok_v &= gap <= max(3.0 * mc_p.stderr, 5e-3 * mc_p.price)
        details.append(f"{gap:.4f}")
    check("vanilla Fourier vs MC", ok_v, f"gaps {', '.join(details)}")

    # spread Fourier lower bound vs MC
    frame = MarketFrame(f0, cfg.r, 1.0)
    fr = cf_spread_lower_bound(spec, frame, 0.0, cfg.spread_grid())
    mc_res = mc_spread_prices(spec, frame, [0.0], n,
                              RngStream(cfg.seed, stream=4))[0]
    gap = fr.price - mc_res.price
    ok_s = (gap <= 3.0 * mc_res.stderr
            and abs(gap) <= max(3.0 * mc_res.stderr, 0.01 * mc_res.price))
    check("spread Fourier vs MC", ok_s,
          f"fourier {fr.price:.4f} vs mc {mc_res.price:.4f} "
          f"(se {mc_res.stderr:.4f})")

    _write_manifest(cfg, "validate")
    failed = [name for name, ok, _ in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdlevy",
        description="Coupled-clock variance-gamma models: calibrate, "
                    "price, simulate, validate.")
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, help="RNG seed (u64)")
    parser.add_argument("--model", choices=sorted(_KIND_DEPS),
                        help="dependence structure")
    parser.add_argument("--paths", type=int, help="Monte Carlo paths")
    parser.add_argument("--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", help="two-step calibration from quote and "
                                     "history files").set_defaults(
        func=cmd_calibrate)
    sub.add_parser("price", help="spread price table from a calibration "
                                 "artifact").set_defaults(func=cmd_price)
    sub.add_parser("simulate", help="path simulation and dumps from a "
                                    "calibration artifact").set_defaults(
        func=cmd_simulate)
    sub.add_parser("validate", help="run the invariant suite at desk "
                                    "scale").set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args)
        return args.func(cfg)
    except (ConfigError, DataFileError, SchemaError, FileNotFoundError,
            StrikeRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FeasibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConvergenceError, IntegrationError, BranchContinuityError,
            DampingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
