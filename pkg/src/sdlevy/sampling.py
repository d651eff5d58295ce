"""Exact random-variate generation and path simulation.

Every distributional piece of the three models is sampled exactly (no
Euler discretisation error): gamma increments come from numpy's exact
shape-agnostic sampler, and the a-remainder of a gamma law is drawn by
compounding, i.e.

    Z_a = sum_{j=1..S} X_j,   S ~ NegativeBinomial(alpha, p=a),
                              X_j ~ Exponential(rate lambda/a),

whose chf reproduces the remainder factor ((lambda - iu)/(lambda - i*a*u))
^(-alpha) exactly.  The negative-binomial count is generated through the
gamma-Poisson mixture so that non-integer alpha is exact as well.

Each driver is Levy, so terminal laws can be simulated in a single step
and a multi-step grid gives the same terminal distribution; both are
available.  Simulation consumes an :class:`RngStream`, a seeded wrapper
around numpy's PCG64 keyed by (seed, stream id): identical keys reproduce
identical batches bit-for-bit and distinct stream ids are statistically
independent, which is the contract used for deterministic parallel
fan-out of large batches.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .models import (
    FeasibilityError,
    ModelSpec,
    VGMarginal,
    drift_correction,
    ssd_idio_shapes,
    validate,
)

__all__ = [
    "RngStream",
    "TimeGrid",
    "PathBatch",
    "sample_gamma",
    "sample_polya",
    "sample_a_remainder",
    "sample_sd_subordinator_pair",
    "simulate_paths",
    "simulate_terminals",
    "simulate_ssd_terminals",
    "simulate_lssd_terminals",
    "simulate_bbsd_terminals",
    "to_forward_prices",
    "write_path_dump",
    "read_path_dump",
]


class RngStream:
    """Reproducible random stream keyed by (seed, stream id).

    Streams with the same key replay the same draws; streams with
    different ids are independent.  Instances hold mutable generator
    state and must not be shared across threads; give each worker its
    own stream id instead.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        seq = np.random.SeedSequence(entropy=self.seed,
                                     spawn_key=(self.stream,))
        self.gen = np.random.Generator(np.random.PCG64(seq))

    def sibling(self, stream: int) -> "RngStream":
        """Stream with the same seed and a different id."""
        return RngStream(self.seed, stream)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times starting at 0; last point is the maturity."""

    times: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0.0):
            raise ValueError("TimeGrid needs t_0 = 0 and strictly "
                             "increasing times")
        object.__setattr__(self, "times", tuple(float(x) for x in t))

    @classmethod
    def single_step(cls, maturity: float) -> "TimeGrid":
        return cls((0.0, float(maturity)))

    @classmethod
    def uniform(cls, maturity: float, n_steps: int) -> "TimeGrid":
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        return cls(tuple(np.linspace(0.0, maturity, n_steps + 1)))

    @property
    def maturity(self) -> float:
        return self.times[-1]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.times)


LABEL_LOG = "log-driver"
LABEL_FORWARD = "forward"


@dataclass
class PathBatch:
    """Simulated values of both assets on a time grid.

    ``values`` has shape (2, n_paths, n_times); column 0 is all zeros for
    log drivers and all F_j(0) for forward prices.
    """

    grid: TimeGrid
    values: np.ndarray
    label: str = LABEL_LOG

    @property
    def n_paths(self) -> int:
        return self.values.shape[1]

    @property
    def n_times(self) -> int:
        return self.values.shape[2]

    def asset(self, j: int) -> np.ndarray:
        """(n_paths, n_times) matrix for asset j in {0, 1}."""
        return self.values[j]

    def terminals(self, j: int) -> np.ndarray:
        return self.values[j, :, -1]


# ---------------------------------------------------------------------------
# Elementary samplers
# ---------------------------------------------------------------------------


def sample_gamma(shape, rate: float, rng: RngStream, size=None) -> np.ndarray:
    """Draw from gamma(shape, rate) with mean shape/rate; exact for every
    shape > 0 (including shape < 1) and degenerate at 0 for shape == 0."""
    if np.any(np.asarray(shape) < 0.0) or rate <= 0.0:
        raise ValueError("sample_gamma needs shape >= 0 and rate > 0")
    return rng.gen.gamma(shape, 1.0 / rate, size)


def sample_polya(alpha: float, a: float, rng: RngStream, size=None) -> np.ndarray:
    """Negative-binomial count with pmf
    P(S = k) = Gamma(alpha+k)/(Gamma(alpha) k!) * a^alpha (1-a)^k.

    Generated via the gamma-Poisson mixture (Lambda ~ gamma(alpha, rate
    a/(1-a)), S | Lambda ~ Poisson(Lambda)), which is exact for any real
    alpha > 0.  Mean alpha*(1-a)/a; pgf (a / (1 - (1-a) z))^alpha.
    """
    if alpha <= 0.0 or not 0.0 < a <= 1.0:
        raise ValueError("sample_polya needs alpha > 0 and 0 < a <= 1")
    if a == 1.0:
        return np.zeros(size if size is not None else (), dtype=np.int64)
    lam = rng.gen.gamma(alpha, (1.0 - a) / a, size)
    return rng.gen.poisson(lam)


def sample_a_remainder(alpha: float, lam: float, a: float, rng: RngStream,
                       size=None) -> np.ndarray:
    """Exact draw of the a-remainder of a gamma(alpha, lam) law.

    Compound representation: a negative-binomial number of exponential
    (rate lam/a) summands, i.e. a gamma(S, lam/a) variate given S, with an
    atom at zero of mass a^alpha from S = 0.  The resulting chf is
    ((lam - i*u)/(lam - i*a*u))^(-alpha).
    """
    if lam <= 0.0:
        raise ValueError("sample_a_remainder needs lam > 0")
    s = sample_polya(alpha, a, rng, size)
    return rng.gen.gamma(s, a / lam)


def sample_sd_subordinator_pair(A: float, B: float, a: float, grid: TimeGrid,
                                rng: RngStream, n_paths: int = 1
                                ) -> tuple[np.ndarray, np.ndarray]:
    """Coupled clock paths H1 and H2 = a*H1 + Z_a on the grid.

    Per increment dt: dH1 ~ gamma(A*dt, B), dZ is an exact a-remainder
    draw with shape A*dt, and dH2 = a*dH1 + dZ.  Both paths start at 0 and
    are nondecreasing; each is marginally gamma(A*t, B) at every time.
    """
    if A <= 0.0 or B <= 0.0 or not 0.0 < a <= 1.0:
        raise ValueError("need A > 0, B > 0 and 0 < a <= 1")
    t = grid.array
    n_times = t.size
    h1 = np.zeros((n_paths, n_times))
    h2 = np.zeros((n_paths, n_times))
    for k in range(1, n_times):
        dt = t[k] - t[k - 1]
        d1 = sample_gamma(A * dt, B, rng, n_paths)
        dz = sample_a_remainder(A * dt, B, a, rng, n_paths)
        h1[:, k] = h1[:, k - 1] + d1
        h2[:, k] = h2[:, k - 1] + a * d1 + dz
    return h1, h2


# ---------------------------------------------------------------------------
# Model increments (one time step, all paths at once)
# ---------------------------------------------------------------------------


def _dup(x: np.ndarray, antithetic: bool) -> np.ndarray:
    return np.concatenate([x, x]) if antithetic else x


def _normals(rng: RngStream, n: int, antithetic: bool) -> np.ndarray:
    if antithetic:
        z = rng.gen.standard_normal(n // 2)
        return np.concatenate([z, -z])
    return rng.gen.standard_normal(n)


def _ssd_step(spec, dt, n, rng, antithetic):
    m1, m2 = spec.marginals
    dep = spec.dependence
    sh1, sh2 = ssd_idio_shapes(spec.marginals, dep)
    ne = n // 2 if antithetic else n
    dh1 = _dup(sample_gamma(dep.A * dt, dep.B, rng, ne), antithetic)
    dz = _dup(sample_a_remainder(dep.A * dt, dep.B, dep.a, rng, ne), antithetic)
    di1 = _dup(sample_gamma(sh1 * dt, dep.B / m1.alpha, rng, ne), antithetic)
    di2 = _dup(sample_gamma(sh2 * dt, dep.B / m2.alpha, rng, ne), antithetic)
    dg1 = di1 + m1.alpha * dh1
    dg2 = di2 + m2.alpha * (dep.a * dh1 + dz)
    z1 = _normals(rng, n, antithetic)
    z2 = _normals(rng, n, antithetic)
    dy1 = m1.mu * dg1 + m1.sigma * np.sqrt(dg1) * z1
    dy2 = m2.mu * dg2 + m2.sigma * np.sqrt(dg2) * z2
    return dy1, dy2


def _lssd_step(spec, dt, n, rng, antithetic):
    m1, m2 = spec.marginals
    dep = spec.dependence
    sh1, sh2 = ssd_idio_shapes(spec.marginals, dep)
    ne = n // 2 if antithetic else n
    dh1 = _dup(sample_gamma(dep.A * dt, dep.B, rng, ne), antithetic)
    dz = _dup(sample_a_remainder(dep.A * dt, dep.B, dep.a, rng, ne), antithetic)
    di1 = _dup(sample_gamma(sh1 * dt, dep.B / m1.alpha, rng, ne), antithetic)
    di2 = _dup(sample_gamma(sh2 * dt, dep.B / m2.alpha, rng, ne), antithetic)
    z1 = _normals(rng, n, antithetic)
    z2 = _normals(rng, n, antithetic)
    w1 = _normals(rng, n, antithetic)
    w2_raw = _normals(rng, n, antithetic)
    wz = _normals(rng, n, antithetic)
    # Brownian pair read on the two clocks: W2 sees only the lagged portion
    # a*H1 of the leading clock, so the increment correlation is rho*sqrt(a).
    c = dep.rho * np.sqrt(dep.a)
    w2 = c * w1 + np.sqrt(max(0.0, 1.0 - c * c)) * w2_raw
    dy1 = (m1.mu * di1 + m1.sigma * np.sqrt(di1) * z1
           + m1.alpha * m1.mu * dh1
           + np.sqrt(m1.alpha) * m1.sigma * np.sqrt(dh1) * w1)
    dy2 = (m2.mu * di2 + m2.sigma * np.sqrt(di2) * z2
           + m2.alpha * m2.mu * (dep.a * dh1 + dz)
           + np.sqrt(m2.alpha) * m2.sigma
           * (np.sqrt(dep.a * dh1) * w2 + np.sqrt(dz) * wz))
    return dy1, dy2


def _bbsd_step(spec, dt, n, rng, antithetic):
    dep = spec.dependence
    it = spec.internal
    ne = n // 2 if antithetic else n
    rate_r = 1.0 / dep.nuR
    dg1 = _dup(sample_gamma(dt / it.nu1, 1.0 / it.nu1, rng, ne), antithetic)
    dg2 = _dup(sample_gamma(dt / it.nu2, 1.0 / it.nu2, rng, ne), antithetic)
    dh1 = _dup(sample_gamma(dt * rate_r, rate_r, rng, ne), antithetic)
    dz = _dup(sample_a_remainder(dt * rate_r, rate_r, dep.a, rng, ne),
              antithetic)
    z1 = _normals(rng, n, antithetic)
    z2 = _normals(rng, n, antithetic)
    v1 = _normals(rng, n, antithetic)
    v2_raw = _normals(rng, n, antithetic)
    vz = _normals(rng, n, antithetic)
    # Single common BM read at clocks H1 and a*H1: covariance a*H1, so the
    # standardised pair has correlation sqrt(a).
    sq_a = np.sqrt(dep.a)
    v2 = sq_a * v1 + np.sqrt(max(0.0, 1.0 - dep.a)) * v2_raw
    dx1 = it.beta1 * dg1 + it.gamma1 * np.sqrt(dg1) * z1
    dx2 = it.beta2 * dg2 + it.gamma2 * np.sqrt(dg2) * z2
    dr1 = it.betaR1 * dh1 + it.gammaR1 * np.sqrt(dh1) * v1
    dr2 = (it.betaR2 * (dep.a * dh1 + dz)
           + it.gammaR2 * (np.sqrt(dep.a * dh1) * v2 + np.sqrt(dz) * vz))
    return dx1 + dep.a1 * dr1, dx2 + dep.a2 * dr2


_STEPS = {"ssd": _ssd_step, "lssd": _lssd_step, "bbsd": _bbsd_step}


# ---------------------------------------------------------------------------
# Batch simulation
# ---------------------------------------------------------------------------


def _simulate_chunk(spec, grid, n, rng, antithetic):
    step = _STEPS[spec.kind]
    t = grid.array
    values = np.zeros((2, n, t.size))
    for k in range(1, t.size):
        dy1, dy2 = step(spec, t[k] - t[k - 1], n, rng, antithetic)
        values[0, :, k] = values[0, :, k - 1] + dy1
        values[1, :, k] = values[1, :, k - 1] + dy2
    return values


def simulate_paths(spec: ModelSpec, grid: TimeGrid, n_paths: int,
                   rng: RngStream, antithetic: bool = False,
                   n_streams: int = 1) -> PathBatch:
    """Simulate n_paths joint paths of (Y1, Y2) on the grid.

    Increments are exact in law step by step.  With ``antithetic`` the
    Gaussian factors of the second half of the batch are the negated
    mirror of the first half (subordinator draws are shared, so their law
    is untouched); n_paths must then be even.  With ``n_streams`` > 1 the
    batch is partitioned across sibling streams by stream id and
    concatenated in deterministic path order, which is also the contract
    for running the chunks in parallel.
    """
    report = validate(spec)
    if not report.ok:
        raise FeasibilityError(f"infeasible {spec.kind} spec: {report}")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic batches need an even n_paths")
    if n_streams < 1:
        raise ValueError("n_streams must be >= 1")
    if n_streams == 1:
        values = _simulate_chunk(spec, grid, n_paths, rng, antithetic)
    else:
        sizes = np.full(n_streams, n_paths // n_streams)
        sizes[: n_paths % n_streams] += 1
        if antithetic:
            if np.any(sizes % 2):
                raise ValueError("antithetic + n_streams needs every chunk "
                                 "even; adjust n_paths")
        chunks = [
            _simulate_chunk(spec, grid, int(sz),
                            rng.sibling(rng.stream + 1 + k), antithetic)
            for k, sz in enumerate(sizes) if sz
        ]
        values = np.concatenate(chunks, axis=1)
    return PathBatch(grid, values, LABEL_LOG)


def simulate_terminals(spec: ModelSpec, maturity: float, n_paths: int,
                       rng: RngStream, antithetic: bool = False,
                       n_streams: int = 1) -> PathBatch:
    """Terminal values in a single exact step (valid: all drivers are Levy)."""
    return simulate_paths(spec, TimeGrid.single_step(maturity), n_paths, rng,
                          antithetic, n_streams)


def simulate_ssd_terminals(spec, maturity, n_paths, rng, **kw) -> PathBatch:
    if spec.kind != "ssd":
        raise ValueError(f"expected an ssd spec, got {spec.kind}")
    return simulate_terminals(spec, maturity, n_paths, rng, **kw)


def simulate_lssd_terminals(spec, maturity, n_paths, rng, **kw) -> PathBatch:
    if spec.kind != "lssd":
        raise ValueError(f"expected an lssd spec, got {spec.kind}")
    return simulate_terminals(spec, maturity, n_paths, rng, **kw)


def simulate_bbsd_terminals(spec, maturity, n_paths, rng, **kw) -> PathBatch:
    if spec.kind != "bbsd":
        raise ValueError(f"expected a bbsd spec, got {spec.kind}")
    return simulate_terminals(spec, maturity, n_paths, rng, **kw)


def to_forward_prices(batch: PathBatch, f0: tuple[float, float],
                      marginals: tuple[VGMarginal, VGMarginal]) -> PathBatch:
    """Map log drivers to forward prices F_j(t) = F_j(0) e^(omega_j t + Y_j(t)).

    The drift corrections make each forward a martingale, so every column
    has expectation F_j(0).
    """
    if batch.label != LABEL_LOG:
        raise ValueError("expected a log-driver batch")
    t = batch.grid.array
    out = np.empty_like(batch.values)
    for j in range(2):
        omega = drift_correction(marginals[j])
        out[j] = f0[j] * np.exp(omega * t[None, :] + batch.values[j])
        out[j, :, 0] = f0[j]
    return PathBatch(batch.grid, out, LABEL_FORWARD)


# ---------------------------------------------------------------------------
# Binary dump (documented external interface)
# ---------------------------------------------------------------------------

_MAGIC = b"SDLV"
_DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")  # magic, version, n_paths, n_times, n_assets, label
_LABEL_CODES = {LABEL_LOG: 0, LABEL_FORWARD: 1}
_LABEL_NAMES = {v: k for k, v in _LABEL_CODES.items()}


def write_path_dump(batch: PathBatch, path) -> None:
    """Binary layout: header (magic 'SDLV', u32 version, n_paths, n_times,
    n_assets, label code), then the grid times and the per-asset matrices
    (path-major, time-minor) as little-endian float64."""
    with open(path, "wb") as fh:
        _write_dump(batch, fh)


def _write_dump(batch: PathBatch, fh: BinaryIO) -> None:
    fh.write(_HEADER.pack(_MAGIC, _DUMP_VERSION, batch.n_paths, batch.n_times,
                          batch.values.shape[0], _LABEL_CODES[batch.label]))
    fh.write(batch.grid.array.astype("<f8").tobytes())
    for j in range(batch.values.shape[0]):
        fh.write(np.ascontiguousarray(batch.values[j]).astype("<f8").tobytes())


def read_path_dump(path) -> PathBatch:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n_paths, n_times, n_assets, label = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"not a path dump (magic {magic!r})")
        if version != _DUMP_VERSION:
            raise ValueError(f"unsupported path dump version {version}")
        times = np.frombuffer(fh.read(8 * n_times), dtype="<f8")
        values = np.empty((n_assets, n_paths, n_times))
        for j in range(n_assets):
            raw = np.frombuffer(fh.read(8 * n_paths * n_times), dtype="<f8")
            values[j] = raw.reshape(n_paths, n_times)
    return PathBatch(TimeGrid(tuple(times)), values, _LABEL_NAMES[label])
