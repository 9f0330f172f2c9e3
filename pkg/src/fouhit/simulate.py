"""Exact-in-distribution sampling of fBm paths on a uniform grid, and the
driven mean-reverting paths built from them.

Two samplers:

* ``cholesky`` -- factorizes the exact covariance matrix; any H in (0, 1].
  H = 1 is rank one (B_t = t*Z) and is constructed directly.
* ``circulant`` -- circulant embedding of the stationary increment
  autocovariance (FFT-based, exact in law); H in (0, 1) only.

The driven path is X(t) = eps * (B(t) - e^{-t} * int_0^t e^u B(u) du) with
the integral approximated by the trapezoidal rule on the same grid; this
uses the pathwise integration-by-parts identity for the stochastic
convolution rather than an Euler scheme, so the only discretization error
is quadrature error.

Parallel use: samplers hold no shared mutable state.  To partition a batch
across workers, derive per-worker seeds with :func:`substream_seed`
(seed XOR worker-index) and merge results in any order.

Path dumps are line-oriented text: one header line starting with ``#``
carrying grid metadata, then one comma-separated path per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np

from . import _kernels
from .bounds import DomainError

__all__ = [
    "TimeGrid",
    "GaussianPath",
    "PathBatch",
    "SamplerConfig",
    "FactorizationError",
    "CirculantEmbeddingError",
    "fbm_covariance",
    "fbm_covariance_matrix",
    "sample_fbm",
    "fou_from_fbm",
    "path_sup",
    "batch_sups",
    "hitting_indicator",
    "subsample",
    "substream_seed",
    "write_path_dump",
    "read_path_dump",
]

SAMPLER_METHODS = ("cholesky", "circulant")

_MAX_JITTER_ESCALATIONS = 4


class FactorizationError(RuntimeError):
    """Covariance factorization failed after jitter escalation."""


class CirculantEmbeddingError(RuntimeError):
    """Embedding produced negative eigenvalues beyond tolerance."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i*T/(n-1), i = 0..n-1."""

    T: float
    n: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise DomainError(f"T must be finite and > 0, got {self.T}")
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n)

    @property
    def dt(self) -> float:
        return self.T / (self.n - 1)


@dataclass(frozen=True, eq=False)
class GaussianPath:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid n={self.grid.n}"
            )
        if self.values[0] != 0.0:
            raise ValueError("paths start at 0; values[0] must be 0.0")


@dataclass(frozen=True, eq=False)
class PathBatch:
    """A stack of paths sharing one grid, one per row."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid n={self.grid.n}"
            )

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> GaussianPath:
        return GaussianPath(self.grid, self.values[i])

    def __iter__(self) -> Iterator[GaussianPath]:
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler selection.  ``jitter`` regularizes the Cholesky route,
    relative to the largest covariance diagonal entry; on factorization
    failure it escalates tenfold up to four times before giving up."""

    method: str = "cholesky"
    seed: int = 0
    jitter: float = 1e-12

    def __post_init__(self):
        if self.method not in SAMPLER_METHODS:
            raise DomainError(
                f"unknown sampler method {self.method!r}; expected one of {SAMPLER_METHODS}"
            )
        if not (0 <= self.seed < 2 ** 64):
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not (self.jitter >= 0):
            raise DomainError(f"jitter must be >= 0, got {self.jitter}")


def substream_seed(seed: int, index: int) -> int:
    """Seed for worker/batch ``index``: seed XOR index (documented rule)."""
    return (seed ^ index) & (2 ** 64 - 1)


# ---------------------------------------------------------------------------
# Covariance
# ---------------------------------------------------------------------------

def fbm_covariance(s: float, t: float, H: float) -> float:
    """Cov(B_s, B_t) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2."""
    if s < 0 or t < 0:
        raise DomainError(f"time points must be >= 0, got s={s}, t={t}")
    two_h = 2.0 * H
    return 0.5 * (t ** two_h + s ** two_h - abs(t - s) ** two_h)


def fbm_covariance_matrix(grid: TimeGrid, H: float) -> np.ndarray:
    """Full n x n covariance matrix on the grid (row/column 0 are zero)."""
    points = grid.points
    two_h = 2.0 * H
    pow_t = points ** two_h
    pow_lag = (np.arange(grid.n) * grid.dt) ** two_h
    return _kernels.covariance_from_powers(pow_t, pow_lag)


def _cholesky_with_jitter(sigma: np.ndarray, jitter: float) -> np.ndarray:
    scale = float(np.max(np.diag(sigma)))
    attempt = jitter
    for _ in range(_MAX_JITTER_ESCALATIONS + 1):
        try:
            bumped = sigma + attempt * scale * np.eye(sigma.shape[0])
            return np.linalg.cholesky(bumped)
        except np.linalg.LinAlgError:
            if attempt == 0.0:
                break
            attempt *= 10.0
    raise FactorizationError(
        f"covariance factorization failed (leading minor of order "
        f"{_failing_minor(sigma)} not positive definite, jitter escalated "
        f"{_MAX_JITTER_ESCALATIONS} times from {jitter})"
    )


def _failing_minor(sigma: np.ndarray) -> int:
    # Smallest k whose leading k x k block is not positive definite.
    lo, hi = 1, sigma.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        try:
            np.linalg.cholesky(sigma[:mid, :mid])
            lo = mid + 1
        except np.linalg.LinAlgError:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def _sample_rank_one(grid: TimeGrid, rng, count: int) -> np.ndarray:
    # H = 1: perfectly correlated, B_t = t * Z.
    z = rng.standard_normal(count)
    return z[:, None] * grid.points[None, :]


def _sample_cholesky(grid: TimeGrid, H: float, cfg: SamplerConfig, rng, count: int) -> np.ndarray:
    if H == 1.0:
        return _sample_rank_one(grid, rng, count)
    sigma = fbm_covariance_matrix(grid, H)[1:, 1:]
    lower = _cholesky_with_jitter(sigma, cfg.jitter)
    z = rng.standard_normal((count, grid.n - 1))
    values = np.empty((count, grid.n))
    values[:, 0] = 0.0
    values[:, 1:] = z @ lower.T
    return values


def _circulant_sqrt_eigs(grid: TimeGrid, H: float) -> np.ndarray:
    m = grid.n - 1
    two_h = 2.0 * H
    k = np.arange(m + 1, dtype=np.float64)
    rho = 0.5 * (
        np.abs(k + 1.0) ** two_h + np.abs(k - 1.0) ** two_h - 2.0 * k ** two_h
    )
    rho *= grid.dt ** two_h
    row = np.concatenate((rho, rho[-2:0:-1]))  # circulant first row, length 2m
    eigs = np.fft.rfft(row).real
    floor = -1e-8 * eigs.max()
    if eigs.min() < floor:
        raise CirculantEmbeddingError(
            f"embedding has negative eigenvalues (min {eigs.min():.3e}); "
            "use the cholesky sampler for this grid/H"
        )
    return np.sqrt(np.clip(eigs, 0.0, None))


def _sample_circulant(grid: TimeGrid, H: float, cfg: SamplerConfig, rng, count: int) -> np.ndarray:
    m = grid.n - 1
    sqrt_eigs = _circulant_sqrt_eigs(grid, H)  # length m + 1
    z = rng.standard_normal((count, 2 * m))
    spectrum = np.zeros((count, m + 1), dtype=np.complex128)
    # Write real/imag parts through a float view to avoid complex temporaries.
    flat = spectrum.view(np.float64).reshape(count, 2 * (m + 1))
    scale = sqrt_eigs[1:m] / math.sqrt(2.0)
    flat[:, 0] = sqrt_eigs[0] * z[:, 0]
    flat[:, 2 * m] = sqrt_eigs[m] * z[:, 1]
    np.multiply(scale, z[:, 2 : m + 1], out=flat[:, 2 : 2 * m : 2])
    np.multiply(scale, z[:, m + 1 : 2 * m], out=flat[:, 3 : 2 * m : 2])
    increments = math.sqrt(2 * m) * np.fft.irfft(spectrum, n=2 * m, axis=1)[:, :m]
    values = np.empty((count, grid.n))
    values[:, 0] = 0.0
    np.cumsum(increments, axis=1, out=values[:, 1:])
    return values


def sample_fbm(grid: TimeGrid, H: float, cfg: SamplerConfig, count: int) -> PathBatch:
    """Draw ``count`` independent fBm paths on the grid.

    Finite-dimensional law is exactly multivariate normal with the fBm
    covariance; the result is a deterministic function of
    (cfg.seed, count, grid, H).
    """
    if not (0.0 < H <= 1.0):
        raise DomainError(f"H must be in (0, 1], got {H}")
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    if cfg.method == "circulant" and H == 1.0:
        raise DomainError(
            "circulant embedding does not support H=1 (degenerate spectrum); "
            "use method='cholesky', which falls back to the exact rank-one "
            "construction B_t = t*Z"
        )
    rng = np.random.default_rng(cfg.seed)
    if cfg.method == "cholesky":
        values = _sample_cholesky(grid, H, cfg, rng, count)
    else:
        values = _sample_circulant(grid, H, cfg, rng, count)
    return PathBatch(grid, values)


# ---------------------------------------------------------------------------
# Derived paths and functionals
# ---------------------------------------------------------------------------

def fou_from_fbm(paths: GaussianPath | PathBatch, eps: float):
    """X(t_i) = eps * (B(t_i) - e^{-t_i} Q_i) with Q the running trapezoid
    of e^u B(u).  eps is applied last, so scaling eps scales the output
    exactly."""
    if not (eps > 0):
        raise DomainError(f"eps must be > 0, got {eps}")
    if isinstance(paths, GaussianPath):
        out = _kernels.fou_transform(paths.values[None, :], paths.grid.points, eps)
        return GaussianPath(paths.grid, out[0])
    out = _kernels.fou_transform(paths.values, paths.grid.points, eps)
    return PathBatch(paths.grid, out)


def path_sup(path: GaussianPath) -> float:
    """Maximum of the path over the grid (t=0 included)."""
    return float(np.max(path.values))


def batch_sups(batch: PathBatch) -> np.ndarray:
    return _kernels.path_sups(batch.values)


def hitting_indicator(path: GaussianPath, u: float) -> bool:
    """True iff the grid supremum strictly exceeds u."""
    if not (u > 0):
        raise DomainError(f"u must be > 0, got {u}")
    return path_sup(path) > u


def subsample(paths: GaussianPath | PathBatch, n: int):
    """Restrict to a coarser uniform grid with ``n`` points.

    Requires (n_master - 1) divisible by (n - 1); keeps every stride-th
    value, so suprema can only decrease.
    """
    master_n = paths.grid.n
    if n < 2 or (master_n - 1) % (n - 1) != 0:
        raise DomainError(
            f"cannot subsample a {master_n}-point grid to {n} points: "
            f"{master_n - 1} is not a multiple of {n - 1}"
        )
    stride = (master_n - 1) // (n - 1)
    grid = TimeGrid(paths.grid.T, n)
    if isinstance(paths, GaussianPath):
        return GaussianPath(grid, paths.values[::stride])
    return PathBatch(grid, paths.values[:, ::stride])


# ---------------------------------------------------------------------------
# Path dump format
# ---------------------------------------------------------------------------

def write_path_dump(
    batch: PathBatch,
    fh: TextIO,
    process: str,
    H: float,
    method: str,
    seed: int,
    eps: float | None = None,
) -> None:
    """Write one header line plus one comma-separated path per line."""
    eps_txt = "na" if eps is None else repr(float(eps))
    fh.write(
        f"# fouhit-paths process={process} H={float(H)!r} T={batch.grid.T!r} "
        f"n={batch.grid.n} count={len(batch)} eps={eps_txt} "
        f"method={method} seed={seed}\n"
    )
    for row in batch.values:
        fh.write(",".join(repr(float(v)) for v in row))
        fh.write("\n")


def read_path_dump(fh: TextIO) -> tuple[PathBatch, dict]:
    header = fh.readline()
    if not header.startswith("# fouhit-paths "):
        raise ValueError("not a path dump: missing header line")
    meta = {}
    for token in header[len("# fouhit-paths "):].split():
        key, _, value = token.partition("=")
        meta[key] = value
    rows = [
        [float(v) for v in line.strip().split(",")]
        for line in fh
        if line.strip()
    ]
    grid = TimeGrid(float(meta["T"]), int(meta["n"]))
    return PathBatch(grid, np.asarray(rows)), meta
