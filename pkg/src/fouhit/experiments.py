"""Monte Carlo estimation of crossing probabilities and path functionals,
joined with the closed-form bounds into violation-checked reports.

Simulation layout: every estimator simulates on the *master* grid (the
largest entry of ``grid_sizes``) and evaluates coarser grids by keeping
every stride-th point of the same paths.  Coarsening therefore only
removes threshold crossings, which makes grid-bias comparisons noise-free
and pins the bias direction.  Paths are generated in fixed-size batches;
batch ``i`` uses the sampler seed XOR i (see
:func:`fouhit.simulate.substream_seed`), so reports are byte-identical
across reruns with the same spec.

Report wire format (CSV column order is frozen):

    H,T,eps,u,grid_n,n_paths,p_mean,p_stderr,p_ci_low,p_ci_high,ci_level,
    bound_t1,bound_t2,threshold_t1,threshold_t2,verdict,note

``bound_t1``/``threshold_t1`` refer to the half-range regime (present only
for H >= 1/2), ``bound_t2``/``threshold_t2`` to the full-range regime.
Empty cells mean "not applicable".  The ``note`` column carries
``diagnostic-only`` markers, row-level error messages, and the
``sigma-bound-intermediate-exceeds-final`` flag for parameter sets where
the coarse variance envelope does not dominate its sharper intermediate
form (see :func:`fouhit.bounds.sigma_bound_chain_ok`).
"""

from __future__ import annotations

import io
import json
import math
import statistics
from dataclasses import dataclass, replace

import numpy as np

from .bounds import (
    FULL_RANGE,
    HALF_RANGE,
    DomainError,
    ModelConfig,
    expected_sup_bound,
    sigma_bound_chain_ok,
    tail_bound,
)
from .simulate import (
    SamplerConfig,
    TimeGrid,
    batch_sups,
    fou_from_fbm,
    sample_fbm,
    substream_seed,
)

__all__ = [
    "MCEstimate",
    "ExperimentSpec",
    "ReportRow",
    "ExperimentReport",
    "ConfigError",
    "DEFAULT_CI_LEVEL",
    "wilson_estimate",
    "mean_estimate",
    "estimate_tail",
    "estimate_mean_sup",
    "estimate_variance_at",
    "run_experiment",
    "run_experiments",
    "report_to_csv",
    "report_to_json",
    "load_experiment_specs",
    "parse_experiment_specs",
]

DEFAULT_CI_LEVEL = 0.997

PROCESSES = ("fou", "fbm", "fbm-abs")

VERDICT_CONSISTENT = "consistent"
VERDICT_VIOLATION = "violation"
VERDICT_NOT_APPLICABLE = "not-applicable"

_SIGMA_CHAIN_NOTE = "sigma-bound-intermediate-exceeds-final"

# Paths per generation batch; fixed so that substream seeding (and hence
# every report) is reproducible.
_BATCH_PATHS = 2048

_MIN_PATHS = 100


class ConfigError(ValueError):
    """A JSON experiment config failed validation."""


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    ci_low: float
    ci_high: float
    ci_level: float = DEFAULT_CI_LEVEL


def _z_value(level: float) -> float:
    if not (0.0 < level < 1.0):
        raise DomainError(f"ci_level must be in (0, 1), got {level}")
    return statistics.NormalDist().inv_cdf(0.5 * (1.0 + level))


def wilson_estimate(successes: int, n: int, level: float = DEFAULT_CI_LEVEL) -> MCEstimate:
    """Binomial proportion with a Wilson score interval (stable at 0 and 1)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not (0 <= successes <= n):
        raise DomainError(f"successes must lie in [0, {n}], got {successes}")
    z = _z_value(level)
    p_hat = successes / n
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2.0 * n)) / denom
    half = (
        z
        * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n))
        / denom
    )
    # The Wilson interval contains p_hat; enforce that through rounding too.
    return MCEstimate(
        mean=p_hat,
        stderr=math.sqrt(p_hat * (1.0 - p_hat) / n),
        n_samples=n,
        ci_low=min(p_hat, max(0.0, center - half)),
        ci_high=max(p_hat, min(1.0, center + half)),
        ci_level=level,
    )


def mean_estimate(samples: np.ndarray, level: float = DEFAULT_CI_LEVEL) -> MCEstimate:
    """Sample mean with stderr = sample std / sqrt(n)."""
    n = samples.size
    if n < 1:
        raise DomainError("need at least one sample")
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    z = _z_value(level)
    return MCEstimate(
        mean=mean,
        stderr=stderr,
        n_samples=n,
        ci_low=mean - z * stderr,
        ci_high=mean + z * stderr,
        ci_level=level,
    )


# ---------------------------------------------------------------------------
# Experiment specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """One model configuration plus the levels and grids to certify.

    ``u_values`` must all exceed the full-range expected-supremum
    threshold; levels that do not are only allowed in
    ``diagnostic_u_values`` and are reported without bound comparison.
    """

    cfg: ModelConfig
    u_values: tuple[float, ...]
    n_paths: int
    grid_sizes: tuple[int, ...]
    sampler: SamplerConfig
    diagnostic_u_values: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "u_values", tuple(float(u) for u in self.u_values))
        object.__setattr__(
            self, "diagnostic_u_values", tuple(float(u) for u in self.diagnostic_u_values)
        )
        object.__setattr__(self, "grid_sizes", tuple(int(g) for g in self.grid_sizes))
        if self.n_paths < _MIN_PATHS:
            raise DomainError(
                f"n_paths must be >= {_MIN_PATHS} (intervals are meaningless "
                f"below this floor), got {self.n_paths}"
            )
        if len(self.grid_sizes) < 2:
            raise DomainError("grid_sizes needs >= 2 entries to expose grid bias")
        master = max(self.grid_sizes)
        for g in self.grid_sizes:
            if g < 2:
                raise DomainError(f"grid_sizes entries must be >= 2, got {g}")
            if (master - 1) % (g - 1) != 0:
                raise DomainError(
                    f"grid size {g} is incompatible with the master grid "
                    f"{master}: {master - 1} is not a multiple of {g - 1}"
                )
        if len(set(self.grid_sizes)) != len(self.grid_sizes):
            raise DomainError("grid_sizes entries must be distinct")
        threshold = expected_sup_bound(self.cfg, FULL_RANGE).value
        for i, u in enumerate(self.u_values):
            if not (u > threshold):
                raise DomainError(
                    f"u_values[{i}]={u} is not above the full-range threshold "
                    f"{threshold!r}; move it to diagnostic_u_values"
                )
        for u in self.diagnostic_u_values:
            if not (u > 0):
                raise DomainError(f"diagnostic u must be > 0, got {u}")

    @property
    def master_grid(self) -> TimeGrid:
        return TimeGrid(self.cfg.T, max(self.grid_sizes))


def _iter_fbm_batches(spec: ExperimentSpec):
    master = spec.master_grid
    remaining = spec.n_paths
    index = 0
    while remaining > 0:
        take = min(_BATCH_PATHS, remaining)
        sampler = replace(spec.sampler, seed=substream_seed(spec.sampler.seed, index))
        yield sample_fbm(master, spec.cfg.H, sampler, take)
        remaining -= take
        index += 1


def _grid_strides(spec: ExperimentSpec) -> dict[int, int]:
    master = max(spec.grid_sizes)
    return {g: (master - 1) // (g - 1) for g in spec.grid_sizes}


def _check_grid(spec: ExperimentSpec, grid_n: int) -> None:
    if grid_n not in spec.grid_sizes:
        raise DomainError(f"grid_n={grid_n} is not one of spec.grid_sizes {spec.grid_sizes}")


def _sup_sweep(spec: ExperimentSpec, process: str) -> dict[int, np.ndarray]:
    """Per-grid path suprema over the whole path budget, one sweep."""
    if process not in PROCESSES:
        raise DomainError(f"unknown process {process!r}; expected one of {PROCESSES}")
    strides = _grid_strides(spec)
    master = max(spec.grid_sizes)
    sups = {g: np.empty(spec.n_paths) for g in spec.grid_sizes}
    pos = 0
    for fbm_batch in _iter_fbm_batches(spec):
        if process == "fou":
            batch = fou_from_fbm(fbm_batch, spec.cfg.eps)
        else:
            batch = fbm_batch
        values = np.abs(batch.values) if process == "fbm-abs" else batch.values
        take = values.shape[0]
        for g, stride in strides.items():
            if g == master and process != "fbm-abs":
                sups[g][pos : pos + take] = batch_sups(batch)
            else:
                sups[g][pos : pos + take] = values[:, ::stride].max(axis=1)
        pos += take
    return sups


def _values_at_index(spec: ExperimentSpec, master_index: int) -> np.ndarray:
    out = np.empty(spec.n_paths)
    pos = 0
    for fbm_batch in _iter_fbm_batches(spec):
        batch = fou_from_fbm(fbm_batch, spec.cfg.eps)
        take = len(batch)
        out[pos : pos + take] = batch.values[:, master_index]
        pos += take
    return out


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def estimate_tail(spec: ExperimentSpec, u: float, grid_n: int) -> MCEstimate:
    """P(sup X > u) as the crossing fraction over ``spec.n_paths`` paths."""
    if not (u > 0):
        raise DomainError(f"u must be > 0, got {u}")
    _check_grid(spec, grid_n)
    sups = _sup_sweep(spec, "fou")[grid_n]
    successes = int(np.count_nonzero(sups > u))
    return wilson_estimate(successes, spec.n_paths)


def estimate_mean_sup(spec: ExperimentSpec, process: str, grid_n: int) -> MCEstimate:
    """Mean of the per-path grid supremum of X, B, or |B|."""
    _check_grid(spec, grid_n)
    sups = _sup_sweep(spec, process)[grid_n]
    return mean_estimate(sups)


def estimate_variance_at(spec: ExperimentSpec, t_index: int, grid_n: int) -> MCEstimate:
    """Second moment of X(t_index) on the requested grid (X is centered,
    so this estimates Var X)."""
    _check_grid(spec, grid_n)
    if not (0 <= t_index < grid_n):
        raise DomainError(f"t_index must lie in [0, {grid_n}), got {t_index}")
    stride = _grid_strides(spec)[grid_n]
    values = _values_at_index(spec, t_index * stride)
    return mean_estimate(values ** 2)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    H: float
    T: float
    eps: float
    u: float
    grid_n: int
    n_paths: int
    p_hat: MCEstimate | None
    bound_t1: float | None
    bound_t2: float | None
    threshold_t1: float | None
    threshold_t2: float
    verdict: str
    note: str = ""


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[ReportRow, ...]

    @property
    def violations(self) -> int:
        return sum(1 for r in self.rows if r.verdict == VERDICT_VIOLATION)


def _certification_row(spec, u, grid_n, est, thresholds, base_note) -> ReportRow:
    cfg = spec.cfg
    threshold_t1, threshold_t2 = thresholds
    bound_t1 = tail_bound(cfg, u, HALF_RANGE) if threshold_t1 is not None else None
    bound_t2 = tail_bound(cfg, u, FULL_RANGE)
    applicable = min(b for b in (bound_t1, bound_t2) if b is not None)
    verdict = VERDICT_VIOLATION if est.ci_low > applicable else VERDICT_CONSISTENT
    return ReportRow(
        H=cfg.H, T=cfg.T, eps=cfg.eps, u=u, grid_n=grid_n, n_paths=spec.n_paths,
        p_hat=est, bound_t1=bound_t1, bound_t2=bound_t2,
        threshold_t1=threshold_t1, threshold_t2=threshold_t2,
        verdict=verdict, note=base_note,
    )


def _diagnostic_row(spec, u, grid_n, est, thresholds, base_note) -> ReportRow:
    cfg = spec.cfg
    threshold_t1, threshold_t2 = thresholds
    note = "diagnostic-only" if not base_note else f"diagnostic-only;{base_note}"
    return ReportRow(
        H=cfg.H, T=cfg.T, eps=cfg.eps, u=u, grid_n=grid_n, n_paths=spec.n_paths,
        p_hat=est, bound_t1=None, bound_t2=None,
        threshold_t1=threshold_t1, threshold_t2=threshold_t2,
        verdict=VERDICT_NOT_APPLICABLE, note=note,
    )


def _error_row(spec, u, grid_n, thresholds, base_note, exc) -> ReportRow:
    cfg = spec.cfg
    threshold_t1, threshold_t2 = thresholds
    note = f"error: {exc}" if not base_note else f"error: {exc};{base_note}"
    return ReportRow(
        H=cfg.H, T=cfg.T, eps=cfg.eps, u=u, grid_n=grid_n, n_paths=spec.n_paths,
        p_hat=None, bound_t1=None, bound_t2=None,
        threshold_t1=threshold_t1, threshold_t2=threshold_t2,
        verdict=VERDICT_NOT_APPLICABLE, note=note,
    )


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """One row per (grid size, level); certification levels first, then
    diagnostic ones, grids in ascending order.  Row-level failures become
    ``not-applicable`` rows instead of aborting the run."""
    cfg = spec.cfg
    threshold_t1 = (
        expected_sup_bound(cfg, HALF_RANGE).value if cfg.H >= 0.5 else None
    )
    threshold_t2 = expected_sup_bound(cfg, FULL_RANGE).value
    thresholds = (threshold_t1, threshold_t2)
    base_note = "" if sigma_bound_chain_ok(cfg) else _SIGMA_CHAIN_NOTE

    sups = _sup_sweep(spec, "fou") if (spec.u_values or spec.diagnostic_u_values) else {}
    rows: list[ReportRow] = []
    for grid_n in sorted(spec.grid_sizes):
        for u, diagnostic in [(u, False) for u in spec.u_values] + [
            (u, True) for u in spec.diagnostic_u_values
        ]:
            try:
                successes = int(np.count_nonzero(sups[grid_n] > u))
                est = wilson_estimate(successes, spec.n_paths)
                if diagnostic:
                    rows.append(_diagnostic_row(spec, u, grid_n, est, thresholds, base_note))
                else:
                    rows.append(_certification_row(spec, u, grid_n, est, thresholds, base_note))
            except Exception as exc:  # row-level isolation
                rows.append(_error_row(spec, u, grid_n, thresholds, base_note, exc))
    return ExperimentReport(tuple(rows))


def run_experiments(specs) -> ExperimentReport:
    rows: list[ReportRow] = []
    for spec in specs:
        rows.extend(run_experiment(spec).rows)
    return ExperimentReport(tuple(rows))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "H", "T", "eps", "u", "grid_n", "n_paths",
    "p_mean", "p_stderr", "p_ci_low", "p_ci_high", "ci_level",
    "bound_t1", "bound_t2", "threshold_t1", "threshold_t2",
    "verdict", "note",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _text_cell(value: str) -> str:
    # notes may embed exception text; keep the CSV single-line and comma-free
    return value.replace(",", ";").replace("\n", " ")


def report_to_csv(report: ExperimentReport) -> str:
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for r in report.rows:
        est = r.p_hat
        cells = [
            _cell(r.H), _cell(r.T), _cell(r.eps), _cell(r.u),
            _cell(r.grid_n), _cell(r.n_paths),
            _cell(est.mean if est else None), _cell(est.stderr if est else None),
            _cell(est.ci_low if est else None), _cell(est.ci_high if est else None),
            _cell(est.ci_level if est else None),
            _cell(r.bound_t1), _cell(r.bound_t2),
            _cell(r.threshold_t1), _cell(r.threshold_t2),
            r.verdict, _text_cell(r.note),
        ]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def report_to_json(report: ExperimentReport) -> str:
    rows = []
    for r in report.rows:
        est = r.p_hat
        rows.append({
            "H": r.H, "T": r.T, "eps": r.eps, "u": r.u,
            "grid_n": r.grid_n, "n_paths": r.n_paths,
            "p_hat": None if est is None else {
                "mean": est.mean, "stderr": est.stderr,
                "n_samples": est.n_samples,
                "ci_low": est.ci_low, "ci_high": est.ci_high,
                "ci_level": est.ci_level,
            },
            "bound_t1": r.bound_t1, "bound_t2": r.bound_t2,
            "threshold_t1": r.threshold_t1, "threshold_t2": r.threshold_t2,
            "verdict": r.verdict, "note": r.note,
        })
    doc = {"schema": "fouhit-report-v1", "violations": report.violations, "rows": rows}
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

_SPEC_KEYS = {
    "H", "T", "eps", "u_values", "diagnostic_u_values",
    "n_paths", "grid_sizes", "sampler",
}
_SAMPLER_KEYS = {"method", "seed", "jitter"}


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise ConfigError(f"{where}.{key}: missing required field")
    return entry[key]


def _parse_spec(entry, where: str) -> ExperimentSpec:
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: must be an object")
    unknown = set(entry) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}: unknown field")
    sampler_doc = _require(entry, "sampler", where)
    if not isinstance(sampler_doc, dict):
        raise ConfigError(f"{where}.sampler: must be an object")
    unknown = set(sampler_doc) - _SAMPLER_KEYS
    if unknown:
        raise ConfigError(f"{where}.sampler.{sorted(unknown)[0]}: unknown field")
    try:
        sampler = SamplerConfig(
            method=_require(sampler_doc, "method", f"{where}.sampler"),
            seed=int(sampler_doc.get("seed", 0)),
            jitter=float(sampler_doc.get("jitter", 1e-12)),
        )
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}.sampler: {exc}") from exc
    try:
        cfg = ModelConfig(
            H=float(_require(entry, "H", where)),
            T=float(_require(entry, "T", where)),
            eps=float(_require(entry, "eps", where)),
        )
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    try:
        return ExperimentSpec(
            cfg=cfg,
            u_values=tuple(_require(entry, "u_values", where)),
            n_paths=int(_require(entry, "n_paths", where)),
            grid_sizes=tuple(_require(entry, "grid_sizes", where)),
            sampler=sampler,
            diagnostic_u_values=tuple(entry.get("diagnostic_u_values", ())),
        )
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


def parse_experiment_specs(doc) -> list[ExperimentSpec]:
    if not isinstance(doc, dict) or "experiments" not in doc:
        raise ConfigError("config: missing top-level 'experiments' list")
    entries = doc["experiments"]
    if not isinstance(entries, list) or not entries:
        raise ConfigError("config.experiments: must be a non-empty list")
    return [_parse_spec(entry, f"experiments[{i}]") for i, entry in enumerate(entries)]


def load_experiment_specs(path) -> list[ExperimentSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from exc
    return parse_experiment_specs(doc)
