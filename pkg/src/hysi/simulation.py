"""Monte Carlo harness: design generators, per-replication targets, studies.

Each replication draws a fresh design and error vector, runs the full
analysis pipeline, and judges every interval against that replication's own
target: the scaled coefficient the selected model would estimate in
expectation given the realized design (the split-sample interval is judged
against the target of the model selected by the first half).  Aggregates
are unconditional coverage proportions with binomial standard errors and
length quantiles reported as ratios to the simultaneous-interval quantiles.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ci import ALL_METHODS, analyze
from .errors import HysiError, SingularGram
from .lasso import Dataset
from .numerics import RngStream, sample

__all__ = ["SimulationConfig", "RepOutcome", "StudyResult", "generate_design",
           "generate_response", "true_target", "run_study",
           "LENGTH_QUANTILES"]

LENGTH_QUANTILES = (0.05, 0.25, 0.50, 0.75, 0.95)

_INDEPENDENT_GENERATORS = ("normal", "bernoulli", "skew_normal")
_ERROR_DISTS = ("normal", "skew_normal", "laplace", "uniform")


@dataclass(frozen=True)
class SimulationConfig:
    """One Monte Carlo experiment: design, errors, penalty, levels, seeding."""

    penalty: float
    n: int = 50
    p: int = 10
    design: str = "independent"
    error_dist: str = "normal"
    reps: int = 1000
    alpha: float = 0.05
    gamma: float | None = None  # None means alpha / 10
    theta: float = 0.0
    beta: tuple | None = None   # None means (-4, 4, 0, ..., 0)
    seed: int = 0
    target_mode: str = "conditional"
    methods: tuple = ALL_METHODS
    posi_draws: int = 20_000
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.design not in ("independent", "dependent"):
            raise ValueError(f"unknown design {self.design!r}")
        if self.error_dist not in _ERROR_DISTS:
            raise ValueError(f"unknown error distribution {self.error_dist!r}")
        if self.target_mode not in ("conditional", "oracle"):
            raise ValueError(f"unknown target mode {self.target_mode!r}")
        if self.beta is None and self.p < 2:
            raise ValueError("default beta needs p >= 2")

    @property
    def resolved_gamma(self) -> float:
        return self.alpha / 10.0 if self.gamma is None else self.gamma

    @property
    def delta(self) -> np.ndarray:
        """Coefficient vector (theta, beta') of the generating regression."""
        if self.beta is None:
            beta = np.zeros(self.p)
            beta[0], beta[1] = -4.0, 4.0
        else:
            beta = np.asarray(self.beta, dtype=float)
            if beta.shape != (self.p,):
                raise ValueError("beta must have length p")
        return np.concatenate([[self.theta], beta])


@dataclass(frozen=True)
class RepOutcome:
    """One (replication, method) result row."""

    rep_id: int
    method: str
    covered: bool
    length: float
    selected_size: int


def _draw_independent(config: SimulationConfig, rng: RngStream):
    """Columns from randomly chosen generators, centered and unit-norm."""
    n, cols = config.n, config.p + 1
    gen = rng.generator()
    kinds = [
        _INDEPENDENT_GENERATORS[k]
        for k in gen.integers(0, len(_INDEPENDENT_GENERATORS), size=cols)
    ]
    design = np.empty((n, cols))
    for j, kind in enumerate(kinds):
        for attempt in range(100):
            col = sample(kind, rng.child(j, attempt), n, standardized=True)
            col = col - col.mean()
            norm = np.linalg.norm(col)
            if norm > 0.0:
                design[:, j] = col / norm
                break
        else:  # pragma: no cover - probability ~ 2^-50 per column
            raise RuntimeError("degenerate column after 100 redraws")
    return design, tuple(kinds)


def _dependence_kernel(cols: int) -> np.ndarray:
    idx = np.arange(cols)
    return np.exp(-0.1 * np.abs(idx[:, None] - idx[None, :]))


def _draw_dependent(config: SimulationConfig, rng: RngStream):
    """Rows i.i.d. Gaussian with exponential-decay correlation; unit-norm
    columns, deliberately not centered."""
    cols = config.p + 1
    chol = np.linalg.cholesky(_dependence_kernel(cols))
    raw = rng.generator().standard_normal((config.n, cols)) @ chol.T
    norms = np.linalg.norm(raw, axis=0)
    return raw / norms, ("gaussian_dependent",) * cols


def generate_design(config: SimulationConfig, rng: RngStream):
    """Design matrix W = (z, X) for one replication.

    Returns ``(design, generators)`` where ``generators`` records the
    per-column distribution used (needed by the oracle target mode).
    """
    if config.design == "independent":
        return _draw_independent(config, rng)
    return _draw_dependent(config, rng)


def generate_response(design, theta, beta, error_dist, rng: RngStream):
    """y = theta z + X beta + u with standardized i.i.d. errors."""
    design = np.asarray(design, dtype=float)
    delta = np.concatenate([[theta], np.asarray(beta, dtype=float)])
    if delta.shape[0] != design.shape[1]:
        raise ValueError("theta/beta length does not match the design")
    noise = sample(error_dist, rng, design.shape[0], standardized=True)
    return design @ delta + noise


def _oracle_moments(config: SimulationConfig, generators):
    """Population moment matrix of the raw (pre-normalization) columns.

    Large-sample limits are available in closed form for both designs:
    independent standardized columns have identity moments regardless of
    which generator each column drew, and the dependent rows are Gaussian
    with the exponential-decay kernel by construction.
    """
    cols = config.p + 1
    if config.design == "dependent":
        return _dependence_kernel(cols)
    return np.eye(cols)


def true_target(data: Dataset, model, config: SimulationConfig,
                generators=None) -> float:
    """Scaled population coefficient of z in the selected model.

    ``conditional`` mode evaluates the exact conditional mean of the
    t-statistic given the realized design (valid because the errors are
    mean-zero and independent of it); ``oracle`` mode uses the population
    design moments instead, matching the estimand whose coverage the study
    tables report.
    """
    delta = config.delta
    support = list(model.support)
    if config.target_mode == "conditional":
        full = np.column_stack([data.z, data.controls])
        sub = np.column_stack([data.z, data.controls[:, support]])
        gram = sub.T @ sub
        if np.linalg.cond(gram) > 1e12:
            raise SingularGram("selected design is numerically singular")
        coef = np.linalg.solve(gram, sub.T @ (full @ delta))
        return math.sqrt(data.n) * float(coef[0])
    moments = _oracle_moments(config, generators)
    keep = [0] + [k + 1 for k in support]
    gram = moments[np.ix_(keep, keep)]
    cross = moments[keep, :] @ delta
    coef = np.linalg.solve(gram, cross)
    return math.sqrt(data.n) * float(coef[0])


def _run_rep(config: SimulationConfig, rep: int):
    """One replication; returns (outcomes, failures)."""
    base = RngStream(config.seed)
    design, generators = generate_design(config, base.child(rep, 0))
    delta = config.delta
    y = generate_response(design, delta[0], delta[1:], config.error_dist,
                          base.child(rep, 1))
    data = Dataset(y=y, z=design[:, 0], controls=design[:, 1:])

    outcomes, failures = [], []
    try:
        report = analyze(data, config.penalty, alpha=config.alpha,
                         gamma=config.resolved_gamma, methods=config.methods,
                         rng=base.child(rep, 2), posi_draws=config.posi_draws)
    except (HysiError, np.linalg.LinAlgError, ValueError) as exc:
        return [], [(rep, method, f"{type(exc).__name__}: {exc}")
                    for method in config.methods]

    targets = {}
    try:
        targets["main"] = true_target(data, report.model, config,
                                      generators=generators)
    except HysiError as exc:
        targets["main"] = None
        failures.append((rep, "target", f"{type(exc).__name__}: {exc}"))
    if report.split_model is not None:
        try:
            targets["split"] = true_target(data, report.split_model, config,
                                           generators=generators)
        except HysiError as exc:
            targets["split"] = None
            failures.append((rep, "split-target", f"{type(exc).__name__}: {exc}"))

    for method in config.methods:
        if method in report.errors:
            failures.append((rep, method, report.errors[method]))
            continue
        ci = report.intervals.get(method)
        if ci is None:
            continue
        if method == "split":
            target = targets.get("split")
            model_size = report.split_model.size
        else:
            target = targets.get("main")
            model_size = report.model.size
        if target is None:
            failures.append((rep, method, "target unavailable"))
            continue
        covered = ci.lower <= target / math.sqrt(data.n) <= ci.upper
        outcomes.append(RepOutcome(rep_id=rep, method=method,
                                   covered=bool(covered),
                                   length=float(ci.length),
                                   selected_size=model_size))
    return outcomes, failures


def _quantile_higher(values: np.ndarray, prob: float) -> float:
    """Order-statistic quantile (ceiling rule); +inf entries sort last."""
    ordered = np.sort(values)
    idx = min(max(math.ceil(prob * ordered.size), 1), ordered.size) - 1
    return float(ordered[idx])


@dataclass
class StudyResult:
    """Per-rep outcomes plus the coverage and relative-length tables."""

    config: SimulationConfig
    outcomes: list
    failures: list
    coverage: dict = field(default_factory=dict)
    length_quantiles: dict = field(default_factory=dict)
    length_ratios: dict = field(default_factory=dict)

    def coverage_rows(self):
        rows = []
        for method in self.config.methods:
            if method not in self.coverage:
                continue
            cov, se, used = self.coverage[method]
            rows.append({"method": method, "coverage": cov, "std_error": se,
                         "reps_used": used,
                         "failures": self.failure_count(method)})
        return rows

    def length_rows(self):
        rows = []
        for method in self.config.methods:
            if method not in self.length_quantiles:
                continue
            for prob in LENGTH_QUANTILES:
                rows.append({
                    "method": method,
                    "quantile": prob,
                    "length": self.length_quantiles[method][prob],
                    "ratio_to_posi": self.length_ratios[method][prob],
                })
        return rows

    def failure_count(self, method) -> int:
        return sum(1 for _, m, _ in self.failures if m == method)


def _aggregate(config: SimulationConfig, outcomes, failures) -> StudyResult:
    result = StudyResult(config=config, outcomes=outcomes, failures=failures)
    by_method = {}
    for out in outcomes:
        by_method.setdefault(out.method, []).append(out)

    for method, rows in by_method.items():
        hits = np.array([r.covered for r in rows], dtype=float)
        cov = float(hits.mean())
        se = math.sqrt(cov * (1.0 - cov) / hits.size) if hits.size else math.nan
        result.coverage[method] = (cov, se, hits.size)
        lengths = np.array([r.length for r in rows], dtype=float)
        result.length_quantiles[method] = {
            prob: _quantile_higher(lengths, prob) for prob in LENGTH_QUANTILES
        }

    posi_q = result.length_quantiles.get("posi")
    for method, quantiles in result.length_quantiles.items():
        ratios = {}
        for prob, value in quantiles.items():
            if posi_q and posi_q[prob] > 0.0:
                ratios[prob] = value / posi_q[prob]
            else:
                ratios[prob] = math.nan
        result.length_ratios[method] = ratios
    return result


def _rep_worker(args):
    config, rep = args
    return _run_rep(config, rep)


def run_study(config: SimulationConfig) -> StudyResult:
    """Run all replications and aggregate coverage and length tables.

    Replications use disjoint substreams of the configured seed, so results
    are identical for any worker count; failures are recorded and excluded
    from the aggregates rather than silently dropped.
    """
    outcomes, failures = [], []
    if config.workers > 1:
        chunk = max(1, config.reps // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = pool.map(_rep_worker,
                               ((config, rep) for rep in range(config.reps)),
                               chunksize=chunk)
            for rep_outcomes, rep_failures in results:
                outcomes.extend(rep_outcomes)
                failures.extend(rep_failures)
    else:
        for rep in range(config.reps):
            rep_outcomes, rep_failures = _run_rep(config, rep)
            outcomes.extend(rep_outcomes)
            failures.extend(rep_failures)
    return _aggregate(config, outcomes, failures)


def write_outcomes_csv(result: StudyResult, path):
    """Long-format per-rep rows: rep, method, covered, length, selected_size."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rep", "method", "covered", "length", "selected_size"])
        for out in result.outcomes:
            writer.writerow([out.rep_id, out.method, int(out.covered),
                             repr(out.length), out.selected_size])


def write_aggregate_csvs(result: StudyResult, coverage_path, length_path):
    """Aggregate tables, tagged with the generating configuration."""
    config = result.config
    tag = {"design": config.design, "errors": config.error_dist,
           "lambda": config.penalty}
    with open(coverage_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(tag) + [
            "method", "coverage", "std_error", "reps_used", "failures"])
        writer.writeheader()
        for row in result.coverage_rows():
            writer.writerow({**tag, **row})
    with open(length_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(tag) + [
            "method", "quantile", "length", "ratio_to_posi"])
        writer.writeheader()
        for row in result.length_rows():
            writer.writerow({**tag, **{k: repr(v) if isinstance(v, float) else v
                                       for k, v in row.items()}})
