"""Confidence intervals for the selected coefficient, five ways.

naive      : t +/- z_{1-alpha/2} sigma, ignoring selection
split      : select on the first half, naive interval from the second half
selective  : equal-tailed inversion of the truncated-normal pivot on the
             selection interval
posi       : t +/- sigma K_alpha with the simultaneous constant
hybrid     : selective pivot with the truncation intersected with a
             level-(1-gamma) simultaneous band, inverted at the adjusted
             tail mass (alpha-gamma)/(2(1-gamma)); always contained in
             t +/- sigma K_gamma

All intervals are computed on the sqrt(n)-scaled statistic; the unscaled
coefficient interval is the scaled one divided by sqrt(n), exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import (ModelUniverse, build_universe_covariance, sigma_dt,
                         sigma_t_entry, t_statistic)
from .errors import DegenerateTruncation, EmptyTruncation, HysiError, InvalidGamma
from .lasso import Dataset, SelectedModel, partial_out, solve_lasso
from .numerics import (RngStream, invert_monotone, log_gaussian_interval_mass,
                       std_normal_quantile)
from .posi import PosiConstant, posi_constants, posi_interval
from .selection import (SelectionEvent, TruncationTriple, build_event,
                        decorrelated_statistic, truncation_triple)

__all__ = ["ConfidenceInterval", "AnalysisReport", "naive_ci", "split_sample_ci",
           "selective_ci", "hysi_ci", "analyze", "ALL_METHODS",
           "encode_json_value", "decode_json_value"]

ALL_METHODS = ("naive", "split", "selective", "hysi", "posi")

_BRACKET_CAP = 1e6  # in units of sigma; beyond this an endpoint is +/-inf


@dataclass
class ConfidenceInterval:
    """Two-sided interval on the scaled statistic with full diagnostics.

    ``n`` is the sample size whose square root converts between the scaled
    and coefficient versions (the second-half size for split intervals).
    """

    method: str
    level: float
    scaled_lower: float
    scaled_upper: float
    n: int
    gamma: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scaled_lower > self.scaled_upper:
            raise ValueError("interval endpoints out of order")

    @property
    def lower(self) -> float:
        return self.scaled_lower / math.sqrt(self.n)

    @property
    def upper(self) -> float:
        return self.scaled_upper / math.sqrt(self.n)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def scaled_length(self) -> float:
        return self.scaled_upper - self.scaled_lower

    def covers_scaled(self, target) -> bool:
        return self.scaled_lower <= target <= self.scaled_upper


def _tn_pivot(x, mu, sigma, lower, upper):
    """F_TN(x; mu, sigma^2, lower, upper) in a tail-stable form."""
    a = (lower - mu) / sigma
    b = (upper - mu) / sigma
    xi = (x - mu) / sigma
    if xi >= b:
        return 1.0
    if xi <= a:
        return 0.0
    log_den = log_gaussian_interval_mass(a, b)
    if not np.isfinite(log_den):
        raise DegenerateTruncation(
            f"truncation [{lower}, {upper}] carries no mass under "
            f"N({mu}, {sigma ** 2})"
        )
    log_num = log_gaussian_interval_mass(a, xi)
    return min(1.0, math.exp(log_num - log_den))


def naive_ci(t_value, sigma2_t, alpha, n, method="naive") -> ConfidenceInterval:
    """Invert the standard asymptotic t-test, ignoring selection."""
    if not sigma2_t > 0.0:
        raise ValueError("sigma2_t must be positive")
    half = float(std_normal_quantile(1.0 - alpha / 2.0)) * math.sqrt(sigma2_t)
    return ConfidenceInterval(method=method, level=1.0 - alpha,
                              scaled_lower=float(t_value) - half,
                              scaled_upper=float(t_value) + half, n=n)


def split_sample_ci(data: Dataset, penalty, alpha, rng=None):
    """Select on the first ceil(n/2) rows, estimate on the rest.

    The returned interval targets the coefficient of the model selected by
    the first half only (a different estimand from the full-sample one);
    its scaling uses the second-half sample size.
    """
    first_rows = (data.n + 1) // 2
    first = data.head(first_rows)
    second = data.tail(data.n - first_rows)
    y_star, x_star = partial_out(first)
    model = solve_lasso(y_star, x_star, penalty)
    t_value, _, residuals = t_statistic(second, model.support)
    sigma2_t = sigma_t_entry(second, model.support, model.support,
                             residuals, residuals)
    ci = naive_ci(t_value, sigma2_t, alpha, n=second.n, method="split")
    ci.diagnostics.update({
        "estimand": "first-half-model target",
        "selection_rows": first_rows,
        "estimation_rows": second.n,
    })
    return ci, model


def _pivot_root(pivot, t_value, sigma, target, tol):
    """Root of the decreasing pivot with geometric bracket expansion.

    Returns (root, blown_out): when the bracket cap is reached before the
    target is spanned, the corresponding endpoint is reported infinite.
    """
    width = sigma
    lo = t_value - width
    while pivot(lo) < target:
        width *= 2.0
        if width > _BRACKET_CAP * sigma:
            return -math.inf, True
        lo = t_value - width
    width = sigma
    hi = t_value + width
    while pivot(hi) > target:
        width *= 2.0
        if width > _BRACKET_CAP * sigma:
            return math.inf, True
        hi = t_value + width
    return invert_monotone(pivot, target, (lo, hi), tol), False


def selective_ci(t_value, sigma2_t, triple: TruncationTriple, alpha, n,
                 method="selective", gamma=None) -> ConfidenceInterval:
    """Equal-tailed inversion of the selection-truncated normal pivot."""
    if not sigma2_t > 0.0:
        raise ValueError("sigma2_t must be positive")
    sigma = math.sqrt(sigma2_t)
    t_value = float(t_value)
    if not (triple.lower - 1e-8 * sigma <= t_value <= triple.upper + 1e-8 * sigma):
        raise EmptyTruncation(
            f"statistic {t_value} outside truncation "
            f"[{triple.lower}, {triple.upper}]"
        )
    diagnostics = {"v_minus": triple.lower, "v_plus": triple.upper,
                   "v_zero": triple.zero_slack, "iterations": 0,
                   "clipped_lower": False, "clipped_upper": False}

    if math.isinf(triple.lower) and math.isinf(triple.upper):
        ci = naive_ci(t_value, sigma2_t, alpha, n, method=method)
        diagnostics["untruncated"] = True
        ci.diagnostics.update(diagnostics)
        ci.gamma = gamma
        return ci

    evals = [0]

    def pivot(mu):
        evals[0] += 1
        return _tn_pivot(t_value, mu, sigma, triple.lower, triple.upper)

    tol = 1e-8 * max(1.0, sigma)
    try:
        lower_mu, lower_blown = _pivot_root(pivot, t_value, sigma,
                                            1.0 - alpha / 2.0, tol)
        upper_mu, upper_blown = _pivot_root(pivot, t_value, sigma,
                                            alpha / 2.0, tol)
    except DegenerateTruncation as exc:
        raise EmptyTruncation(str(exc)) from exc
    diagnostics["iterations"] = evals[0]
    diagnostics["clipped_lower"] = lower_blown
    diagnostics["clipped_upper"] = upper_blown
    return ConfidenceInterval(method=method, level=1.0 - alpha,
                              scaled_lower=lower_mu, scaled_upper=upper_mu,
                              n=n, gamma=gamma, diagnostics=diagnostics)


def hysi_ci(t_value, sigma2_t, triple: TruncationTriple,
            k_gamma: PosiConstant, alpha, gamma, n) -> ConfidenceInterval:
    """Hybrid interval: selective pivot restricted to the simultaneous band.

    The feasible location domain is exactly [t - sigma K, t + sigma K]
    (outside it the hybrid truncation excludes the observed statistic), so
    the interval can never outgrow the level-(1-gamma) simultaneous one.
    gamma = 0 reproduces the selective interval, gamma = alpha the band
    itself.
    """
    if not 0.0 <= gamma <= alpha:
        raise InvalidGamma(f"gamma must lie in [0, alpha], got {gamma}")
    if not sigma2_t > 0.0:
        raise ValueError("sigma2_t must be positive")
    sigma = math.sqrt(sigma2_t)
    t_value = float(t_value)

    if gamma == 0.0 or math.isinf(k_gamma.value):
        return selective_ci(t_value, sigma2_t, triple, alpha, n,
                            method="hysi", gamma=gamma)

    band_lo = t_value - sigma * k_gamma.value
    band_hi = t_value + sigma * k_gamma.value
    diagnostics = {"v_minus": triple.lower, "v_plus": triple.upper,
                   "v_zero": triple.zero_slack, "K_gamma": k_gamma.value,
                   "iterations": 0, "clipped_lower": False,
                   "clipped_upper": False}

    if gamma == alpha:
        diagnostics["at_posi_limit"] = True
        return ConfidenceInterval(method="hysi", level=1.0 - alpha,
                                  scaled_lower=band_lo, scaled_upper=band_hi,
                                  n=n, gamma=gamma, diagnostics=diagnostics)

    if not (triple.lower - 1e-8 * sigma <= t_value <= triple.upper + 1e-8 * sigma):
        raise EmptyTruncation(
            f"statistic {t_value} outside truncation "
            f"[{triple.lower}, {triple.upper}]"
        )

    tail = (alpha - gamma) / (2.0 * (1.0 - gamma))
    evals = [0]

    def pivot(mu):
        evals[0] += 1
        lo = max(triple.lower, mu - sigma * k_gamma.value)
        hi = min(triple.upper, mu + sigma * k_gamma.value)
        return _tn_pivot(t_value, mu, sigma, lo, hi)

    tol = 1e-8 * max(1.0, sigma)
    try:
        lower_mu = invert_monotone(pivot, 1.0 - tail, (band_lo, band_hi), tol)
        upper_mu = invert_monotone(pivot, tail, (band_lo, band_hi), tol)
    except DegenerateTruncation as exc:
        raise EmptyTruncation(str(exc)) from exc
    diagnostics["iterations"] = evals[0]
    diagnostics["clipped_lower"] = lower_mu <= band_lo
    diagnostics["clipped_upper"] = upper_mu >= band_hi
    lower_mu = min(max(lower_mu, band_lo), band_hi)
    upper_mu = min(max(upper_mu, band_lo), band_hi)
    return ConfidenceInterval(method="hysi", level=1.0 - alpha,
                              scaled_lower=lower_mu, scaled_upper=upper_mu,
                              n=n, gamma=gamma, diagnostics=diagnostics)


@dataclass
class AnalysisReport:
    """Everything one end-to-end analysis produced."""

    n: int
    p: int
    penalty: float
    alpha: float
    gamma: float
    model: SelectedModel
    all_labels: tuple
    t_value: float
    sigma2_t: float
    intervals: dict
    errors: dict = field(default_factory=dict)
    triple: TruncationTriple | None = None
    constants: dict = field(default_factory=dict)
    split_model: SelectedModel | None = None
    z_scale: float | None = None
    predictor: str | None = None

    def labels_for(self, model: SelectedModel) -> tuple:
        return tuple(self.all_labels[k] for k in model.support)

    @property
    def selected_labels(self) -> tuple:
        return self.labels_for(self.model)

    def to_records(self):
        """One JSON-ready record per computed interval."""
        records = []
        for method, ci in self.intervals.items():
            model = self.model
            if method == "split" and self.split_model is not None:
                model = self.split_model
            record = {
                "method": method,
                "level": ci.level,
                "gamma": ci.gamma,
                "lower": ci.lower,
                "upper": ci.upper,
                "length": ci.length,
                "scaled": {"lower": ci.scaled_lower, "upper": ci.scaled_upper,
                           "length": ci.scaled_length},
                "selected": list(self.labels_for(model)),
                "signs": [int(s) for s in model.signs],
                "diagnostics": dict(ci.diagnostics),
                "lambda": self.penalty,
            }
            if self.predictor is not None:
                record["predictor"] = self.predictor
            if self.z_scale:
                record["original"] = {"lower": ci.lower / self.z_scale,
                                      "upper": ci.upper / self.z_scale}
            records.append(record)
        for method, message in self.errors.items():
            records.append({"method": method, "error": message,
                            "lambda": self.penalty})
        return records


def analyze(data: Dataset, penalty, alpha=0.05, gamma="auto",
            methods=ALL_METHODS, rng: RngStream | None = None, *,
            posi_draws=20_000, max_controls=14,
            allow_large_universe=False) -> AnalysisReport:
    """Full pipeline: partial out, select, condition, and build intervals.

    Only the machinery the requested methods need is run: the model-universe
    covariance and its Monte Carlo constants are skipped unless a
    simultaneous band is required.
    """
    methods = tuple(methods)
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    if gamma == "auto" or gamma is None:
        gamma = alpha / 10.0
    if rng is None:
        rng = RngStream(0)

    y_star, x_star = partial_out(data)
    model = solve_lasso(y_star, x_star, penalty)
    t_value, _, residuals = t_statistic(data, model.support)
    sigma2_t = sigma_t_entry(data, model.support, model.support,
                             residuals, residuals)

    report = AnalysisReport(
        n=data.n, p=data.p, penalty=float(penalty), alpha=alpha, gamma=gamma,
        model=model, all_labels=tuple(data.labels),
        t_value=t_value, sigma2_t=sigma2_t, intervals={},
        z_scale=(data.standardization.z_scale if data.standardization else None),
    )

    triple = None
    if "selective" in methods or "hysi" in methods:
        try:
            event = build_event(data, model)
            sdt = sigma_dt(data, model, residuals)
            z_vec = decorrelated_statistic(event, t_value, sigma2_t, sdt)
            triple = truncation_triple(event, z_vec, sigma2_t, sdt)
            report.triple = triple
        except HysiError as exc:
            for method in ("selective", "hysi"):
                if method in methods:
                    report.errors[method] = f"{type(exc).__name__}: {exc}"

    needs_band = "posi" in methods or ("hysi" in methods and gamma > 0.0)
    constants = {}
    if needs_band:
        universe = ModelUniverse.all_subsets(data.p, max_controls=max_controls,
                                             allow_large=allow_large_universe)
        cov = build_universe_covariance(data, universe)
        levels = set()
        if "posi" in methods:
            levels.add(alpha)
        if "hysi" in methods:
            levels.add(gamma)
        constants = posi_constants(cov, sorted(levels), draws=posi_draws, rng=rng)
        report.constants = constants

    if "naive" in methods:
        report.intervals["naive"] = naive_ci(t_value, sigma2_t, alpha, data.n)
    if "split" in methods:
        try:
            ci, split_model = split_sample_ci(data, penalty, alpha)
            report.intervals["split"] = ci
            report.split_model = split_model
        except HysiError as exc:
            report.errors["split"] = f"{type(exc).__name__}: {exc}"
    if "selective" in methods and triple is not None:
        try:
            report.intervals["selective"] = selective_ci(
                t_value, sigma2_t, triple, alpha, data.n)
        except HysiError as exc:
            report.errors["selective"] = f"{type(exc).__name__}: {exc}"
    if "hysi" in methods and triple is not None and "hysi" not in report.errors:
        try:
            if gamma > 0.0:
                k_gamma = constants[gamma]
            else:
                k_gamma = PosiConstant(value=math.inf, alpha=0.0, draws=0,
                                       stream=rng, std_error=0.0)
            report.intervals["hysi"] = hysi_ci(
                t_value, sigma2_t, triple, k_gamma, alpha, gamma, data.n)
        except HysiError as exc:
            report.errors["hysi"] = f"{type(exc).__name__}: {exc}"
    if "posi" in methods:
        k_alpha = constants[alpha]
        lo, hi = posi_interval(t_value, sigma2_t, k_alpha)
        report.intervals["posi"] = ConfidenceInterval(
            method="posi", level=1.0 - alpha, scaled_lower=lo, scaled_upper=hi,
            n=data.n,
            diagnostics={"K_alpha": k_alpha.value,
                         "K_std_error": k_alpha.std_error})
    return report


def encode_json_value(value):
    """Recursively replace non-finite floats by their string encodings."""
    if isinstance(value, dict):
        return {k: encode_json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode_json_value(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def decode_json_value(value):
    """Inverse of ``encode_json_value``."""
    if isinstance(value, dict):
        return {k: decode_json_value(v) for k, v in value.items()}
    if isinstance(value, list):
        return [decode_json_value(v) for v in value]
    if value == "inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    if value == "nan":
        return math.nan
    return value
