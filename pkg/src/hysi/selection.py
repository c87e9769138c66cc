"""Affine characterization of the lasso selection event.

Selecting a given (support, signs) pair at a fixed penalty is equivalent to
``linear_part @ stat <= offset`` where ``stat`` stacks the sqrt(n)-scaled
least-squares coefficients on the active controls with the scaled
inactive-column correlations.  Expressed through a decorrelated statistic,
the event becomes a one-dimensional truncation interval for the target
t-statistic plus a sign condition on the rows orthogonal to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTruncation, SingularGram
from .lasso import Dataset, SelectedModel, partial_out

__all__ = ["SelectionEvent", "TruncationTriple", "build_event",
           "decorrelated_statistic", "truncation_triple"]

_CONDITION_CAP = 1e12
_ZERO_ROW_REL_TOL = 1e-10


@dataclass
class SelectionEvent:
    """Polyhedron ``linear_part @ stat <= offset`` equivalent to the selection.

    Rows are grouped in three blocks: one sign constraint per active
    control, then upper and lower bounds for every inactive control, so the
    row count is 2p - |support|.  Columns of ``linear_part`` (and entries of
    ``stat``) are ordered active-then-inactive.
    """

    linear_part: np.ndarray
    stat: np.ndarray
    offset: np.ndarray
    model: SelectedModel
    n: int

    @property
    def num_rows(self) -> int:
        return self.offset.shape[0]


@dataclass(frozen=True)
class TruncationTriple:
    """Interval bounds and zero-row slack of the selection event.

    ``lower <= t <= upper`` together with ``zero_slack >= 0`` reproduces the
    polyhedron once the decorrelated statistic is held fixed.
    """

    lower: float
    upper: float
    zero_slack: float


def build_event(data: Dataset, model: SelectedModel) -> SelectionEvent:
    """Assemble the affine selection event for ``model`` on ``data``."""
    y_star, x_star = partial_out(data)
    n, p = x_star.shape
    support = list(model.support)
    inactive = [k for k in range(p) if k not in set(support)]
    signs = model.sign_array()
    lam = model.penalty
    root_n = math.sqrt(n)

    x_active = x_star[:, support]
    x_inactive = x_star[:, inactive]

    if support:
        gram = x_active.T @ x_active
        if np.linalg.cond(gram) > _CONDITION_CAP:
            raise SingularGram("active-control Gram matrix is numerically singular")
        gram_inv_signs = np.linalg.solve(gram, signs)
        coef = np.linalg.solve(gram, x_active.T @ y_star)
        resid = y_star - x_active @ coef
        stat = np.concatenate([root_n * coef, (x_inactive.T @ resid) / root_n])
        cross = x_inactive.T @ x_active @ gram_inv_signs
        offset = np.concatenate([
            -lam * root_n * (signs * gram_inv_signs),
            lam / root_n * (1.0 - cross),
            lam / root_n * (1.0 + cross),
        ])
    else:
        stat = (x_star.T @ y_star) / root_n
        offset = np.concatenate([
            lam / root_n * np.ones(p),
            lam / root_n * np.ones(p),
        ])

    k_active = len(support)
    k_inactive = len(inactive)
    linear = np.zeros((k_active + 2 * k_inactive, p))
    if k_active:
        linear[:k_active, :k_active] = -np.diag(signs)
    if k_inactive:
        rows = slice(k_active, k_active + k_inactive)
        linear[rows, k_active:] = np.eye(k_inactive)
        rows = slice(k_active + k_inactive, k_active + 2 * k_inactive)
        linear[rows, k_active:] = -np.eye(k_inactive)

    return SelectionEvent(linear_part=linear, stat=stat, offset=offset,
                          model=model, n=n)


def decorrelated_statistic(event: SelectionEvent, t_value, sigma2_t, sigma_dt):
    """Component of ``stat`` orthogonal (asymptotically) to the t-statistic."""
    if not sigma2_t > 0.0:
        raise ValueError("sigma2_t must be positive")
    sigma_dt = np.asarray(sigma_dt, dtype=float)
    return event.stat - (sigma_dt / sigma2_t) * float(t_value)


def truncation_triple(event: SelectionEvent, z_vec, sigma2_t,
                      sigma_dt) -> TruncationTriple:
    """Reduce the polyhedron to an interval for the t-statistic.

    Rows are split by the sign of ``linear_part @ (sigma_dt / sigma2_t)``:
    negative rows bound the statistic from below, positive rows from above,
    and (numerically) zero rows contribute only a nonnegative-slack
    condition.

    Raises
    ------
    EmptyTruncation
        If the lower bound exceeds the upper bound, i.e. the event is
        infeasible at the supplied decorrelated statistic.
    """
    if not sigma2_t > 0.0:
        raise ValueError("sigma2_t must be positive")
    sigma_dt = np.asarray(sigma_dt, dtype=float)
    direction = event.linear_part @ (sigma_dt / sigma2_t)
    slack = event.offset - event.linear_part @ np.asarray(z_vec, dtype=float)

    zero_tol = _ZERO_ROW_REL_TOL * float(np.linalg.norm(sigma_dt)) / sigma2_t
    negative = direction < -zero_tol
    positive = direction > zero_tol
    zero = ~(negative | positive)

    lower = float(np.max(slack[negative] / direction[negative])) if negative.any() else -math.inf
    upper = float(np.min(slack[positive] / direction[positive])) if positive.any() else math.inf
    zero_slack = float(np.min(slack[zero])) if zero.any() else math.inf

    if lower > upper:
        raise EmptyTruncation(
            f"infeasible truncation interval [{lower}, {upper}]"
        )
    return TruncationTriple(lower=lower, upper=upper, zero_slack=zero_slack)
