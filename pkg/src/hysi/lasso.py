"""L1-penalized selection of control variables on the partialled-out design.

The predictor of interest is projected out of the response and the controls
first; the lasso then operates purely on the residualized problem

    minimize_b  0.5 * ||y* - X* b||^2 + penalty * ||b||_1

(note: the penalty multiplies the raw l1 norm, there is no 1/n factor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePredictor, DimensionMismatch, NoConvergence

__all__ = ["Dataset", "Standardization", "SelectedModel", "partial_out",
           "solve_lasso", "check_kkt"]

# coordinate descent controls (exactness of the support matters more than speed)
_MAX_SWEEPS = 100_000
_GAP_REL_TOL = 1e-10
_SUPPORT_REL_TOL = 1e-9


@dataclass(frozen=True)
class Standardization:
    """Affine maps applied per column: stored value = (raw - center) / scale."""

    y_center: float = 0.0
    z_center: float = 0.0
    z_scale: float = 1.0
    control_centers: tuple = ()
    control_scales: tuple = ()


@dataclass
class Dataset:
    """Response, protected predictor and candidate control columns."""

    y: np.ndarray
    z: np.ndarray
    controls: np.ndarray
    labels: tuple = ()
    standardization: Standardization | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        if self.controls.ndim != 2:
            raise DimensionMismatch("controls must be a 2-d array")
        n = self.y.shape[0]
        if self.z.shape != (n,) or self.controls.shape[0] != n:
            raise DimensionMismatch("y, z and controls must share the row count")
        if n < 2 or self.controls.shape[1] < 1:
            raise ValueError("need n >= 2 observations and p >= 1 controls")
        if not (np.isfinite(self.y).all() and np.isfinite(self.z).all()
                and np.isfinite(self.controls).all()):
            raise ValueError("all entries must be finite")
        if not np.any(self.z):
            raise DegeneratePredictor("predictor of interest is identically zero")
        if not self.labels:
            self.labels = tuple(f"x{k + 1}" for k in range(self.controls.shape[1]))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.controls.shape[1]

    def head(self, rows: int) -> "Dataset":
        """First ``rows`` observations (used by the split-sample interval)."""
        return Dataset(self.y[:rows], self.z[:rows], self.controls[:rows],
                       labels=self.labels, standardization=self.standardization)

    def tail(self, rows: int) -> "Dataset":
        return Dataset(self.y[-rows:], self.z[-rows:], self.controls[-rows:],
                       labels=self.labels, standardization=self.standardization)


@dataclass(frozen=True)
class SelectedModel:
    """Active control set, coefficient signs and the penalty that produced them."""

    support: tuple
    signs: tuple
    penalty: float
    boundary_ties: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(k) for k in self.support))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.support) != len(self.signs):
            raise DimensionMismatch("support and signs must have equal length")
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be +/-1")
        if not self.penalty > 0.0:
            raise ValueError("penalty must be positive")

    @property
    def size(self) -> int:
        return len(self.support)

    def sign_array(self) -> np.ndarray:
        return np.asarray(self.signs, dtype=float)


def partial_out(data: Dataset):
    """Project the predictor of interest out of the response and the controls.

    Returns (y*, X*) with y* = (I - P_z) y and X* = (I - P_z) X, so z is
    orthogonal to both outputs.
    """
    zz = float(data.z @ data.z)
    if zz <= 0.0:
        raise DegeneratePredictor("z has zero norm")
    coef_y = float(data.z @ data.y) / zz
    y_star = data.y - coef_y * data.z
    coef_x = (data.z @ data.controls) / zz
    x_star = data.controls - np.outer(data.z, coef_x)
    return y_star, x_star


def _duality_gap(y, x, beta, penalty, residual):
    """Gap between the primal objective and a feasible dual point."""
    primal = 0.5 * float(residual @ residual) + penalty * float(np.abs(beta).sum())
    corr = x.T @ residual
    max_corr = float(np.max(np.abs(corr))) if corr.size else 0.0
    scale = 1.0 if max_corr <= penalty else penalty / max_corr
    dual_point = scale * residual
    dual = 0.5 * float(y @ y) - 0.5 * float((y - dual_point) @ (y - dual_point))
    return primal - dual


def solve_lasso(y_star, x_star, penalty, tol=1e-6) -> SelectedModel:
    """Cyclic coordinate descent with active-set screening.

    Stops when the duality gap falls below 1e-10 * (0.5 ||y*||^2).  The
    support is extracted with an activity threshold relative to column and
    response scales; coordinates whose subgradient sits numerically at the
    boundary without entering are reported in ``boundary_ties``.
    """
    y_star = np.asarray(y_star, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if not penalty > 0.0:
        raise ValueError("penalty must be positive")
    n, p = x_star.shape
    col_sq = np.einsum("ij,ij->j", x_star, x_star)
    usable = col_sq > 0.0

    beta = np.zeros(p)
    residual = y_star.copy()
    gap_tol = max(_GAP_REL_TOL * 0.5 * float(y_star @ y_star), 1e-300)

    def sweep(indices):
        delta = 0.0
        for k in indices:
            old = beta[k]
            rho = float(x_star[:, k] @ residual) + old * col_sq[k]
            new = _soft_threshold(rho, penalty) / col_sq[k]
            if new != old:
                residual[:] += (old - new) * x_star[:, k]
                beta[k] = new
                delta = max(delta, abs(new - old))
        return delta

    all_idx = np.flatnonzero(usable)
    gap = np.inf
    for outer in range(_MAX_SWEEPS):
        sweep(all_idx)
        gap = _duality_gap(y_star, x_star, beta, penalty, residual)
        if gap <= gap_tol:
            break
        # polish the current active set before paying for another full sweep
        active = np.flatnonzero(beta != 0.0)
        for _ in range(_MAX_SWEEPS):
            if active.size == 0 or sweep(active) <= 1e-14:
                break
    else:
        raise NoConvergence(f"duality gap {gap:.3e} above {gap_tol:.3e} "
                            f"after {_MAX_SWEEPS} sweeps")

    y_norm = float(np.linalg.norm(y_star))
    thresholds = _SUPPORT_REL_TOL * y_norm / np.sqrt(np.where(usable, col_sq, 1.0))
    active_mask = usable & (np.abs(beta) > thresholds)
    support = tuple(int(k) for k in np.flatnonzero(active_mask))
    signs = tuple(int(np.sign(beta[k])) for k in support)

    corr = x_star.T @ residual
    ties = tuple(
        int(k) for k in np.flatnonzero(usable & ~active_mask)
        if abs(abs(float(corr[k])) - penalty) <= tol * penalty
    )
    return SelectedModel(support=support, signs=signs, penalty=float(penalty),
                         boundary_ties=ties)


def _soft_threshold(value, threshold):
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def check_kkt(model: SelectedModel, event, tol=1e-6) -> bool:
    """True iff the event's affine inequalities hold at the observed statistics.

    This is the polyhedral characterization of the selection: every row of
    ``linear_part @ stat`` must stay below ``offset`` up to ``tol`` (relative
    to the offset scale).
    """
    linear = np.asarray(event.linear_part, dtype=float)
    stat = np.asarray(event.stat, dtype=float)
    offset = np.asarray(event.offset, dtype=float)
    if linear.shape != (offset.shape[0], stat.shape[0]):
        raise DimensionMismatch(
            f"linear part {linear.shape} incompatible with stat "
            f"{stat.shape} / offset {offset.shape}"
        )
    if event.model.support != model.support or event.model.signs != model.signs:
        raise DimensionMismatch("event was built for a different model")
    slack = offset - linear @ stat
    return bool(np.all(slack >= -tol * (1.0 + np.abs(offset))))
