"""Heteroskedasticity-robust covariance estimation across candidate models.

For every candidate control subset E the target statistic is the
sqrt(n)-scaled coefficient on the protected predictor when regressing the
response on (z, X_E).  Its sandwich (co)variances across subsets factor
through per-observation influence values

    psi_{E,i} = e1' (W_E'W_E / n)^{-1} W_{E,i} * uhat_{E,i},

so the full covariance matrix over m subsets is Psi Psi' / n for the m x n
influence matrix Psi; the matrix itself is never materialized.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import SingularGram, UniverseTooLarge
from .lasso import Dataset, SelectedModel, partial_out

__all__ = ["ModelUniverse", "CovarianceEstimates", "t_statistic",
           "influence_vector", "sigma_t_entry", "sigma_dt",
           "build_universe_covariance"]

_CONDITION_CAP = 1e12
_DEFAULT_MAX_CONTROLS = 14


@dataclass(frozen=True)
class ModelUniverse:
    """Ordered collection of candidate control subsets (z always included)."""

    subsets: tuple
    num_controls: int

    @classmethod
    def all_subsets(cls, num_controls, max_controls=_DEFAULT_MAX_CONTROLS,
                    allow_large=False) -> "ModelUniverse":
        """Every subset of {0..p-1} in binary counting order.

        Index m maps to the subset whose members are the set bits of m, so
        for p = 2 the order is (), (0,), (1,), (0, 1).
        """
        if num_controls > max_controls and not allow_large:
            raise UniverseTooLarge(
                f"2^{num_controls} subsets exceed the cap (max_controls="
                f"{max_controls}); pass allow_large=True to override"
            )
        subsets = tuple(
            tuple(k for k in range(num_controls) if (m >> k) & 1)
            for m in range(1 << num_controls)
        )
        return cls(subsets=subsets, num_controls=num_controls)

    def __len__(self) -> int:
        return len(self.subsets)

    def row_of(self, subset) -> int:
        return self.subsets.index(tuple(subset))


@dataclass
class CovarianceEstimates:
    """Influence factorization of the cross-model covariance matrix.

    ``influence`` has one row per kept subset; ``t_variances`` is the
    implied diagonal of the covariance matrix.  Selected-model quantities
    are attached by the analysis pipeline when needed.
    """

    universe: ModelUniverse
    influence: np.ndarray
    t_variances: np.ndarray
    n: int
    dropped: tuple = ()
    sigma2_t_selected: float | None = None
    sigma_dt_selected: np.ndarray | None = None

    def sigma_t_matrix(self) -> np.ndarray:
        """Dense covariance matrix (test/diagnostic use; m x m)."""
        return (self.influence @ self.influence.T) / self.n

    def check_variance_bounds(self, bound) -> bool:
        """Eigenvalue-box sanity check: every diagonal in [1/bound, bound]."""
        return bool(np.all((self.t_variances >= 1.0 / bound)
                           & (self.t_variances <= bound)))


def _design_for(data: Dataset, subset):
    cols = [data.z] + [data.controls[:, k] for k in subset]
    return np.column_stack(cols)


def t_statistic(data: Dataset, subset):
    """OLS of y on (z, X_subset): scaled z-coefficient, fit and residuals.

    Returns ``(t_value, beta_hat, residuals)`` with
    t_value = sqrt(n) * beta_hat[0].
    """
    design = _design_for(data, subset)
    gram = design.T @ design
    if np.linalg.cond(gram) > _CONDITION_CAP:
        raise SingularGram(f"design for subset {tuple(subset)} is singular")
    beta_hat = np.linalg.solve(gram, design.T @ data.y)
    residuals = data.y - design @ beta_hat
    return math.sqrt(data.n) * float(beta_hat[0]), beta_hat, residuals


def influence_vector(data: Dataset, subset, residuals) -> np.ndarray:
    """Per-observation influence of the scaled z-coefficient for one subset."""
    design = _design_for(data, subset)
    gram = design.T @ design / data.n
    if np.linalg.cond(gram) > _CONDITION_CAP:
        raise SingularGram(f"design for subset {tuple(subset)} is singular")
    e1 = np.zeros(gram.shape[0])
    e1[0] = 1.0
    weights = np.linalg.solve(gram, e1)
    return (design @ weights) * np.asarray(residuals, dtype=float)


def sigma_t_entry(data: Dataset, subset_a, subset_b, residuals_a,
                  residuals_b) -> float:
    """Sandwich covariance between the t-statistics of two subsets."""
    psi_a = influence_vector(data, subset_a, residuals_a)
    psi_b = influence_vector(data, subset_b, residuals_b)
    return float(psi_a @ psi_b) / data.n


def sigma_dt(data: Dataset, model: SelectedModel, residuals) -> np.ndarray:
    """Estimated covariance between the selection statistics and the t-statistic.

    The output stacks the active-control block (premultiplied by the inverse
    partialled Gram) over the inactive block, in the same order as the
    selection event's ``stat``.
    """
    y_star, x_star = partial_out(data)
    n, p = x_star.shape
    support = list(model.support)
    inactive = [k for k in range(p) if k not in set(model.support)]

    x_active = x_star[:, support]
    if support:
        gram_active = x_active.T @ x_active / n
        if np.linalg.cond(gram_active) > _CONDITION_CAP:
            raise SingularGram("partialled active Gram matrix is singular")
        coef = np.linalg.solve(gram_active * n, x_active.T @ y_star)
        u_star = y_star - x_active @ coef
    else:
        u_star = y_star

    psi_t = influence_vector(data, model.support, residuals)
    weighted = u_star * psi_t / n
    blocks = []
    if support:
        blocks.append(np.linalg.solve(gram_active, x_active.T @ weighted))
    if inactive:
        blocks.append(x_star[:, inactive].T @ weighted)
    if not blocks:
        return np.zeros(0)
    return np.concatenate(blocks)


def _grouped_indices(universe: ModelUniverse):
    """Subset rows grouped by size, as index arrays into the design columns."""
    groups = {}
    for row, subset in enumerate(universe.subsets):
        groups.setdefault(len(subset), []).append(
            (row, (0,) + tuple(k + 1 for k in subset))
        )
    return groups


def build_universe_covariance(data: Dataset, universe: ModelUniverse,
                              variance_bound=None) -> CovarianceEstimates:
    """Influence matrix over the whole universe, batched by subset size.

    Subsets whose design is rank deficient (too many columns for n, or a
    near-singular Gram) are dropped with a warning rather than failing the
    run.  When ``variance_bound`` is given, subsets whose estimated variance
    leaves [1/bound, bound] are reported in a warning as well.
    """
    n = data.n
    full_design = np.column_stack([data.z, data.controls])
    gram_full = full_design.T @ full_design / n
    cross_y = full_design.T @ data.y / n

    m = len(universe)
    influence = np.zeros((m, n))
    keep = np.ones(m, dtype=bool)

    for size, members in _grouped_indices(universe).items():
        if size + 1 >= n:
            for row, _ in members:
                keep[row] = False
            continue
        rows = np.array([row for row, _ in members])
        cols = np.array([cols for _, cols in members])  # (batch, size+1)
        grams = gram_full[cols[:, :, None], cols[:, None, :]]
        rhs = cross_y[cols]

        conds = np.linalg.cond(grams)
        good = conds <= _CONDITION_CAP
        if not good.all():
            keep[rows[~good]] = False
            grams = grams[good]
            rhs = rhs[good]
            rows = rows[good]
            cols = cols[good]
            if rows.size == 0:
                continue

        e1 = np.zeros((rows.size, size + 1))
        e1[:, 0] = 1.0
        stacked_rhs = np.stack([rhs, e1], axis=-1)  # (batch, size+1, 2)
        solved = np.linalg.solve(grams, stacked_rhs)
        beta = solved[..., 0]
        weights = solved[..., 1]

        designs = full_design[:, cols]            # (n, batch, size+1)
        fitted = np.einsum("nbs,bs->bn", designs, beta)
        resid = data.y[None, :] - fitted
        lever = np.einsum("nbs,bs->bn", designs, weights)
        influence[rows] = lever * resid

    dropped = tuple(universe.subsets[i] for i in np.flatnonzero(~keep))
    if dropped:
        warnings.warn(f"dropped {len(dropped)} rank-deficient subsets from the "
                      f"model universe", stacklevel=2)
    kept_universe = ModelUniverse(
        subsets=tuple(s for s, k in zip(universe.subsets, keep) if k),
        num_controls=universe.num_controls,
    )
    influence = influence[keep]
    t_variances = np.einsum("ij,ij->i", influence, influence) / n

    if variance_bound is not None:
        outside = (t_variances < 1.0 / variance_bound) | (t_variances > variance_bound)
        if outside.any():
            warnings.warn(f"{int(outside.sum())} subsets have estimated variance "
                          f"outside [1/{variance_bound}, {variance_bound}]",
                          stacklevel=2)

    return CovarianceEstimates(universe=kept_universe, influence=influence,
                               t_variances=t_variances, n=n, dropped=dropped)
