"""Shrinkage-intensity selection: the closed-form Frobenius-MSE plug-in,
the K-fold held-out-NLL grid minimizer, and the leading-order asymptotic
predictions for the NLL optimum and its transition sample size.

Per-fold and per-alpha evaluations are independent; reductions are ordered,
so a parallel caller gets identical results to a serial one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matrixcore
from .matrixcore import Dataset, DimensionMismatchError, SymmetricMatrix, second_moment
from .groups import (
    GroupAction,
    KIND_FULL_SYMMETRIC,
    KIND_HAAR,
    orbit_partition,
    reynolds_project,
)

METHOD_MSE_PLUGIN = "mse_plugin"
METHOD_CV_NLL = "cv_nll"

NOTE_DENOMINATOR_DEGENERATE = "denominator_degenerate"
NOTE_MATCHED_LIMIT = "matched_limit"

# Ridge scale for the documented R_hat plug-in mode of the asymptotic
# predictions; see predict_alpha_nll_asymptotic.
PLUGIN_RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class AlphaGrid:
    """Sorted grid over [0, 1] with both endpoints always present."""

    points: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(float(p) for p in self.points)
        if len(pts) < 2 or pts[0] != 0.0 or pts[-1] != 1.0:
            raise ValueError("alpha grid must start at 0 and end at 1")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("alpha grid must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, n_points: int = 13) -> "AlphaGrid":
        return cls(tuple(i / (n_points - 1) for i in range(n_points)))

    @property
    def spacing(self) -> float:
        return max(b - a for a, b in zip(self.points, self.points[1:]))


DEFAULT_GRID = AlphaGrid.uniform(13)


@dataclass(frozen=True)
class FoldScheme:
    """Partition of row indices into k folds.

    The default is contiguous blocks with sizes differing by at most one;
    a shuffled variant exists behind an explicit constructor but contiguous
    is the reference behavior.
    """

    n_obs: int
    membership: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.membership) != self.n_obs:
            raise ValueError("fold membership must cover every row")
        counts = np.bincount(np.asarray(self.membership, dtype=int))
        if counts.min() < 1:
            raise ValueError("every fold must be non-empty")
        if counts.max() - counts.min() > 1:
            raise ValueError("fold sizes may differ by at most one")

    @property
    def k(self) -> int:
        return max(self.membership) + 1

    @classmethod
    def contiguous(cls, n_obs: int, k: int = 5) -> "FoldScheme":
        if not 2 <= k <= n_obs:
            raise ValueError(f"cannot split {n_obs} rows into {k} folds")
        sizes = [n_obs // k + (1 if i < n_obs % k else 0) for i in range(k)]
        membership = []
        for fold, size in enumerate(sizes):
            membership.extend([fold] * size)
        return cls(n_obs, tuple(membership))

    @classmethod
    def feasible_contiguous(cls, n_obs: int, k: int = 5) -> "FoldScheme | None":
        """Contiguous folds with k clamped to the row count, or None when no
        scheme leaves every training complement at least 2 rows (n_obs < 3)."""
        if n_obs < 3:
            return None
        return cls.contiguous(n_obs, min(k, n_obs))

    @classmethod
    def shuffled(cls, n_obs: int, k: int, seed: int) -> "FoldScheme":
        base = cls.contiguous(n_obs, k)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((n_obs, k, seed))))
        perm = rng.permutation(n_obs)
        shuffled = np.empty(n_obs, dtype=int)
        shuffled[perm] = np.asarray(base.membership)
        return cls(n_obs, tuple(int(v) for v in shuffled))

    def fold_mask(self, fold: int) -> np.ndarray:
        return np.asarray(self.membership) == fold


@dataclass(frozen=True)
class CalibrationResult:
    alpha: float
    method: str
    per_alpha_scores: dict | None = None
    fold_scores: np.ndarray | None = None   # (k, n_alpha) when method is cv_nll
    v_perp_hat: float | None = None
    v_plus_d_hat: float | None = None
    note: str | None = None


def mse_plugin_alpha(data: Dataset, g: GroupAction) -> CalibrationResult:
    """Closed-form plug-in for the Frobenius-MSE-optimal intensity.

    Numerator: (1/N^2) sum_k || Pperp(x_k x_k^T) - Pperp(R_hat) ||_F^2.
    Denominator: || R_hat - P_G(R_hat) ||_F^2, the observable form of
    V_perp + D. The ratio is clipped into [0, 1]. When the group fixes the
    sample covariance exactly the denominator vanishes and alpha = 1 is
    returned with a degenerate note (every alpha gives the same blend).
    """
    if not data.centered:
        raise matrixcore.CenteringError("mse_plugin_alpha requires centered data")
    if data.n_obs < 2:
        raise ValueError("mse_plugin_alpha requires at least 2 observations")
    if g.dim != data.dim:
        raise DimensionMismatchError(f"group dim {g.dim} != data dim {data.dim}")
    n = data.n_obs
    r_hat = matrixcore.sample_covariance(data)
    r_proj = reynolds_project(g, r_hat)
    perp_rhat = r_hat.values - r_proj.values
    denom = float(np.sum(perp_rhat**2))
    scale = float(np.sum(r_hat.values**2))
    if denom <= 1e-14 * scale:
        return CalibrationResult(alpha=1.0, method=METHOD_MSE_PLUGIN,
                                 v_perp_hat=0.0, v_plus_d_hat=denom,
                                 note=NOTE_DENOMINATOR_DEGENERATE)
    total = 0.0
    for row in data.rows:
        outer = SymmetricMatrix(np.outer(row, row))
        perp_outer = outer.values - reynolds_project(g, outer).values
        total += float(np.sum((perp_outer - perp_rhat) ** 2))
    v_perp = total / (n * n)
    alpha = min(1.0, max(0.0, v_perp / denom))
    return CalibrationResult(alpha=alpha, method=METHOD_MSE_PLUGIN,
                             v_perp_hat=v_perp, v_plus_d_hat=denom)


def cv_nll_alpha(data: Dataset, g: GroupAction, grid: AlphaGrid = DEFAULT_GRID,
                 folds: FoldScheme | None = None,
                 use_lwnl_sample_term: bool = False) -> CalibrationResult:
    """K-fold held-out-NLL minimizer of the blend intensity on the grid.

    Per fold: the training-complement covariance is blended with its own
    projection at each grid alpha and scored against the fold's sample
    covariance. Scores average across folds per alpha; the smallest alpha
    wins ties. Non-finite scores participate and simply lose, so
    rank-deficient blends at small alpha degrade gracefully.
    """
    from . import shrinkage

    if folds is None:
        folds = FoldScheme.contiguous(data.n_obs)
    if folds.n_obs != data.n_obs:
        raise ValueError("fold scheme built for a different number of rows")
    alphas = np.asarray(grid.points)
    k = folds.k
    scores = np.empty((k, len(alphas)))
    for fold in range(k):
        mask = folds.fold_mask(fold)
        train_rows = data.rows[~mask]
        if train_rows.shape[0] < 2:
            raise ValueError(f"training complement of fold {fold} has fewer than 2 rows")
        r_train = second_moment(train_rows)
        r_test = second_moment(data.rows[mask])
        target = reynolds_project(g, r_train)
        if use_lwnl_sample_term:
            sample_term = shrinkage.lwnl_from_covariance(r_train, train_rows.shape[0]).matrix
        else:
            sample_term = r_train
        # difference form: a zero-residual target (e.g. the trivial group)
        # yields bitwise-identical blends at every alpha, so structural ties
        # stay exact
        residual = target.values - sample_term.values
        for j, alpha in enumerate(alphas):
            blend = SymmetricMatrix(sample_term.values + alpha * residual)
            scores[fold, j] = matrixcore.gaussian_nll_per_sample(blend, r_test)
    mean_scores = scores.mean(axis=0)
    best = int(np.argmin(mean_scores))   # first minimum = smallest alpha
    return CalibrationResult(
        alpha=float(alphas[best]), method=METHOD_CV_NLL,
        per_alpha_scores={float(a): float(s) for a, s in zip(alphas, mean_scores)},
        fold_scores=scores,
    )


def write_cv_trace_csv(path, result: CalibrationResult, grid: AlphaGrid) -> None:
    """Per-fold, per-alpha held-out NLL trace: columns fold,alpha,nll."""
    if result.fold_scores is None:
        raise ValueError("calibration result carries no fold trace")
    with open(path, "w") as fh:
        fh.write("fold,alpha,nll\n")
        for fold in range(result.fold_scores.shape[0]):
            for alpha, score in zip(grid.points, result.fold_scores[fold]):
                fh.write(f"{fold},{alpha!r},{score!r}\n")


# ---------------------------------------------------------------------------
# Leading-order asymptotics.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NllAsymptote:
    alpha: float
    matched_limit: bool = False

    @property
    def note(self) -> str | None:
        return NOTE_MATCHED_LIMIT if self.matched_limit else None


def _commutant_sym_dim(g: GroupAction) -> int:
    if g.kind == KIND_HAAR:
        return 1
    if g.kind == KIND_FULL_SYMMETRIC:
        return 2 if g.dim > 1 else 1
    return orbit_partition(g).d_g


def _inverse_spd(sigma: SymmetricMatrix, ridge_scale: float | None) -> np.ndarray:
    values = sigma.values
    if ridge_scale is not None:
        values = values + np.eye(sigma.dim) * (ridge_scale * sigma.trace() / sigma.dim)
    try:
        ell = np.linalg.cholesky(values)
    except np.linalg.LinAlgError as exc:
        raise ValueError("asymptotic predictions require a positive-definite matrix") from exc
    inv_ell = np.linalg.inv(ell)
    return inv_ell.T @ inv_ell


def curvature_constant(sigma: SymmetricMatrix, g: GroupAction,
                       ridge_scale: float | None = None) -> float:
    """c(Sigma, G) = M(M+1) - 2 d_G - 2(M+1) tr(Sigma^-1 B_G), the leading-
    order numerator of the expected-NLL optimum; strictly positive for any
    non-trivially acting group."""
    m = sigma.dim
    sigma_inv = _inverse_spd(sigma, ridge_scale)
    b = sigma.values - reynolds_project(g, sigma).values
    d_g = _commutant_sym_dim(g)
    return float(m * (m + 1) - 2 * d_g - 2 * (m + 1) * np.trace(sigma_inv @ b))


def _q_b(sigma_inv: np.ndarray, b: np.ndarray) -> float:
    sb = sigma_inv @ b
    return float(np.trace(sb @ sb))


def predict_alpha_nll_asymptotic(sigma: SymmetricMatrix, g: GroupAction, n: int,
                                 ridge_scale: float | None = None) -> NllAsymptote:
    """Leading-order expected-NLL-optimal intensity, clipped into [0, 1];
    the matched limit (Q_B ~ 0) reports alpha = 1.

    The saturating form c / (N Q_B + c) is used: it agrees with the
    leading-order ratio c / (N Q_B) as N grows, stays inside (0, 1) at
    every N, and crosses 1/2 exactly at the transition size N* = c / Q_B.

    Theory-side: ``sigma`` is the population covariance. Substituting the
    sample covariance is supported via ``ridge_scale`` (the documented value
    is PLUGIN_RIDGE_SCALE), but the finite-sample bias of the inverted
    sample covariance makes that plug-in unreliable when M/N is near one or
    the spectrum is very spread; the held-out calibration avoids inverting
    anything and is the robust choice there.
    """
    sigma_inv = _inverse_spd(sigma, ridge_scale)
    b = sigma.values - reynolds_project(g, sigma).values
    q_b = _q_b(sigma_inv, b)
    if q_b <= 1e-14 * sigma.dim:
        return NllAsymptote(alpha=1.0, matched_limit=True)
    c_const = curvature_constant(sigma, g, ridge_scale)
    return NllAsymptote(alpha=min(1.0, max(0.0, c_const / (n * q_b + c_const))))


def predict_n_star(sigma: SymmetricMatrix, g: GroupAction,
                   ridge_scale: float | None = None) -> float:
    """Transition sample size c(Sigma, G) / Q_B at which the asymptotic
    NLL-optimal intensity crosses 1/2; undefined at the matched limit."""
    sigma_inv = _inverse_spd(sigma, ridge_scale)
    b = sigma.values - reynolds_project(g, sigma).values
    q_b = _q_b(sigma_inv, b)
    if q_b <= 1e-14 * sigma.dim:
        raise ValueError("transition scale undefined at the matched limit (Q_B = 0)")
    return curvature_constant(sigma, g, ridge_scale) / q_b
