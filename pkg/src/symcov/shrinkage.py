"""The estimator family: sample covariance, linear shrinkage toward the
scaled identity, analytical nonlinear eigenvalue shrinkage (rank-aware),
projection-only estimation, and the convex structural blends.

All estimators are pure functions from immutable inputs to EstimatorResult;
Monte Carlo trials may call them concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matrixcore
from .matrixcore import Dataset, SymmetricMatrix
from .groups import GroupAction, reynolds_project

EST_SAMPLE = "sample"
EST_LW2004 = "lw2004"
EST_LWNL = "lwnl"
EST_SHAH = "shah_projection"
EST_AD = "ad"
EST_ADLWNL = "ad_lwnl"

FLAG_SINGULAR_INPUT = "singular_input"
FLAG_RANK_AWARE_KDE = "rank_aware_kde_applied"
FLAG_ALPHA_PINNED_0 = "alpha_pinned_0"
FLAG_ALPHA_PINNED_1 = "alpha_pinned_1"
FLAG_DEGENERATE_SPECTRUM = "degenerate_spectrum"

_ALPHA_REQUIRED = (EST_LW2004, EST_AD, EST_ADLWNL)
_GROUP_REQUIRED = (EST_SHAH, EST_AD, EST_ADLWNL)

# Sample eigenvalues below this fraction of the largest are treated as
# numerically zero and excluded from the nonlinear-shrinkage KDE.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class EstimatorResult:
    """A fitted covariance estimate plus the knobs that produced it.

    alpha is required for the blend estimators, absent for sample and the
    nonlinear shrinkage, and recorded as 1 for the projection-only
    estimator (its defining operating point).
    """

    estimator_name: str
    matrix: SymmetricMatrix
    alpha: float | None = None
    group_name: str | None = None
    flags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "flags", frozenset(self.flags))
        if self.estimator_name in _ALPHA_REQUIRED and self.alpha is None:
            raise ValueError(f"{self.estimator_name} requires alpha")
        if self.estimator_name in (EST_SAMPLE, EST_LWNL) and self.alpha is not None:
            raise ValueError(f"{self.estimator_name} carries no alpha")
        if self.estimator_name in _GROUP_REQUIRED and self.group_name is None:
            raise ValueError(f"{self.estimator_name} requires a group name")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside [0, 1]")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"shrinkage intensity {alpha} outside [0, 1]")
    return alpha


def _pin_flags(alpha: float) -> set[str]:
    if alpha == 0.0:
        return {FLAG_ALPHA_PINNED_0}
    if alpha == 1.0:
        return {FLAG_ALPHA_PINNED_1}
    return set()


def sample_estimator(data: Dataset) -> EstimatorResult:
    return EstimatorResult(EST_SAMPLE, matrixcore.sample_covariance(data))


def lw2004(r_hat: SymmetricMatrix, alpha: float) -> EstimatorResult:
    """(1 - alpha) R_hat + alpha (tr R_hat / M) I."""
    alpha = _check_alpha(alpha)
    m = r_hat.dim
    target = np.eye(m) * (r_hat.trace() / m)
    out = SymmetricMatrix((1.0 - alpha) * r_hat.values + alpha * target)
    return EstimatorResult(EST_LW2004, out, alpha=alpha, flags=_pin_flags(alpha))


def lw2004_auto(data: Dataset) -> EstimatorResult:
    """Linear shrinkage with intensity from the Frobenius-MSE plug-in taken
    at the Haar-orthogonal group, whose projection is the scaled identity.

    A single centered observation is the zero row; it carries no anisotropy
    information, so the degenerate-denominator branch of the plug-in applies
    and alpha is pinned to 1.
    """
    from . import calibration
    from .groups import haar_orthogonal

    if data.n_obs < 2:
        r_hat = matrixcore.sample_covariance(data)
        res = lw2004(r_hat, 1.0)
        return EstimatorResult(EST_LW2004, res.matrix, alpha=1.0,
                               flags=res.flags | {FLAG_SINGULAR_INPUT})
    cal = calibration.mse_plugin_alpha(data, haar_orthogonal(data.dim))
    return lw2004(matrixcore.sample_covariance(data), cal.alpha)


# ---------------------------------------------------------------------------
# Analytical nonlinear shrinkage.
# ---------------------------------------------------------------------------

_SQRT5 = np.sqrt(5.0)


def epanechnikov_kde(eigs: np.ndarray, n_obs: int,
                     query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Variable-bandwidth Epanechnikov density estimate of the eigenvalue
    distribution and its closed-form Hilbert transform at the query points.

    Bandwidths are h_j = lambda_j * N^(-1/3). The Hilbert transform is
    returned in the pi-absorbed normalization H f(x) = PV int f(t)/(x-t) dt,
    so the shrinkage denominator reads (1 - c - c lam Hf)^2 + (pi c lam f)^2
    with no stray pi on the Hf term. The kernel is supported on
    |u| <= sqrt(5); at the support edge the logarithmic factor vanishes
    against its zero prefactor and only the linear term survives.
    """
    eigs = np.asarray(eigs, dtype=float)
    query = np.asarray(query, dtype=float)
    bw = eigs * n_obs ** (-1.0 / 3.0)
    u = (query[:, None] - eigs[None, :]) / bw[None, :]
    inside = np.maximum(1.0 - u**2 / 5.0, 0.0)
    f = (3.0 / (4.0 * _SQRT5)) * np.mean(inside / bw[None, :], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.log(np.abs((_SQRT5 - u) / (_SQRT5 + u)))
        core = (-3.0 / 10.0) * u \
            + (3.0 / (4.0 * _SQRT5)) * (1.0 - u**2 / 5.0) * log_term
    at_edge = np.isclose(np.abs(u), _SQRT5)
    core = np.where(at_edge, (-3.0 / 10.0) * u, core)
    hf = np.mean(core / bw[None, :], axis=1)
    return f, hf


def _shrink_eigenvalues(lam: np.ndarray, f: np.ndarray, hf: np.ndarray,
                        c: float) -> np.ndarray:
    denom = (1.0 - c - c * lam * hf) ** 2 + (np.pi * c * lam * f) ** 2
    return lam / denom


def lwnl_from_covariance(r_hat: SymmetricMatrix, n_obs: int) -> EstimatorResult:
    """Nonlinear eigenvalue shrinkage of a precomputed covariance.

    Sample eigenvalues below RANK_RTOL * lambda_max are excluded from the
    KDE support and all map to one shared shrunken value, obtained by
    applying the shrinkage formula at the exclusion threshold itself, which
    keeps the eigenvalue map continuous at the cut. An exactly degenerate
    retained spectrum (k * I input) is returned unchanged, since the
    closed-form transform is not the identity there.
    """
    if n_obs < 2:
        raise ValueError("nonlinear shrinkage requires at least 2 observations")
    m = r_hat.dim
    lam, u = np.linalg.eigh(r_hat.values)
    lam_max = lam[-1]
    if lam_max <= 0.0:
        return EstimatorResult(EST_LWNL, r_hat,
                               flags={FLAG_DEGENERATE_SPECTRUM, FLAG_SINGULAR_INPUT})
    threshold = RANK_RTOL * lam_max
    keep = lam >= threshold
    lam_kept = lam[keep]
    flags: set[str] = set()
    if not keep.all():
        flags.add(FLAG_RANK_AWARE_KDE)
        flags.add(FLAG_SINGULAR_INPUT)
    c = m / n_obs

    if lam_kept.max() - lam_kept.min() <= 1e-12 * lam_max:
        # Degenerate retained spectrum: check the k*I fixed point and fall
        # back to the input when the transform moves it.
        f0, hf0 = epanechnikov_kde(lam_kept[:1], n_obs, lam_kept[:1])
        moved = _shrink_eigenvalues(lam_kept[:1], f0, hf0, c)[0]
        if abs(moved - lam_kept[0]) > 1e-8 * lam_kept[0]:
            return EstimatorResult(EST_LWNL, r_hat,
                                   flags=flags | {FLAG_DEGENERATE_SPECTRUM})

    query = np.concatenate([lam_kept, [threshold]])
    f, hf = epanechnikov_kde(lam_kept, n_obs, query)
    shrunk = _shrink_eigenvalues(query, f, hf, c)
    out_eigs = np.empty(m)
    out_eigs[keep] = shrunk[:-1]
    out_eigs[~keep] = shrunk[-1]
    matrix = SymmetricMatrix((u * out_eigs) @ u.T)
    return EstimatorResult(EST_LWNL, matrix, flags=flags)


def lwnl(data: Dataset) -> EstimatorResult:
    """Nonlinear eigenvalue shrinkage of the sample covariance."""
    if data.n_obs < 2:
        raise ValueError("nonlinear shrinkage requires at least 2 observations")
    return lwnl_from_covariance(matrixcore.sample_covariance(data), data.n_obs)


# ---------------------------------------------------------------------------
# Structural estimators.
# ---------------------------------------------------------------------------

def shah_projection(r_hat: SymmetricMatrix, g: GroupAction) -> EstimatorResult:
    """Projection-only estimator: the group average used alone (alpha = 1)."""
    return EstimatorResult(EST_SHAH, reynolds_project(g, r_hat),
                           alpha=1.0, group_name=g.name,
                           flags={FLAG_ALPHA_PINNED_1})


def ad_blend(r_hat: SymmetricMatrix, g: GroupAction, alpha: float) -> EstimatorResult:
    """Convex blend (1 - alpha) R_hat + alpha P_G(R_hat); PSD whenever the
    input is PSD, being a non-negative combination of two PSD matrices."""
    alpha = _check_alpha(alpha)
    target = reynolds_project(g, r_hat)
    out = SymmetricMatrix((1.0 - alpha) * r_hat.values + alpha * target.values)
    return EstimatorResult(EST_AD, out, alpha=alpha, group_name=g.name,
                           flags=_pin_flags(alpha))


def ad_lwnl_blend(data: Dataset, g: GroupAction, alpha: float,
                  lwnl_result: EstimatorResult | None = None) -> EstimatorResult:
    """Blend with the sample term upgraded to its nonlinear shrinkage:
    (1 - alpha) LWNL + alpha P_G(R_hat), the projection taken of the raw
    sample covariance. Pass a precomputed ``lwnl_result`` to reuse one
    shrinkage across an alpha grid.
    """
    alpha = _check_alpha(alpha)
    r_hat = matrixcore.sample_covariance(data)
    if lwnl_result is None:
        lwnl_result = lwnl_from_covariance(r_hat, data.n_obs)
    return ad_lwnl_from_parts(r_hat, lwnl_result, g, alpha)


def ad_lwnl_from_parts(r_hat: SymmetricMatrix, lwnl_result: EstimatorResult,
                       g: GroupAction, alpha: float) -> EstimatorResult:
    alpha = _check_alpha(alpha)
    target = reynolds_project(g, r_hat)
    out = SymmetricMatrix((1.0 - alpha) * lwnl_result.matrix.values
                          + alpha * target.values)
    return EstimatorResult(EST_ADLWNL, out, alpha=alpha, group_name=g.name,
                           flags=_pin_flags(alpha) | set(lwnl_result.flags))


# ---------------------------------------------------------------------------
# Estimator CSV: one metadata line (estimator,alpha,group,flags), then the
# matrix CSV body.
# ---------------------------------------------------------------------------

def write_estimator_csv(path, result: EstimatorResult) -> None:
    alpha = "" if result.alpha is None else repr(float(result.alpha))
    group = result.group_name or ""
    flags = ";".join(sorted(result.flags))
    with open(path, "w") as fh:
        fh.write(f"{result.estimator_name},{alpha},{group},{flags}\n")
        fh.write(f"{result.matrix.dim}\n")
        for row in result.matrix.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_estimator_csv(path) -> EstimatorResult:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    name, alpha, group, flags = lines[0].split(",", 3)
    m = int(lines[1])
    rows = np.vstack([np.fromstring(ln, sep=",") for ln in lines[2:2 + m]])
    return EstimatorResult(
        estimator_name=name,
        matrix=SymmetricMatrix(rows),
        alpha=float(alpha) if alpha else None,
        group_name=group or None,
        flags=frozenset(flags.split(";")) if flags else frozenset(),
    )
