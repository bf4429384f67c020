"""Best-matched-group selection: the effective-rank prefilter (Tier 1),
per-candidate cross-validated held-out NLL (Tier 2), structural-fit
diagnostics, and the linear-shrinkage fallback when nothing is admitted.

Per-candidate Tier 2 evaluations are independent; the final arg-min
reduction is ordered by library position, so ties break deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import calibration, matrixcore, shrinkage
from .calibration import AlphaGrid, FoldScheme, DEFAULT_GRID
from .groups import GroupAction, KIND_TRIVIAL, KIND_FULL_SYMMETRIC, ORDER_CAP, reynolds_project
from .matrixcore import Dataset, SymmetricMatrix

DEFAULT_KAPPA = 2.0


@dataclass(frozen=True)
class CandidateLibrary:
    """Ordered candidate list with unique names; iteration order is the
    deterministic tie-break order everywhere downstream."""

    candidates: tuple[GroupAction, ...]

    def __post_init__(self) -> None:
        cands = tuple(self.candidates)
        names = [g.name for g in cands]
        if len(set(names)) != len(names):
            raise ValueError("candidate names must be unique")
        if not cands:
            raise ValueError("candidate library is empty")
        object.__setattr__(self, "candidates", cands)

    @property
    def contains_trivial(self) -> bool:
        return any(g.kind == KIND_TRIVIAL for g in self.candidates)

    @property
    def contains_full_symmetric(self) -> bool:
        return any(g.kind == KIND_FULL_SYMMETRIC for g in self.candidates)

    def by_name(self, name: str) -> GroupAction:
        for g in self.candidates:
            if g.name == name:
                return g
        raise KeyError(name)


@dataclass(frozen=True)
class BMGReport:
    selected: str
    alpha: float
    tier1_admitted: tuple[str, ...]
    tier2_scores: dict
    tier2_alphas: dict
    bmg_margin: float
    delta: float
    fallback_used: bool
    tied: bool = False


def effective_order(g: GroupAction, override: int | None = None) -> int:
    """Order used by the rank prefilter: an explicit override, the declared
    exact-or-lower bound, or generators+1 when nothing is declared. Capped so
    astronomically large symbolic orders stay comparable."""
    if override is not None:
        bound = override
    elif g.order_lower_bound is not None:
        bound = g.order_lower_bound
    else:
        bound = ORDER_CAP  # no finite bound declared: treat as huge
    if bound < 1:
        bound = len(g.generators) + 1
    return min(bound, ORDER_CAP)


def tier1_admit(lib: CandidateLibrary, n: int, m: int,
                kappa: float = DEFAULT_KAPPA,
                order_bound: dict | None = None) -> list[str]:
    """Admit candidates with N * |G| >= kappa * M, using per-candidate
    effective orders (exact for small groups, declared lower bounds for
    symbolic ones). Raising kappa never grows the admitted set."""
    if kappa < 1.0:
        raise ValueError("conservatism constant kappa must be >= 1")
    admitted = []
    for g in lib.candidates:
        override = None if order_bound is None else order_bound.get(g.name)
        if n * effective_order(g, override) >= kappa * m:
            admitted.append(g.name)
    return admitted


def delta_residual(g: GroupAction, r_hat: SymmetricMatrix) -> float:
    """Dimensionless commutativity residual ||R - P_G(R)||_F / ||R||_F."""
    norm = matrixcore.frobenius_norm(r_hat)
    if norm == 0.0:
        raise ValueError("delta residual undefined for the zero matrix")
    proj = reynolds_project(g, r_hat)
    return float(np.linalg.norm(r_hat.values - proj.values, "fro") / norm)


def tier2_select(data: Dataset, admitted: list[GroupAction],
                 grid: AlphaGrid = DEFAULT_GRID,
                 folds: FoldScheme | None = None,
                 use_lwnl_sample_term: bool = False) -> BMGReport:
    """Cross-validated held-out NLL per candidate; the arg-min candidate is
    selected (ties break to library order) and its intensity is refit as the
    CV-optimal alpha applied to the full-training-data covariance."""
    if not admitted:
        raise ValueError("tier2_select needs a non-empty admitted list; use the fallback path")
    if folds is None:
        folds = FoldScheme.contiguous(data.n_obs)
    scores: dict[str, float] = {}
    alphas: dict[str, float] = {}
    for g in admitted:
        res = calibration.cv_nll_alpha(data, g, grid, folds,
                                       use_lwnl_sample_term=use_lwnl_sample_term)
        scores[g.name] = res.per_alpha_scores[res.alpha]
        alphas[g.name] = res.alpha
    ordered = [scores[g.name] for g in admitted]
    best_idx = int(np.argmin(ordered))   # first minimum = library order tie-break
    best = admitted[best_idx]
    tied = ordered.count(ordered[best_idx]) > 1
    if len(ordered) >= 2:
        rest = [s for i, s in enumerate(ordered) if i != best_idx]
        second = min(rest)
        if math.isinf(second) and math.isinf(ordered[best_idx]):
            margin = 0.0
        else:
            margin = float(second - ordered[best_idx])
    else:
        margin = 0.0
    r_full = matrixcore.sample_covariance(data)
    return BMGReport(
        selected=best.name,
        alpha=alphas[best.name],
        tier1_admitted=tuple(g.name for g in admitted),
        tier2_scores=scores,
        tier2_alphas=alphas,
        bmg_margin=margin,
        delta=delta_residual(best, r_full),
        fallback_used=False,
        tied=tied,
    )


def bmg_with_fallback(data: Dataset, lib: CandidateLibrary,
                      kappa: float = DEFAULT_KAPPA,
                      grid: AlphaGrid = DEFAULT_GRID,
                      folds: FoldScheme | None = None,
                      use_lwnl: bool = False):
    """Full selection pipeline; total on valid centered data.

    An empty Tier 1 shortlist falls back to auto-calibrated linear
    shrinkage of the unstructured sample covariance, flagged but reported
    as success; so does a dataset too small to carry any valid fold scheme
    (fewer than 3 rows). Otherwise returns the blend estimator (structural,
    or with the nonlinearly shrunken sample term when ``use_lwnl``) at the
    selected group and refit intensity.
    """
    if folds is None:
        folds = FoldScheme.feasible_contiguous(data.n_obs)
    admitted_names = tier1_admit(lib, data.n_obs, data.dim, kappa)
    if not admitted_names or folds is None:
        est = shrinkage.lw2004_auto(data)
        report = BMGReport(
            selected="", alpha=est.alpha, tier1_admitted=(),
            tier2_scores={}, tier2_alphas={}, bmg_margin=0.0,
            delta=float("nan"), fallback_used=True,
        )
        return est, report
    admitted = [lib.by_name(name) for name in admitted_names]
    report = tier2_select(data, admitted, grid, folds,
                          use_lwnl_sample_term=use_lwnl)
    selected = lib.by_name(report.selected)
    if use_lwnl:
        est = shrinkage.ad_lwnl_blend(data, selected, report.alpha)
    else:
        est = shrinkage.ad_blend(matrixcore.sample_covariance(data),
                                 selected, report.alpha)
    return est, report


def shah_at_selected(data: Dataset, lib: CandidateLibrary,
                     report: BMGReport) -> shrinkage.EstimatorResult:
    """Projection-only comparator composed at the BMG-selected group; under
    fallback there is no selected group and the sample covariance projects
    through the trivial action (i.e. is returned unchanged)."""
    r_hat = matrixcore.sample_covariance(data)
    if report.fallback_used:
        from .groups import trivial
        return shrinkage.shah_projection(r_hat, trivial(data.dim))
    return shrinkage.shah_projection(r_hat, lib.by_name(report.selected))


def write_report_csv(path, lib: CandidateLibrary, report: BMGReport,
                     trial: int | None = None) -> None:
    """One row per candidate: candidate,admitted,mean_cv_nll,best_alpha,
    selected,margin,delta (with an optional leading trial column)."""
    header = "candidate,admitted,mean_cv_nll,best_alpha,selected,margin,delta"
    if trial is not None:
        header = "trial," + header
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for line in report_rows(lib, report, trial):
            fh.write(line + "\n")


def report_rows(lib: CandidateLibrary, report: BMGReport,
                trial: int | None = None) -> list[str]:
    rows = []
    for g in lib.candidates:
        admitted = g.name in report.tier1_admitted
        score = report.tier2_scores.get(g.name, float("nan"))
        alpha = report.tier2_alphas.get(g.name, float("nan"))
        fields = [
            g.name,
            "1" if admitted else "0",
            repr(float(score)),
            repr(float(alpha)),
            "1" if g.name == report.selected else "0",
            repr(float(report.bmg_margin)),
            repr(float(report.delta)),
        ]
        if trial is not None:
            fields.insert(0, str(trial))
        rows.append(",".join(fields))
    return rows
