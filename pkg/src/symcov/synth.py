"""Synthetic ground truth and the Monte Carlo trial engine: seeded
population construction (invariant and residual-controlled), Gaussian
sampling, the nonlinear-shrinkage verification harness, candidate-library
presets with their decoy extensions, and the paired-split trial sweep.

Every random draw comes from a counter-based generator keyed by
(base_seed, cell, trial, stream), so per-trial streams are independent and
the output is identical under any parallel schedule.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bmg as bmg_mod
from . import groups, matrixcore, shrinkage
from .bmg import BMGReport, CandidateLibrary
from .calibration import AlphaGrid, FoldScheme
from .groups import GroupAction, parse_group_spec, reynolds_project
from .matrixcore import Dataset, SymmetricMatrix

POPULATION_RIDGE = 1e-6

POP_RANDOM_SPD = "random_spd"
POP_GROUP_INVARIANT = "group_invariant"
POP_DELTA_CONTROLLED = "delta_controlled"
POP_IDENTITY = "identity"
POP_TWO_BLOCK = "two_block"
POP_GEOMETRIC = "geometric"
POP_BLOCK_CIRCULANT = "block_circulant"

_POP_KINDS = (POP_RANDOM_SPD, POP_GROUP_INVARIANT, POP_DELTA_CONTROLLED,
              POP_IDENTITY, POP_TWO_BLOCK, POP_GEOMETRIC, POP_BLOCK_CIRCULANT)

ESTIMATOR_ORDER = ("sample", "lw2004", "lwnl", "shah_bmg", "ad_bmg", "ad_lwnl_bmg")

# Fixed decoy-partition seeds: three same-scale partitions, three wrong
# scales, one Cartesian partition, two wreath partitions, one random
# subgroup.
DECOY_SEEDS = {
    "same_scale": (1, 2, 3),
    "scale_half": 11,
    "scale_small": 12,
    "scale_big": 13,
    "cartesian": 21,
    "wreath_small": 31,
    "wreath_pairs": 32,
    "subgroup": 42,
}


def _rng(*key) -> np.random.Generator:
    """Counter-based generator keyed by a mixed int/str tuple; string tags
    hash through crc32 so every stream is reproducible across runs."""
    material = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k)
                     for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(material)))


@dataclass(frozen=True)
class PopulationSpec:
    """Recipe for a ground-truth covariance.

    kind selects the construction; group is required for the invariant and
    residual-controlled kinds; the remaining fields parameterize the
    diagonal families.
    """

    m: int
    kind: str = POP_RANDOM_SPD
    base_seed: int = 0
    group: GroupAction | None = None
    target_delta: float | None = None
    two_block_ratio: float = 8.0
    two_block_split: float = 0.25
    geometric_decay: float = 0.9
    block_size: int = 20
    circulant_rho: float = 0.5
    cross_block: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in _POP_KINDS:
            raise ValueError(f"unknown population kind {self.kind!r}")
        if self.kind in (POP_GROUP_INVARIANT, POP_DELTA_CONTROLLED) and self.group is None:
            raise ValueError(f"population kind {self.kind} needs a group")
        if self.kind == POP_DELTA_CONTROLLED and self.target_delta is None:
            raise ValueError("delta_controlled population needs target_delta")
        if self.kind == POP_BLOCK_CIRCULANT and self.m % self.block_size:
            raise ValueError("block_circulant population needs block_size to divide m")


def _ridge(values: np.ndarray) -> np.ndarray:
    m = values.shape[0]
    return values + np.eye(m) * (POPULATION_RIDGE * np.trace(values) / m)


def _random_spd(m: int, seed_key) -> np.ndarray:
    a = _rng(*seed_key).standard_normal((m, m))
    return _ridge(a @ a.T / m)


def _random_orthogonal(m: int, seed_key) -> np.ndarray:
    q, r = np.linalg.qr(_rng(*seed_key).standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def _delta_controlled(spec: PopulationSpec) -> tuple[np.ndarray, list[tuple[float, float]]]:
    """Convex mix Sigma(t) = (1-t) P_G(S) + t S bisected on the monotone
    residual delta(t) until within 1e-3 of the target; returns the trace of
    (t, measured delta) pairs for diagnostics."""
    s = SymmetricMatrix(_random_spd(spec.m, (spec.base_seed, "pop", spec.m)))
    proj = reynolds_project(spec.group, s)
    attainable = bmg_mod.delta_residual(spec.group, s)
    target = float(spec.target_delta)
    if target < 0.0 or target > attainable + 1e-12:
        raise ValueError(
            f"target delta {target} unreachable; attainable range is [0, {attainable:.6f}] "
            f"for this draw")
    trace: list[tuple[float, float]] = []
    lo, hi = 0.0, 1.0
    for _ in range(80):
        t = 0.5 * (lo + hi)
        mix = SymmetricMatrix((1.0 - t) * proj.values + t * s.values)
        measured = bmg_mod.delta_residual(spec.group, mix)
        trace.append((t, measured))
        if abs(measured - target) <= 1e-3:
            return _ridge(mix.values), trace
        if measured < target:
            lo = t
        else:
            hi = t
    raise ValueError(f"delta bisection failed to reach {target} (last measured "
                     f"{trace[-1][1]:.6f})")


def make_population(spec: PopulationSpec) -> SymmetricMatrix:
    """Realize the specification as an SPD covariance.

    The random constructions carry a ridge of 1e-6 * (tr/m) to guarantee
    strict positive definiteness; the closed-form diagonal families are SPD
    by construction and are returned exactly (identity means the identity).
    """
    m = spec.m
    if spec.kind == POP_RANDOM_SPD:
        return SymmetricMatrix(_random_spd(m, (spec.base_seed, "pop", m)))
    if spec.kind == POP_GROUP_INVARIANT:
        base = _random_spd(m, (spec.base_seed, "pop", m))
        return SymmetricMatrix(_ridge(reynolds_project(spec.group, SymmetricMatrix(base)).values))
    if spec.kind == POP_DELTA_CONTROLLED:
        values, _ = _delta_controlled(spec)
        return SymmetricMatrix(values)
    if spec.kind == POP_IDENTITY:
        return SymmetricMatrix.identity(m)
    if spec.kind == POP_TWO_BLOCK:
        n_big = max(1, math.ceil(spec.two_block_split * m))
        eigs = np.ones(m)
        eigs[:n_big] = spec.two_block_ratio
        q = _random_orthogonal(m, (spec.base_seed, "rot", m))
        return SymmetricMatrix((q * eigs) @ q.T)
    if spec.kind == POP_GEOMETRIC:
        eigs = spec.geometric_decay ** np.arange(m)
        q = _random_orthogonal(m, (spec.base_seed, "rot", m))
        return SymmetricMatrix((q * eigs) @ q.T)
    if spec.kind == POP_BLOCK_CIRCULANT:
        return block_circulant_population(m, spec.block_size, spec.circulant_rho,
                                          spec.cross_block)
    raise AssertionError(spec.kind)


def block_circulant_population(m: int, block_size: int, rho: float,
                               cross: float) -> SymmetricMatrix:
    """Block-structured generative covariance: unit diagonal, a circulant
    correlation profile rho^min(d, K-d) within each block, and a constant
    cross-block level. Exactly invariant under independent within-block
    cyclic shifts lifted by free block permutation, with order-one structure
    that the free-permutation (compound) candidates cannot represent."""
    k = block_size
    d = np.abs(np.arange(k)[:, None] - np.arange(k)[None, :])
    circ = rho ** np.minimum(d, k - d)
    out = np.full((m, m), float(cross))
    for b in range(m // k):
        out[b * k:(b + 1) * k, b * k:(b + 1) * k] = circ
    sigma = SymmetricMatrix(out)
    w = np.linalg.eigvalsh(sigma.values)
    if w[0] <= 1e-8 * w[-1]:
        raise ValueError(f"block-circulant parameters (rho={rho}, cross={cross}) "
                         f"are not positive definite (min eig {w[0]:.3e})")
    return sigma


def sample_gaussian(sigma: SymmetricMatrix, n: int, seed) -> Dataset:
    """N mean-zero Gaussian draws through the symmetric square root, then
    column-centered. A single observation centers to the zero row and its
    sample covariance is the zero matrix (documented degenerate case)."""
    w, u = np.linalg.eigh(sigma.values)
    if w.min() <= 0.0:
        raise ValueError("sample_gaussian requires a positive-definite covariance")
    root = (u * np.sqrt(w)) @ u.T
    key = seed if isinstance(seed, tuple) else (seed,)
    z = _rng(*key).standard_normal((n, sigma.dim))
    return Dataset(z @ root, centered=False).center()


# ---------------------------------------------------------------------------
# Library presets.
# ---------------------------------------------------------------------------

def pathway_library(m: int = 100, block_size: int = 20) -> CandidateLibrary:
    """Eight-candidate block-structured library: the two extrema, full
    within-block exchangeability, three tied cyclic orderings (natural plus
    two seeded permutations standing in for data-derived orderings), and the
    high-order Cartesian and wreath candidates."""
    if m % block_size:
        raise ValueError(f"block size {block_size} does not divide {m}")
    b = m // block_size
    return CandidateLibrary((
        groups.trivial(m),
        groups.full_symmetric(m),
        groups.block_symmetric(block_size, b),
        groups.tied_cyclic_blocks(block_size, b),
        _with_name(groups.tied_cyclic_blocks(
            block_size, b, perm=groups.random_partition_perm(m, block_size, 101)),
            f"z{block_size}-tied{b}-perm1"),
        _with_name(groups.tied_cyclic_blocks(
            block_size, b, perm=groups.random_partition_perm(m, block_size, 102)),
            f"z{block_size}-tied{b}-perm2"),
        groups.cartesian_power_shifts(block_size, b),
        groups.wreath_shifts(block_size, b),
    ))


def _with_name(g: GroupAction, name: str) -> GroupAction:
    return GroupAction(name=name, dim=g.dim, generators=g.generators, kind=g.kind,
                       order_description=g.order_description,
                       order_lower_bound=g.order_lower_bound)


def grid_library(height: int = 8, width: int = 8) -> CandidateLibrary:
    """Eight-candidate grid library: extrema, single-axis cyclics, the joint
    two-axis translation, the single-axis dihedral, independent per-row
    shifts, and the row-shift wreath."""
    m = height * width
    return CandidateLibrary((
        groups.trivial(m),
        groups.full_symmetric(m),
        groups.grid_cyclic(height, width, "row"),
        groups.grid_cyclic(height, width, "col"),
        groups.grid_translation2d(height, width),
        groups.grid_dihedral(height, width, "col"),
        groups.cartesian_power_shifts(width, height),
        groups.wreath_rowshift_rowcycle(height, width),
    ))


def build_decoy_library(m: int = 100, block_size: int = 20,
                        seeds: dict | None = None) -> list[GroupAction]:
    """Twelve decoys in four families: wrong-partition free permutation (3
    same-scale seeded partitions + 3 wrong scales), wrong-domain cyclic and
    Cartesian, wrong-scale wreaths, and a pure-noise random subgroup."""
    seeds = dict(DECOY_SEEDS if seeds is None else seeds)
    if m % block_size:
        raise ValueError(f"block size {block_size} does not divide {m}")
    decoys: list[GroupAction] = []
    # Family A: same algebraic shape, wrong partitions.
    for seed in seeds["same_scale"]:
        decoys.append(groups.decoy_random_partition_blocks(m, block_size, seed))
    wrong_scales = [(block_size // 2, seeds["scale_half"]),
                    (4, seeds["scale_small"]),
                    (m // 2, seeds["scale_big"])]
    for size, seed in wrong_scales:
        if size >= 2 and m % size == 0 and size != block_size:
            decoys.append(groups.decoy_random_partition_blocks(m, size, seed))
    # Family B: wrong-domain cyclic and Cartesian.
    decoys.append(groups.cyclic(m))
    decoys.append(_with_name(
        groups.cartesian_power_shifts(
            block_size, m // block_size,
            perm=groups.random_partition_perm(m, block_size, seeds["cartesian"])),
        f"z{block_size}-{m // block_size}-cartesian-random-seed{seeds['cartesian']}"))
    decoys.append(groups.pairwise_z2_power(m))
    # Family C: wreaths at inverted scales.
    small = m // block_size
    decoys.append(_with_name(
        groups.wreath_shifts(small, block_size,
                             perm=groups.random_partition_perm(m, small, seeds["wreath_small"])),
        f"z{small}-wr-s{block_size}-seed{seeds['wreath_small']}"))
    decoys.append(_with_name(
        groups.wreath_shifts(2, m // 2,
                             perm=groups.random_partition_perm(m, 2, seeds["wreath_pairs"])),
        f"z2-wr-s{m // 2}-seed{seeds['wreath_pairs']}"))
    # Family D: pure noise.
    decoys.append(groups.decoy_random_subgroup_closure(m, 5, 10**6, seeds["subgroup"]))
    return decoys


def pathway_library_with_decoys(m: int = 100, block_size: int = 20) -> CandidateLibrary:
    base = pathway_library(m, block_size)
    return CandidateLibrary(base.candidates + tuple(build_decoy_library(m, block_size)))


_PRESETS = {
    "pathway100": lambda: pathway_library(100, 20),
    "pathway100+decoys": lambda: pathway_library_with_decoys(100, 20),
    "grid8": lambda: grid_library(8, 8),
}


def parse_library_spec(text: str) -> CandidateLibrary:
    """A library given as preset:<name>, dir:<path>, or a semicolon list of
    group constructor strings."""
    text = text.strip()
    if text.startswith("preset:"):
        name = text.split(":", 1)[1]
        if name not in _PRESETS:
            raise ValueError(f"unknown library preset {name!r}; "
                             f"have {sorted(_PRESETS)}")
        return _PRESETS[name]()
    if text.startswith("dir:"):
        return CandidateLibrary(tuple(groups.read_library_dir(text.split(":", 1)[1])))
    return CandidateLibrary(tuple(parse_group_spec(tok) for tok in text.split(";") if tok.strip()))


# ---------------------------------------------------------------------------
# Monte Carlo oracles: variance components and blend risk.
# ---------------------------------------------------------------------------

def _raw_second_moment(sigma: SymmetricMatrix, n: int, key) -> SymmetricMatrix:
    """Second moment (1/N) X^T X of mean-zero draws with no empirical
    centering: the theory oracles below need E[R_hat] = Sigma exactly, and
    column-centering would bias that expectation by a factor (N-1)/N."""
    w, u = np.linalg.eigh(sigma.values)
    root = (u * np.sqrt(np.maximum(w, 0.0))) @ u.T
    z = _rng(*key).standard_normal((n, sigma.dim))
    return matrixcore.second_moment(z @ root)


def estimate_variance_components(sigma: SymmetricMatrix, g: GroupAction, n: int,
                                 trials: int, seed: int):
    """Monte Carlo estimates of V_in = E||P_G(R - Sigma)||_F^2 and
    V_perp = E||(I - P_G)(R - Sigma)||_F^2 with standard errors."""
    v_in = np.empty(trials)
    v_perp = np.empty(trials)
    for t in range(trials):
        u = _raw_second_moment(sigma, n, (seed, "vc", t)).values - sigma.values
        u_in = reynolds_project(g, SymmetricMatrix(u)).values
        v_in[t] = np.sum(u_in**2)
        v_perp[t] = np.sum((u - u_in) ** 2)
    return (v_in.mean(), v_perp.mean(),
            v_in.std(ddof=1) / np.sqrt(trials), v_perp.std(ddof=1) / np.sqrt(trials))


def estimate_blend_risk(sigma: SymmetricMatrix, g: GroupAction, n: int,
                        alphas, trials: int, seed: int):
    """Monte Carlo E||blend(alpha) - Sigma||_F^2 at each alpha, with SEs.
    All alphas share each trial's draw (paired across the grid)."""
    alphas = np.asarray(alphas, dtype=float)
    risks = np.empty((trials, len(alphas)))
    for t in range(trials):
        r_hat = _raw_second_moment(sigma, n, (seed, "risk", t))
        proj = reynolds_project(g, r_hat)
        for j, alpha in enumerate(alphas):
            blend = (1.0 - alpha) * r_hat.values + alpha * proj.values
            risks[t, j] = np.sum((blend - sigma.values) ** 2)
    return risks.mean(axis=0), risks.std(axis=0, ddof=1) / np.sqrt(trials)


# ---------------------------------------------------------------------------
# Nonlinear-shrinkage verification harness.
# ---------------------------------------------------------------------------

def run_mp_verification(c: float, spec: PopulationSpec, trials: int,
                        base_seed: int = 0) -> list[dict]:
    """PRIAL of the linear and nonlinear shrinkage estimators against the
    sample covariance under the spec's population at concentration M/N = c.

    PRIAL(E) = 1 - E||E - Sigma||_F^2 / E||R - Sigma||_F^2, expectations by
    Monte Carlo over paired draws; standard errors by the delta method for
    the ratio of means.
    """
    if not 0.0 < c < 1.0:
        raise ValueError("concentration ratio must lie in (0, 1)")
    if trials < 10:
        raise ValueError("MP verification needs at least 10 trials")
    sigma = make_population(spec)
    n = round(spec.m / c)
    err = {"sample": np.empty(trials), "lw2004": np.empty(trials),
           "lwnl": np.empty(trials)}
    for t in range(trials):
        data = sample_gaussian(sigma, n, (base_seed, "mp", t))
        fits = {
            "sample": matrixcore.sample_covariance(data).values,
            "lw2004": shrinkage.lw2004_auto(data).matrix.values,
            "lwnl": shrinkage.lwnl(data).matrix.values,
        }
        for name, values in fits.items():
            err[name][t] = np.sum((values - sigma.values) ** 2)
    rows = []
    base = err["sample"]
    for name in ("lw2004", "lwnl"):
        ratio = err[name].mean() / base.mean()
        cov = np.cov(err[name], base, ddof=1)
        var_ratio = (cov[0, 0] / base.mean()**2
                     + err[name].mean()**2 * cov[1, 1] / base.mean()**4
                     - 2 * err[name].mean() * cov[0, 1] / base.mean()**3) / trials
        rows.append({
            "estimator": name,
            "prial": 100.0 * (1.0 - ratio),
            "se": 100.0 * math.sqrt(max(var_ratio, 0.0)),
            "mean_err": err[name].mean(),
            "mean_err_sample": base.mean(),
            "trials": trials,
        })
    return rows


# ---------------------------------------------------------------------------
# The trial sweep.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    population: PopulationSpec
    library: CandidateLibrary
    n_list: tuple[int, ...]
    n_test: int = 200
    kappa: float = bmg_mod.DEFAULT_KAPPA
    grid_points: int = 13
    folds: int = 5
    trials: int = 50
    base_seed: int = 1
    estimators: tuple[str, ...] = ESTIMATOR_ORDER

    def __post_init__(self) -> None:
        unknown = set(self.estimators) - set(ESTIMATOR_ORDER)
        if unknown:
            raise ValueError(f"unknown estimator toggles {sorted(unknown)}")
        if not self.n_list:
            raise ValueError("sweep needs at least one training-size cell")

    @property
    def grid(self) -> AlphaGrid:
        return AlphaGrid.uniform(self.grid_points)


@dataclass
class TrialRecord:
    cell_n: int
    trial: int
    seed: int
    nll: dict
    frob: dict
    ad: BMGReport | None = None
    ad_lwnl: BMGReport | None = None
    choice_agree: bool | None = None
    error: str | None = None


TRIAL_CSV_COLUMNS = (
    ["cell_n", "trial", "seed"]
    + [f"nll_{e}" for e in ESTIMATOR_ORDER]
    + [f"frob_{e}" for e in ESTIMATOR_ORDER]
    + ["ad_selected", "ad_alpha", "ad_margin", "ad_delta", "ad_fallback",
       "adlwnl_selected", "adlwnl_alpha", "adlwnl_margin", "adlwnl_delta",
       "adlwnl_fallback", "choice_agree", "error"]
)


def _run_one_trial(config: SweepConfig, sigma: SymmetricMatrix, cell_idx: int,
                   trial: int) -> TrialRecord:
    n = config.n_list[cell_idx]
    record = TrialRecord(cell_n=n, trial=trial, seed=config.base_seed,
                         nll={}, frob={})
    try:
        train = sample_gaussian(sigma, n, (config.base_seed, cell_idx, trial, 0))
        test = sample_gaussian(sigma, config.n_test,
                               (config.base_seed, cell_idx, trial, 1))
        r_test = matrixcore.sample_covariance(test)
        folds = FoldScheme.feasible_contiguous(n, config.folds)
        wanted = set(config.estimators)
        fitted: dict[str, SymmetricMatrix] = {}
        if "sample" in wanted:
            fitted["sample"] = matrixcore.sample_covariance(train)
        if "lw2004" in wanted:
            fitted["lw2004"] = shrinkage.lw2004_auto(train).matrix
        if "lwnl" in wanted:
            fitted["lwnl"] = shrinkage.lwnl(train).matrix
        if wanted & {"ad_bmg", "shah_bmg"}:
            est_ad, record.ad = bmg_mod.bmg_with_fallback(
                train, config.library, config.kappa, config.grid, folds,
                use_lwnl=False)
            if "ad_bmg" in wanted:
                fitted["ad_bmg"] = est_ad.matrix
            if "shah_bmg" in wanted:
                fitted["shah_bmg"] = bmg_mod.shah_at_selected(
                    train, config.library, record.ad).matrix
        if "ad_lwnl_bmg" in wanted:
            est_lw, record.ad_lwnl = bmg_mod.bmg_with_fallback(
                train, config.library, config.kappa, config.grid, folds,
                use_lwnl=True)
            fitted["ad_lwnl_bmg"] = est_lw.matrix
        for name, matrix in fitted.items():
            record.nll[name] = matrixcore.gaussian_nll_per_sample(matrix, r_test)
            record.frob[name] = float(np.linalg.norm(matrix.values - sigma.values, "fro"))
        if record.ad is not None and record.ad_lwnl is not None:
            record.choice_agree = (not record.ad.fallback_used
                                   and not record.ad_lwnl.fallback_used
                                   and record.ad.selected == record.ad_lwnl.selected)
    except Exception as exc:  # per-trial failures never abort the sweep
        record.error = f"{type(exc).__name__}: {exc}"
    return record


def run_trial_sweep(config: SweepConfig, threads: int = 1):
    """Yield one TrialRecord per (cell, trial) in deterministic order.

    Trials are embarrassingly parallel; each owns its seeded stream, and
    emission is order-buffered so the output stream does not depend on the
    worker count.
    """
    sigma = make_population(config.population)
    tasks = [(ci, t) for ci in range(len(config.n_list))
             for t in range(config.trials)]
    if threads <= 1:
        for ci, t in tasks:
            yield _run_one_trial(config, sigma, ci, t)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(lambda ct: _run_one_trial(config, sigma, *ct), tasks)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trial_record_row(record: TrialRecord) -> str:
    ad, adlw = record.ad, record.ad_lwnl
    fields = [str(record.cell_n), str(record.trial), str(record.seed)]
    fields += [_fmt(record.nll.get(e)) for e in ESTIMATOR_ORDER]
    fields += [_fmt(record.frob.get(e)) for e in ESTIMATOR_ORDER]
    for rep in (ad, adlw):
        if rep is None:
            fields += ["", "", "", "", ""]
        else:
            fields += [rep.selected, _fmt(rep.alpha), _fmt(rep.bmg_margin),
                       _fmt(rep.delta), _fmt(rep.fallback_used)]
    fields.append(_fmt(record.choice_agree))
    fields.append(record.error or "")
    return ",".join(fields)


def write_trial_records_csv(path, records) -> None:
    """Streaming emission: flushed per record, so an interrupted run leaves
    a file truncated at a record boundary."""
    with open(path, "w") as fh:
        fh.write(",".join(TRIAL_CSV_COLUMNS) + "\n")
        for record in records:
            fh.write(trial_record_row(record) + "\n")
            fh.flush()


# ---------------------------------------------------------------------------
# Sweep configuration files: key=value lines, # comments.
# ---------------------------------------------------------------------------

def parse_sweep_config(path) -> SweepConfig:
    raw: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line {line!r} (expected key=value)")
            key, val = line.split("=", 1)
            raw[key.strip()] = val.strip()
    try:
        m = int(raw["m"])
        group = parse_group_spec(raw["population_group"]) if "population_group" in raw else None
        population = PopulationSpec(
            m=m,
            kind=raw.get("population", POP_RANDOM_SPD),
            base_seed=int(raw.get("population_seed", 0)),
            group=group,
            target_delta=float(raw["target_delta"]) if "target_delta" in raw else None,
            two_block_ratio=float(raw.get("two_block_ratio", 8.0)),
            two_block_split=float(raw.get("two_block_split", 0.25)),
            geometric_decay=float(raw.get("geometric_decay", 0.9)),
            block_size=int(raw.get("block_size", 20)),
            circulant_rho=float(raw.get("circulant_rho", 0.5)),
            cross_block=float(raw.get("cross_block", 0.1)),
        )
        library = parse_library_spec(raw["library"])
        estimators = tuple(tok.strip() for tok in
                           raw.get("estimators", ",".join(ESTIMATOR_ORDER)).split(",")
                           if tok.strip())
        return SweepConfig(
            population=population,
            library=library,
            n_list=tuple(int(tok) for tok in raw["n_list"].split(",")),
            n_test=int(raw.get("n_test", 200)),
            kappa=float(raw.get("kappa", bmg_mod.DEFAULT_KAPPA)),
            grid_points=int(raw.get("grid_points", 13)),
            folds=int(raw.get("folds", 5)),
            trials=int(raw.get("trials", 50)),
            base_seed=int(raw.get("base_seed", 1)),
            estimators=estimators,
        )
    except KeyError as exc:
        raise ValueError(f"sweep config missing required key {exc}") from exc
