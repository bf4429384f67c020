import math

import numpy as np
import pytest

from symcov import groups, synth
from symcov.bmg import (
    BMGReport,
    CandidateLibrary,
    bmg_with_fallback,
    delta_residual,
    effective_order,
    report_rows,
    shah_at_selected,
    tier1_admit,
    tier2_select,
    write_report_csv,
)
from symcov.calibration import AlphaGrid, FoldScheme
from symcov.matrixcore import Dataset, SymmetricMatrix, sample_covariance


def small_library(m=4):
    return CandidateLibrary((
        groups.trivial(m),
        groups.transposition(m, 0, 1),
        groups.full_symmetric(m),
    ))


class TestCandidateLibrary:
    def test_unique_names_required(self):
        with pytest.raises(ValueError):
            CandidateLibrary((groups.trivial(3), groups.trivial(3)))

    def test_extrema_flags(self):
        lib = small_library()
        assert lib.contains_trivial
        assert lib.contains_full_symmetric


class TestTier1:
    def test_trivial_excluded_at_small_n(self):
        lib = CandidateLibrary((groups.trivial(100), groups.tied_cyclic_blocks(20, 5)))
        admitted = tier1_admit(lib, n=50, m=100, kappa=2.0)
        # 50 * 1 = 50 < 200 but 50 * 20 = 1000 >= 200
        assert "trivial-100" not in admitted
        assert "z20-tied5" in admitted

    def test_boundary_equality_admits(self):
        lib = CandidateLibrary((groups.trivial(1),))
        assert tier1_admit(lib, n=1, m=1, kappa=1.0) == ["trivial-1"]

    def test_monotone_in_kappa(self):
        lib = CandidateLibrary((groups.trivial(10), groups.transposition(10),
                                groups.cyclic(10), groups.full_symmetric(10)))
        prev = None
        for kappa in (1.0, 1.5, 2.0, 3.0, 5.0):
            admitted = set(tier1_admit(lib, n=2, m=10, kappa=kappa))
            if prev is not None:
                assert admitted <= prev
            prev = admitted

    def test_symbolic_orders_admit_through_bound(self):
        g = groups.wreath_shifts(20, 5)  # order ~3.8e8, stored exactly
        lib = CandidateLibrary((g,))
        assert tier1_admit(lib, n=50, m=100, kappa=2.0) == [g.name]
        assert effective_order(g) == min(g.order_lower_bound, 10**18)

    def test_order_override(self):
        lib = CandidateLibrary((groups.trivial(100),))
        assert tier1_admit(lib, 50, 100, 2.0, order_bound={"trivial-100": 1000}) \
            == ["trivial-100"]

    def test_kappa_below_one_rejected(self):
        with pytest.raises(ValueError):
            tier1_admit(small_library(), 10, 4, kappa=0.5)


class TestDeltaResidual:
    def test_invariant_matrix_zero(self):
        g = groups.full_symmetric(3)
        sigma = SymmetricMatrix(np.eye(3) + 0.5 * (np.ones((3, 3)) - np.eye(3)))
        assert delta_residual(g, sigma) <= 1e-12

    def test_trivial_group_zero(self):
        rng = np.random.default_rng(60)
        a = rng.standard_normal((4, 4))
        assert delta_residual(groups.trivial(4), SymmetricMatrix(a @ a.T)) == 0.0

    def test_hand_value_full_symmetric(self):
        # R = diag(1, 3) projects to 2 I; residual sqrt(2)/sqrt(10)
        r = SymmetricMatrix(np.diag([1.0, 3.0]))
        got = delta_residual(groups.full_symmetric(2), r)
        assert got == pytest.approx(math.sqrt(2.0 / 10.0), rel=1e-12)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            delta_residual(groups.trivial(2), SymmetricMatrix(np.zeros((2, 2))))


class TestTier2:
    def test_trivial_only_library(self):
        rng = np.random.default_rng(61)
        data = Dataset(rng.standard_normal((20, 4))).center()
        lib = CandidateLibrary((groups.trivial(4),))
        report = tier2_select(data, list(lib.candidates))
        assert report.selected == "trivial-4"
        assert report.bmg_margin == 0.0
        assert report.alpha == 0.0  # ties break to the smallest alpha

    def test_margin_nonnegative_and_scores_recorded(self):
        rng = np.random.default_rng(62)
        data = Dataset(rng.standard_normal((24, 4))).center()
        lib = small_library()
        report = tier2_select(data, list(lib.candidates))
        assert report.bmg_margin >= 0.0
        assert set(report.tier2_scores) == {g.name for g in lib.candidates}
        best = min(report.tier2_scores.values())
        assert report.tier2_scores[report.selected] == best

    def test_structural_zero_margin_when_both_calibrate_to_zero(self):
        # strongly mismatched population at large N: two non-trivial
        # candidates both pick alpha = 0, so their blends are the sample
        # covariance and the margin between them is exactly zero.
        sigma = synth.make_population(
            synth.PopulationSpec(m=8, kind=synth.POP_GEOMETRIC, base_seed=5,
                                 geometric_decay=0.5))
        data = synth.sample_gaussian(sigma, 400, (63, 1))
        cands = [groups.grid_translation2d(2, 4), groups.grid_klein(2, 4)]
        report = tier2_select(data, cands)
        assert report.tier2_alphas[cands[0].name] == 0.0
        assert report.tier2_alphas[cands[1].name] == 0.0
        assert report.bmg_margin == 0.0
        assert report.tied

    def test_determinism_including_tie_break(self):
        rng = np.random.default_rng(64)
        data = Dataset(rng.standard_normal((24, 4))).center()
        lib = small_library()
        a = tier2_select(data, list(lib.candidates))
        b = tier2_select(data, list(lib.candidates))
        assert a == b

    def test_empty_admitted_rejected(self):
        rng = np.random.default_rng(65)
        data = Dataset(rng.standard_normal((10, 4))).center()
        with pytest.raises(ValueError):
            tier2_select(data, [])


class TestFallback:
    def test_nothing_admitted_falls_back_to_linear_shrinkage(self):
        # N=1, small groups, kappa=2: nothing passes the prefilter
        data = Dataset(np.ones((1, 100))).center()
        lib = CandidateLibrary((groups.trivial(100), groups.transposition(100),
                                groups.cyclic(100)))
        est, report = bmg_with_fallback(data, lib, kappa=2.0)
        assert report.fallback_used
        assert report.selected == ""
        assert est.estimator_name == "lw2004"

    def test_total_on_valid_data(self):
        rng = np.random.default_rng(66)
        for n in (1, 2, 5, 30):
            data = Dataset(rng.standard_normal((n, 6))).center()
            lib = CandidateLibrary((groups.trivial(6), groups.full_symmetric(6)))
            est, report = bmg_with_fallback(data, lib)
            assert est.matrix.dim == 6

    def test_shah_at_selected_under_fallback_is_sample(self):
        data = Dataset(np.ones((1, 50))).center()
        lib = CandidateLibrary((groups.trivial(50),))
        est, report = bmg_with_fallback(data, lib, kappa=2.0)
        shah = shah_at_selected(data, lib, report)
        np.testing.assert_array_equal(shah.matrix.values,
                                      sample_covariance(data).values)


class TestReportCsv:
    def test_rows_cover_candidates(self, tmp_path):
        rng = np.random.default_rng(67)
        data = Dataset(rng.standard_normal((24, 4))).center()
        lib = small_library()
        est, report = bmg_with_fallback(data, lib, kappa=1.0)
        path = tmp_path / "report.csv"
        write_report_csv(path, lib, report)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "candidate,admitted,mean_cv_nll,best_alpha,selected,margin,delta"
        assert len(lines) == 1 + len(lib.candidates)
        selected_rows = [ln for ln in lines[1:] if ln.split(",")[4] == "1"]
        assert len(selected_rows) == 1

    def test_trial_column(self):
        rng = np.random.default_rng(68)
        data = Dataset(rng.standard_normal((24, 4))).center()
        lib = small_library()
        _, report = bmg_with_fallback(data, lib, kappa=1.0)
        rows = report_rows(lib, report, trial=7)
        assert all(row.startswith("7,") for row in rows)
