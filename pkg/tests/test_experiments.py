"""Rate and misspecification studies, slope fits and report emission."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracbayes.experiments import (
    MisspecStudyConfig,
    ModelSetup,
    RateReport,
    RateStudyConfig,
    StudyConfigError,
    emit_report,
    exceedance_bound,
    fit_rate_slope,
    oracle_minimizer,
    predicted_rate,
    project_l1_ball,
    quadratic_risk,
    read_cells,
    run_misspec_study,
    run_rate_study,
)
from fracbayes.experiments import rates as rates_mod

SMALL_SETUP = ModelSetup(iterations=200, burn_in=50)


def small_rate_config(**kw):
    spec = dict(
        n_grid=(20, 40, 80),
        d_grid=(100,),
        s_grid=(1,),
        setup=SMALL_SETUP,
        sigma0=0.3,
        replications=3,
        functional_m=200,
        max_draws=50,
    )
    spec.update(kw)
    return RateStudyConfig(**spec)


class TestPredictedRate:
    """``eps_n = c s log(C_x C_1 sqrt(n d)/s)/n``."""

    def test_worked_example(self):
        expected = 3 * math.log(2.0 * 10.0 * math.sqrt(100 * 400) / 3) / 100
        assert predicted_rate(100, 400, 3, 2.0, 10.0) == pytest.approx(expected, rel=1e-14)

    def test_zero_sparsity_uses_one(self):
        assert predicted_rate(50, 10, 0, 1.0, 1.0) == predicted_rate(50, 10, 1, 1.0, 1.0)

    def test_constant_is_linear(self):
        assert predicted_rate(50, 10, 2, 1.0, 5.0, c=3.0) == pytest.approx(3.0 * predicted_rate(50, 10, 2, 1.0, 5.0))

    def test_rejects_nonpositive_n(self):
        with pytest.raises(ValueError):
            predicted_rate(0, 10, 1, 1.0, 1.0)

    def test_spike_slab_setup_has_no_c1_factor(self):
        setup = ModelSetup(prior="spike_slab", c1=1e6)
        c_x = setup.design(10).c_x
        assert setup.rate(50, 10, 2) == pytest.approx(predicted_rate(50, 10, 2, c_x, 1.0))

    def test_student_setup_uses_c1(self):
        setup = ModelSetup(c1=100.0)
        c_x = setup.design(10).c_x
        assert setup.rate(50, 10, 2) == pytest.approx(predicted_rate(50, 10, 2, c_x, 100.0))


class TestFitRateSlope:
    """Log-log least squares recovers exact power laws."""

    @given(
        slope=st.floats(-3.0, 3.0),
        scale=st.floats(0.01, 100.0),
        xs=st.lists(st.floats(0.01, 1e3), min_size=3, max_size=8, unique=True),
    )
    def test_exact_power_law(self, slope, scale, xs):
        if np.ptp(np.log(xs)) < 1e-3:
            return
        pts = [(x, scale * x**slope) for x in xs]
        fit = fit_rate_slope(pts)
        assert fit.slope == pytest.approx(slope, abs=1e-8)
        assert fit.intercept == pytest.approx(math.log(scale), abs=1e-7)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-9) or slope == pytest.approx(0.0, abs=1e-9)
        assert fit.points == len(xs)

    def test_perturbed_slope_close(self, rng):
        x = np.geomspace(10, 1000, 12)
        y = 2.0 * x**-1.0 * np.exp(0.02 * rng.standard_normal(x.size))
        fit = fit_rate_slope(np.column_stack([x, y]))
        assert fit.slope == pytest.approx(-1.0, abs=0.05)
        assert fit.r_squared > 0.99

    @pytest.mark.parametrize(
        "points, message",
        [
            ([(1.0, 1.0), (2.0, 2.0)], "at least 3"),
            ([(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)], "positive"),
            ([(1.0, 1.0), (2.0, math.nan), (3.0, 1.0)], "positive"),
            ([(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)], "all equal"),
            ([1.0, 2.0, 3.0], "pairs"),
        ],
    )
    def test_rejects_bad_points(self, points, message):
        with pytest.raises(ValueError, match=message):
            fit_rate_slope(points)


class TestRateStudyConfig:
    """Validation of grids and assertion keys."""

    def test_s_not_below_n(self):
        with pytest.raises(StudyConfigError, match="s\\* < n"):
            small_rate_config(n_grid=(2,), s_grid=(2,))

    def test_s_above_d(self):
        with pytest.raises(StudyConfigError, match="s\\* > d"):
            small_rate_config(d_grid=(2,), s_grid=(3,))

    def test_too_few_replications(self):
        with pytest.raises(StudyConfigError, match="replications"):
            small_rate_config(replications=2)

    def test_unknown_metric(self):
        with pytest.raises(StudyConfigError, match="bad metric"):
            small_rate_config(metrics=("nonsense",))

    def test_unknown_assertion(self):
        with pytest.raises(StudyConfigError, match="unknown assertions"):
            small_rate_config(assertions={"slope_d": {}})

    def test_unknown_key_from_dict(self):
        with pytest.raises(StudyConfigError, match="unknown rate-study keys"):
            RateStudyConfig.from_dict({"n_grid": [20], "d_grid": [5], "s_grid": [1], "bogus": 1})

    def test_unknown_setup_key(self):
        with pytest.raises(StudyConfigError, match="unknown setup keys"):
            ModelSetup.from_dict({"bogus": 1})

    def test_mala_needs_step_size(self):
        with pytest.raises(StudyConfigError, match="step_size"):
            ModelSetup(sampler="mala")

    def test_grid_order(self):
        cfg = small_rate_config(n_grid=(20, 40), d_grid=(100, 200), s_grid=(1, 2))
        assert cfg.grid()[:3] == [(20, 100, 1), (40, 100, 1), (20, 100, 2)]

    def test_regime_warnings(self):
        cfg = small_rate_config(n_grid=(20, 200))
        warnings_ = cfg.regime_warnings()
        assert len(warnings_) == 1 and "n=200" in warnings_[0]

    def test_order_defaults_to_alpha(self):
        assert small_rate_config().order == pytest.approx(0.9)
        regular = small_rate_config(setup=ModelSetup(alpha=1.0, iterations=200, burn_in=50))
        assert regular.order == 0.5


@pytest.fixture(scope="module")
def report():
    return run_rate_study(small_rate_config())


class TestRunRateStudy:
    """End-to-end behaviour on a tiny grid."""

    def test_cells_and_checks(self, report):
        assert len(report.cells) == 3
        assert all(c.metric == "sq_l2_error" and len(c.values) == 3 for c in report.cells)
        assert all(np.isfinite(c.mean) and c.mean > 0 for c in report.cells)
        names = [c.name for c in report.checks]
        assert "all cells completed" in names and "monotone in n: sq_l2_error" in names

    def test_slope_rows(self, report):
        axes = {(r.axis, r.slice) for r in report.slope_fits}
        assert ("n", "d=100,s_star=1") in axes and ("predicted_rate", "all") in axes

    def test_error_decreases_in_n(self, report):
        means = [report.cell(n, 100, 1, "sq_l2_error").mean for n in (20, 40, 80)]
        assert means[2] < means[0]

    def test_deterministic(self, report):
        again = run_rate_study(small_rate_config())
        assert [c.values for c in again.cells] == [c.values for c in report.cells]

    def test_committed_constant_noted(self, report):
        assert any("gaussian_iso/student" in note for note in report.notes)

    def test_sampler_failure_is_recorded(self, monkeypatch):
        from fracbayes.samplers import SamplerError

        def broken(self, data, seed):
            raise SamplerError("forced failure")

        monkeypatch.setattr(ModelSetup, "run_chain", broken)
        report = run_rate_study(small_rate_config(check_monotone=False))
        assert not report.passed
        assert len(report.failures) == 9 and "forced failure" in report.failures[0]
        assert all(math.isnan(c.mean) and c.failures == 3 for c in report.cells)

    def test_missing_cell_raises(self, report):
        with pytest.raises(KeyError):
            report.cell(1, 1, 1, "sq_l2_error")

    def test_s_ratio_assertion(self):
        cfg = small_rate_config(
            n_grid=(40,), s_grid=(1, 2), assertions={"s_ratio": {"metric": "sq_l2_error", "range": [0.0, 1e9]}}
        )
        report = run_rate_study(cfg)
        ratio = [c for c in report.checks if c.name.startswith("risk ratio")]
        assert len(ratio) == 1 and ratio[0].passed

    def test_impossible_slope_assertion_fails(self):
        cfg = small_rate_config(assertions={"slope_n": {"metric": "sq_l2_error", "range": [5.0, 6.0]}})
        report = run_rate_study(cfg)
        assert not report.passed


class TestExceedance:
    """High-probability statement in frequency form."""

    def test_bound_value(self):
        p0 = 2.0 / (100 * 0.5)
        expected = p0 + 3 * math.sqrt(p0 * (1 - p0) / 50)
        assert exceedance_bound(100, 0.5, 50) == pytest.approx(expected)

    def test_vacuous_bound_at_least_one(self):
        assert exceedance_bound(100, 0.001, 50) >= 1.0

    def test_checks_emitted_for_renyi_metric(self):
        cfg = small_rate_config(n_grid=(40,), metrics=("joint_divergence:renyi_0.9",), check_monotone=False)
        report = run_rate_study(cfg)
        names = [c.name for c in report.checks]
        assert any(name.startswith("exceedance frequency") for name in names)


class TestReport:
    """CSV and Markdown emission."""

    def test_empty_report_headers_only(self, tmp_path):
        paths = emit_report(RateReport(), tmp_path)
        assert paths["cells.csv"].read_bytes() == b"n,d,s_star,metric,mean,se,predicted_rate\r\n"
        assert paths["slopes.csv"].read_bytes() == b"metric,axis,slice,slope,intercept,r_squared,points\r\n"
        assert read_cells(paths["cells.csv"]) == []

    def test_round_trip(self, tmp_path):
        report = run_rate_study(small_rate_config(n_grid=(20, 40), check_monotone=False))
        paths = emit_report(report, tmp_path)
        cells = read_cells(paths["cells.csv"])
        for got, want in zip(cells, report.cells):
            assert (got.n, got.d, got.s_star, got.metric) == (want.n, want.d, want.s_star, want.metric)
            assert got.mean == want.mean and got.se == want.se and got.predicted_rate == want.predicted_rate

    def test_byte_identical_reruns(self, tmp_path):
        cfg = small_rate_config(n_grid=(20, 40), check_monotone=False)
        a = emit_report(run_rate_study(cfg), tmp_path / "a")
        b = emit_report(run_rate_study(cfg), tmp_path / "b")
        for name in ("cells.csv", "slopes.csv", "report.md"):
            assert a[name].read_bytes() == b[name].read_bytes()

    def test_markdown_status(self, tmp_path):
        report = RateReport()
        report.checks.append(rates_mod.CheckResult("x", False, "why"))
        text = emit_report(report, tmp_path)["report.md"].read_text()
        assert "**FAIL**" in text and "| x | FAIL | why |" in text


class TestProjectL1Ball:
    """Euclidean projection onto the l1 ball."""

    @given(
        v=st.lists(st.floats(-10, 10), min_size=1, max_size=12),
        radius=st.floats(0.01, 20.0),
    )
    def test_feasible_and_optimal(self, v, radius):
        v = np.asarray(v)
        x = project_l1_ball(v, radius)
        assert np.abs(x).sum() <= radius * (1 + 1e-9) + 1e-12
        if np.abs(v).sum() <= radius:
            np.testing.assert_array_equal(x, v)
            return
        # KKT: x = soft(v, t) with a common threshold t on the support
        assert np.abs(x).sum() == pytest.approx(radius, rel=1e-9)
        assert np.all(np.sign(x) * np.sign(v) >= 0)
        support = np.abs(x) > 1e-12
        shifts = np.abs(v[support]) - np.abs(x[support])
        np.testing.assert_allclose(shifts, shifts[0], atol=1e-9)
        assert np.all(np.abs(v[~support]) <= shifts[0] + 1e-9)

    def test_known_value(self):
        np.testing.assert_allclose(project_l1_ball([3.0, 1.0, 0.0], 2.0), [2.0, 0.0, 0.0])
        np.testing.assert_allclose(project_l1_ball([1.0, 1.0], 1.0), [0.5, 0.5])

    def test_beats_random_feasible_points(self, rng):
        v = rng.normal(size=6) * 3
        x = project_l1_ball(v, 1.5)
        for _ in range(200):
            z = rng.normal(size=6)
            z *= 1.5 * rng.uniform() / np.abs(z).sum()
            assert np.sum((v - x) ** 2) <= np.sum((v - z) ** 2) + 1e-12


def small_misspec_config(**kw):
    spec = dict(
        n_grid=(40, 80),
        d_grid=(10,),
        s_grid=(2,),
        setup=SMALL_SETUP,
        sigma0=0.3,
        replications=3,
        oracle_samples=20_000,
    )
    spec.update(kw)
    return MisspecStudyConfig(**spec)


class TestMisspec:
    """Nonlinear truths and truths outside the prior's support."""

    def test_linear_link_is_degenerate_control(self):
        cfg = small_misspec_config(link="linear")
        assert cfg.well_specified
        report = run_misspec_study(cfg)
        oracle = [c for c in report.cells if c.metric != "prediction_risk"]
        assert all(abs(c.mean) < 1e-10 for c in oracle)
        assert any("well specified" in note for note in report.notes)

    def test_linear_link_oracle_recovers_truth(self):
        cfg = small_misspec_config(link="linear")
        risk = quadratic_risk(cfg, 10, 2, 5)
        np.testing.assert_allclose(oracle_minimizer(cfg, risk, 10, 2), cfg.truth_theta(10, 2), atol=1e-6)

    def test_sin_link_has_positive_oracle_term(self):
        cfg = small_misspec_config()
        assert not cfg.well_specified
        risk = quadratic_risk(cfg, 10, 2, 5)
        theta = oracle_minimizer(cfg, risk, 10, 2)
        assert risk(theta)[0] > 0.01
        # first-order optimality of the least-squares oracle
        np.testing.assert_allclose(risk.gram @ theta, risk.cross, atol=1e-6)

    def test_sin_study_runs(self):
        report = run_misspec_study(small_misspec_config())
        risk = [c for c in report.cells if c.metric == "prediction_risk"]
        assert len(risk) == 2 and all(np.isfinite(c.mean) for c in risk)
        assert "all cells completed" in [c.name for c in report.checks]

    def test_outside_ball_oracle_is_projection(self):
        setup = ModelSetup(iterations=200, burn_in=50, c1=2.0)
        cfg = small_misspec_config(truth_kind="outside_l1_ball", setup=setup)
        theta0 = cfg.truth_theta(10, 2)
        assert np.abs(theta0).sum() == pytest.approx(4.0)
        theta = oracle_minimizer(cfg, quadratic_risk(cfg, 10, 2, 5), 10, 2)
        assert np.abs(theta).sum() == pytest.approx(2.0)

    @pytest.mark.parametrize(
        "kw, message",
        [
            (dict(link="cubic"), "unknown link"),
            (dict(truth_kind="other"), "unknown truth kind"),
            (dict(truth_kind="outside_l1_ball", l1_scale=0.5), "l1_scale"),
            (dict(oracle_samples=10), "oracle_samples"),
            (dict(s_grid=(0,)), "s\\*"),
        ],
    )
    def test_validation(self, kw, message):
        with pytest.raises(StudyConfigError, match=message):
            small_misspec_config(**kw)
