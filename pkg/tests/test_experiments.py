import json
import math

import numpy as np
import pytest

from fouhit.bounds import DomainError, ModelConfig, expected_sup_bound, FULL_RANGE
from fouhit.experiments import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentSpec,
    MCEstimate,
    VERDICT_CONSISTENT,
    VERDICT_NOT_APPLICABLE,
    estimate_mean_sup,
    estimate_tail,
    estimate_variance_at,
    load_experiment_specs,
    mean_estimate,
    parse_experiment_specs,
    report_to_csv,
    report_to_json,
    run_experiment,
    run_experiments,
    wilson_estimate,
)
from fouhit.simulate import SamplerConfig


def small_spec(H=0.5, T=1.0, eps=1.0, n_paths=2000, seed=10, u_values=(12.0,),
               diagnostic=(1.0,), grids=(65, 257)):
    return ExperimentSpec(
        cfg=ModelConfig(H=H, T=T, eps=eps),
        u_values=u_values,
        n_paths=n_paths,
        grid_sizes=grids,
        sampler=SamplerConfig("circulant", seed=seed),
        diagnostic_u_values=diagnostic,
    )


class TestWilson:
    def test_zero_successes(self):
        est = wilson_estimate(0, 10_000)
        assert est.mean == 0.0
        assert est.ci_low == 0.0
        assert 0.0 < est.ci_high < 2e-3
        assert est.stderr == 0.0

    def test_all_successes(self):
        est = wilson_estimate(10, 10)
        assert est.mean == 1.0
        assert est.ci_high == 1.0
        assert est.ci_low < 1.0

    def test_contains_point_estimate(self):
        for k in (1, 5, 50, 99):
            est = wilson_estimate(k, 100)
            assert est.ci_low <= est.mean <= est.ci_high

    def test_matches_binomial_stderr(self):
        est = wilson_estimate(30, 100)
        assert est.stderr == pytest.approx(math.sqrt(0.3 * 0.7 / 100))

    def test_level_widens_interval(self):
        narrow = wilson_estimate(30, 100, level=0.9)
        wide = wilson_estimate(30, 100, level=0.997)
        assert wide.ci_high - wide.ci_low > narrow.ci_high - narrow.ci_low

    def test_validation(self):
        with pytest.raises(DomainError):
            wilson_estimate(-1, 10)
        with pytest.raises(DomainError):
            wilson_estimate(11, 10)


class TestMeanEstimate:
    def test_known_samples(self):
        samples = np.array([1.0, 2.0, 3.0, 4.0])
        est = mean_estimate(samples)
        assert est.mean == pytest.approx(2.5)
        assert est.stderr == pytest.approx(np.std(samples, ddof=1) / 2.0)
        assert est.ci_low <= est.mean <= est.ci_high
        assert est.n_samples == 4


class TestSpecValidation:
    def test_accepts_valid(self):
        small_spec()

    def test_rejects_low_path_count(self):
        with pytest.raises(DomainError, match="n_paths"):
            small_spec(n_paths=50)

    def test_rejects_single_grid(self):
        with pytest.raises(DomainError, match="grid"):
            small_spec(grids=(257,))

    def test_rejects_incompatible_grids(self):
        with pytest.raises(DomainError, match="master"):
            small_spec(grids=(100, 257))

    def test_rejects_u_below_threshold(self):
        thr = expected_sup_bound(ModelConfig(H=0.5, T=1.0, eps=1.0), FULL_RANGE).value
        with pytest.raises(DomainError, match="u_values\\[0\\]"):
            small_spec(u_values=(thr * 0.9,))

    def test_diagnostic_u_may_be_low(self):
        spec = small_spec(u_values=(), diagnostic=(0.5,))
        assert spec.diagnostic_u_values == (0.5,)


class TestEstimators:
    def test_unreachable_barrier(self):
        spec = small_spec(n_paths=10_000, u_values=(1e10,), diagnostic=())
        est = estimate_tail(spec, 1e10, 257)
        assert est.mean == 0.0
        assert est.ci_high < 1e-3

    def test_tail_deterministic(self):
        spec = small_spec()
        a = estimate_tail(spec, 1.0, 257)
        b = estimate_tail(spec, 1.0, 257)
        assert a == b

    def test_tail_cltscaling(self):
        # doubling the path budget shrinks stderr by about 1/sqrt(2)
        base = small_spec(n_paths=4000, seed=3)
        double = small_spec(n_paths=8000, seed=3)
        se1 = estimate_tail(base, 1.0, 257).stderr
        se2 = estimate_tail(double, 1.0, 257).stderr
        ratio = se2 / se1
        assert abs(ratio - 1.0 / math.sqrt(2.0)) < 0.2 / math.sqrt(2.0)

    def test_tail_grid_membership_enforced(self):
        with pytest.raises(DomainError):
            estimate_tail(small_spec(), 1.0, 129)

    def test_mean_sup_abs_dominates(self):
        spec = small_spec()
        plain = estimate_mean_sup(spec, "fbm", 257)
        folded = estimate_mean_sup(spec, "fbm-abs", 257)
        assert folded.mean >= plain.mean

    def test_mean_sup_rejects_unknown_process(self):
        with pytest.raises(DomainError):
            estimate_mean_sup(small_spec(), "ou", 257)

    def test_variance_at_origin_is_zero(self):
        est = estimate_variance_at(small_spec(n_paths=500), 0, 257)
        assert est.mean == 0.0

    def test_variance_index_validated(self):
        with pytest.raises(DomainError):
            estimate_variance_at(small_spec(), 257, 257)

    def test_variance_matches_ou(self):
        spec = small_spec(n_paths=20_000, grids=(257, 1025), seed=44)
        est = estimate_variance_at(spec, 1024, 1025)
        target = (1.0 - math.exp(-2.0)) / 2.0
        assert abs(est.mean - target) <= 3 * est.stderr + 1e-3

    def test_variance_matches_quadrature_at_h07(self):
        from fouhit.bounds import variance_exact

        spec = small_spec(H=0.7, n_paths=20_000, grids=(257, 1025), seed=45)
        est = estimate_variance_at(spec, 1024, 1025)
        target = variance_exact(spec.cfg, 1.0)
        assert abs(est.mean - target) <= 3 * est.stderr + 1e-3

    def test_tail_stays_below_half_range_bound(self):
        # a level just above the half-range threshold, where the bound is
        # nearly 1 and the empirical tail must sit far below it
        from fouhit.bounds import HALF_RANGE, tail_bound

        spec = small_spec(n_paths=20_000, grids=(257, 1025), seed=44, diagnostic=(2.2,))
        est = estimate_tail(spec, 2.2, 1025)
        bound = tail_bound(spec.cfg, 2.2, HALF_RANGE)
        assert est.mean + 3 * est.stderr <= min(bound, 1.0)


class TestRunExperiment:
    def test_row_layout_and_verdicts(self):
        spec = small_spec()
        report = run_experiment(spec)
        # grids ascending, certification u first, then diagnostic
        assert [r.grid_n for r in report.rows] == [65, 65, 257, 257]
        assert [r.u for r in report.rows] == [12.0, 1.0, 12.0, 1.0]
        cert = [r for r in report.rows if r.note.find("diagnostic") < 0]
        diag = [r for r in report.rows if "diagnostic-only" in r.note]
        assert all(r.verdict == VERDICT_CONSISTENT for r in cert)
        assert all(r.verdict == VERDICT_NOT_APPLICABLE for r in diag)
        assert all(r.bound_t1 is None and r.bound_t2 is None for r in diag)

    def test_bounds_present_iff_h_at_least_half(self):
        low = run_experiment(small_spec(H=0.3, seed=2)).rows[0]
        assert low.bound_t1 is None and low.threshold_t1 is None
        assert low.bound_t2 is not None
        high = run_experiment(small_spec(H=0.7, seed=2)).rows[0]
        assert high.bound_t1 is not None and high.threshold_t1 is not None

    def test_sigma_chain_note_at_t1(self):
        # T=1 sits in the flagged region; T=2 does not
        flagged = run_experiment(small_spec()).rows[0]
        assert "sigma-bound" in flagged.note
        clean = run_experiment(
            small_spec(T=2.0, u_values=(30.0,), diagnostic=(), seed=6)
        ).rows[0]
        assert "sigma-bound" not in clean.note

    def test_empty_levels_empty_report(self):
        report = run_experiment(small_spec(u_values=(), diagnostic=()))
        assert report.rows == ()
        assert report.violations == 0

    def test_p_hat_monotone_in_u_exact(self):
        spec = small_spec(u_values=(8.0, 9.5, 11.0), diagnostic=(0.3, 0.9, 1.5))
        report = run_experiment(spec)
        for grid in (65, 257):
            rows = [r for r in report.rows if r.grid_n == grid]
            by_u = sorted(rows, key=lambda r: r.u)
            means = [r.p_hat.mean for r in by_u]
            assert means == sorted(means, reverse=True)

    def test_grid_bias_direction_exact(self):
        # same driving paths: finer inspection can only add crossings
        spec = small_spec(diagnostic=(0.8,))
        report = run_experiment(spec)
        p_coarse = [r for r in report.rows if r.grid_n == 65 and r.u == 0.8][0]
        p_fine = [r for r in report.rows if r.grid_n == 257 and r.u == 0.8][0]
        assert p_fine.p_hat.mean >= p_coarse.p_hat.mean

    def test_matches_standalone_estimator(self):
        spec = small_spec()
        report = run_experiment(spec)
        row = [r for r in report.rows if r.grid_n == 257 and r.u == 12.0][0]
        assert row.p_hat == estimate_tail(spec, 12.0, 257)

    def test_row_level_error_does_not_abort_run(self, monkeypatch):
        import fouhit.experiments as ex

        def boom(successes, n, level=ex.DEFAULT_CI_LEVEL):
            raise ValueError("bad, comma, here")

        monkeypatch.setattr(ex, "wilson_estimate", boom)
        report = ex.run_experiment(small_spec(n_paths=200, grids=(9, 17)))
        assert all(r.verdict == VERDICT_NOT_APPLICABLE for r in report.rows)
        assert all(r.note.startswith("error:") for r in report.rows)
        text = report_to_csv(report)
        assert all(
            len(line.split(",")) == len(CSV_COLUMNS)
            for line in text.strip().splitlines()
        )


class TestSerialization:
    def test_csv_header_frozen(self):
        text = report_to_csv(run_experiment(small_spec()))
        header = text.splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        assert header == (
            "H,T,eps,u,grid_n,n_paths,p_mean,p_stderr,p_ci_low,p_ci_high,"
            "ci_level,bound_t1,bound_t2,threshold_t1,threshold_t2,verdict,note"
        )

    def test_reports_byte_identical_across_runs(self):
        spec = small_spec()
        first = run_experiment(spec)
        second = run_experiment(spec)
        assert report_to_csv(first) == report_to_csv(second)
        assert report_to_json(first) == report_to_json(second)

    def test_json_schema_fields(self):
        doc = json.loads(report_to_json(run_experiment(small_spec())))
        assert doc["schema"] == "fouhit-report-v1"
        assert doc["violations"] == 0
        row = doc["rows"][0]
        for key in (
            "H", "T", "eps", "u", "grid_n", "n_paths", "p_hat",
            "bound_t1", "bound_t2", "threshold_t1", "threshold_t2",
            "verdict", "note",
        ):
            assert key in row
        assert set(row["p_hat"]) == {
            "mean", "stderr", "n_samples", "ci_low", "ci_high", "ci_level"
        }

    def test_low_h_t1_cells_empty_in_csv(self):
        text = report_to_csv(run_experiment(small_spec(H=0.3, seed=2)))
        first_row = text.splitlines()[1].split(",")
        cols = dict(zip(CSV_COLUMNS, first_row))
        assert cols["bound_t1"] == ""
        assert cols["threshold_t1"] == ""
        assert cols["verdict"] == VERDICT_CONSISTENT

    def test_multi_spec_report_concatenates(self):
        specs = [small_spec(seed=1), small_spec(H=0.7, seed=2)]
        report = run_experiments(specs)
        assert len(report.rows) == 8
        assert {r.H for r in report.rows} == {0.5, 0.7}


class TestConfigParsing:
    def _doc(self):
        return {
            "experiments": [
                {
                    "H": 0.5,
                    "T": 1.0,
                    "eps": 1.0,
                    "u_values": [12.0],
                    "diagnostic_u_values": [1.0],
                    "n_paths": 200,
                    "grid_sizes": [17, 65],
                    "sampler": {"method": "circulant", "seed": 3},
                }
            ]
        }

    def test_parses_valid(self):
        specs = parse_experiment_specs(self._doc())
        assert len(specs) == 1
        assert specs[0].sampler.seed == 3
        assert specs[0].sampler.jitter == 1e-12

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(self._doc()))
        specs = load_experiment_specs(path)
        assert specs[0].n_paths == 200

    def test_truncated_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"experiments": [')
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_experiment_specs(path)

    def test_missing_field_named(self):
        doc = self._doc()
        del doc["experiments"][0]["n_paths"]
        with pytest.raises(ConfigError, match=r"experiments\[0\]\.n_paths"):
            parse_experiment_specs(doc)

    def test_unknown_field_named(self):
        doc = self._doc()
        doc["experiments"][0]["npaths"] = 3
        with pytest.raises(ConfigError, match=r"experiments\[0\]\.npaths"):
            parse_experiment_specs(doc)

    def test_bad_sampler_method_named(self):
        doc = self._doc()
        doc["experiments"][0]["sampler"]["method"] = "sobol"
        with pytest.raises(ConfigError, match=r"experiments\[0\]\.sampler"):
            parse_experiment_specs(doc)

    def test_bad_h_named(self):
        doc = self._doc()
        doc["experiments"][0]["H"] = 1.5
        with pytest.raises(ConfigError, match=r"experiments\[0\]"):
            parse_experiment_specs(doc)

    def test_missing_experiments_key(self):
        with pytest.raises(ConfigError, match="experiments"):
            parse_experiment_specs({"runs": []})
