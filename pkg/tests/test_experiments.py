import numpy as np
import pytest

from unlinked_deconv import experiments as ex
from unlinked_deconv.experiments import ExperimentConfig, RateStudyResult, mc_aggregate


def test_mc_aggregate_examples():
    out = mc_aggregate([1.0, 2.0, 3.0], k_list=(1, 2))
    assert out["moments"][1] == 2.0
    assert out["moments"][2] == pytest.approx(14 / 3)
    values = np.random.default_rng(0).permutation(np.arange(1.0, 501.0))
    assert mc_aggregate(values, q=0.99)["quantile"] == np.sort(values)[494]
    with pytest.raises(ValueError):
        mc_aggregate([])


def test_slopes_from_exact_power_law():
    ns = (500, 1000, 2000, 4000)
    records = {n: [{"rep": r, "w1": 3 * n**-0.5, "dist": 0.0} for r in range(5)] for n in ns}
    slopes = RateStudyResult("a", ns, records).slopes
    for key, expected in (("W1^1", -0.5), ("W1^2", -1.0), ("W1^3", -1.5), ("q0.99", -0.5)):
        assert abs(slopes[key] - expected) < 1e-12


def test_config_validation_and_presets():
    with pytest.raises(ValueError):
        ExperimentConfig(reps=0)
    with pytest.raises(ValueError):
        ExperimentConfig(setting="b", n_list=(2,))
    with pytest.raises(ValueError):
        ExperimentConfig(sigma2_list=(0.0,))
    with pytest.raises(ValueError):
        ExperimentConfig(setting="q")
    paper = ExperimentConfig.preset("rates", "paper")
    assert paper.reps == 500 and paper.reference_size == 1_000_000 and max(paper.n_list) == 5000
    desk = ExperimentConfig.preset("rates")
    assert desk.reps == 100 and desk.n_list == (500, 1000, 2000, 4000) and desk.reference_size == 100_000
    assert ExperimentConfig.preset("mse-grid", "paper").sigma2_list == (0.5, 1.0, 1.5, 2.0, 2.5)
    assert ExperimentConfig.preset("comparison", reps=7).reps == 7
    with pytest.raises(ValueError):
        ExperimentConfig.preset("nope")


def test_streams_are_distinct():
    cfg = ExperimentConfig()
    states = {
        tuple(ex.replication_stream(cfg, n, s2, r).generate_state(4))
        for n in (500, 1000)
        for s2 in (0.5, 1.0)
        for r in range(20)
    }
    assert len(states) == 80
    other = ExperimentConfig(master_seed=1)
    assert ex.replication_stream(cfg, 500, 1.0, 0).generate_state(4).tolist() != \
        ex.replication_stream(other, 500, 1.0, 0).generate_state(4).tolist()


def test_failure_threshold():
    ex._check_failures(1, 100)
    with pytest.raises(RuntimeError):
        ex._check_failures(2, 100)


SMALL_RATES = ExperimentConfig(n_list=(100, 200), reps=4, reference_size=5000, master_seed=3, n_starts=2)


def test_rate_study_deterministic_across_workers():
    serial = ex.run_rate_study(SMALL_RATES)
    parallel = ex.run_rate_study(ExperimentConfig(**{**SMALL_RATES.__dict__, "workers": 2}))
    again = ex.run_rate_study(SMALL_RATES)
    text = ex.tidy_csv(serial.tidy_rows())
    assert text == ex.tidy_csv(parallel.tidy_rows()) == ex.tidy_csv(again.tidy_rows())
    assert ex.slopes_csv([serial]) == ex.slopes_csv([parallel])
    assert np.all(serial.moments > 0)
    assert len(serial.slopes) == 4


def test_merging_halves_equals_full_run():
    full = ex.run_rate_study(SMALL_RATES)
    first = ex.run_rate_study(ExperimentConfig(**{**SMALL_RATES.__dict__, "reps": 2}))
    second = ex.run_rate_study(ExperimentConfig(**{**SMALL_RATES.__dict__, "reps": 2, "rep_offset": 2}))
    merged = second.merge(first)
    assert ex.tidy_csv(merged.tidy_rows()) == ex.tidy_csv(full.tidy_rows())


def test_unconditional_injection_gives_unit_ratio():
    cfg = ExperimentConfig(n_list=(200,), reps=2, test_size=30, conditional_estimator="unconditional", n_starts=2)
    result = ex.run_comparison(cfg)[0]
    assert result.R_mean == pytest.approx(1.0, abs=1e-12)
    assert result.R_mode == pytest.approx(1.0, abs=1e-12)
    assert result.length_ratio == pytest.approx(1.0, abs=1e-12)


def test_comparison_fields_and_low_noise_mse():
    cfg = ExperimentConfig(n_list=(500,), sigma2_list=(0.5,), reps=5, test_size=100, master_seed=4)
    result = ex.run_comparison(cfg)[0]
    assert 0 <= result.coverage_conditional <= 1 and 0 <= result.coverage_unconditional <= 1
    assert result.R_mean >= 0 and result.R_mode >= 0 and result.length_ratio >= 0
    # posterior variance of N(0, 34) under noise variance 0.5 is 34 * 0.5 / 34.5
    assert abs(result.mse_cond_mean - 0.5) <= 0.15
    grid = ex.run_mse_grid(cfg)
    assert grid.cell(500, 0.5)[0] == pytest.approx(result.mse_cond_mean, abs=1e-15)
    rows = grid.tidy_rows()
    assert {r[3] for r in rows} == {"mse_mean", "mse_mode"}


def test_tidy_csv_format():
    text = ex.tidy_csv([("a", 500, 1.0, "x", 0.1), ("a", 500, 1.0, "flag", True)])
    assert text == "setting,n,sigma2,statistic,value\na,500,1.0,x,0.1\na,500,1.0,flag,true\n"
    summary = ex.json_summary(ExperimentConfig(), {"k": 1.0})
    assert '"master_seed": 0' in summary and "workers" not in summary
