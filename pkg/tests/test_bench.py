import math

import numpy as np
import pytest

from cellload import learner
from cellload.bench import (
    BenchConfig,
    BenchReport,
    BenchRow,
    UndefinedCorrelationError,
    count_monotonicity_violations,
    pearson,
    rmse,
    run_benchmark,
    sup_error,
)
from cellload.scenario import generate_dataset


def test_rmse_examples():
    assert rmse([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert rmse([0.0, 1.0], [1.0, 1.0]) == pytest.approx(math.sqrt(0.5))
    assert rmse([0.0, 0.0], [1.0, 1.0]) == 1.0
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])


def test_sup_error_examples():
    assert sup_error([0.1, 0.5], [0.1, 0.3]) == pytest.approx(0.2)
    rng = np.random.default_rng(0)
    a, b = rng.random(50), rng.random(50)
    assert sup_error(a, b) >= rmse(a, b)


def test_monotonicity_counter():
    assert count_monotonicity_violations(lambda x: np.full((len(x), 2), 0.3),
                                         200, 0, 0.0, 1.0, 3) == 0
    assert count_monotonicity_violations(lambda x: -x.sum(axis=1, keepdims=True),
                                         200, 0, 0.0, 1.0, 3) > 100
    per = count_monotonicity_violations(lambda x: np.c_[x[:, 0], -x[:, 0]],
                                        200, 0, 0.0, 1.0, 2, per_output=True)
    assert per[0] == 0 and per[1] > 0


def test_minimax_recovers_anchors(small_scenario, small_params):
    data = generate_dataset(small_scenario, small_params, 25, 0.0, seed=0)
    model = learner.fit(data, 0.0)
    # the fitted values are reproduced exactly at their anchors
    assert rmse(model.predict(data.inputs), model.values) == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(k_grid=(50, 25))
    with pytest.raises(ValueError):
        BenchConfig(methods=("forest",))
    cfg = BenchConfig.from_dict({"scenario_params": {"num_bs": 3}, "k_grid": [5, 10]})
    assert cfg.scenario_params.num_bs == 3 and cfg.k_grid == (5, 10)
    assert BenchConfig.from_dict(cfg.to_dict()) == cfg


@pytest.fixture(scope="module")
def tiny_config(small_params):
    return BenchConfig(scenario_params=small_params, k_grid=(5, 10), num_test=200,
                       num_seeds=2, mono_pairs=100, record_timings=False)


@pytest.fixture(scope="module")
def tiny_report(tiny_config):
    return run_benchmark(tiny_config)


def test_report_shape(tiny_report, tiny_config):
    n = 2 * 2 * 3 * tiny_config.scenario_params.num_bs
    assert len(tiny_report.rows) == n
    assert all(r.fit_s == 0.0 for r in tiny_report.rows)
    assert all(r.mono_violations == 0 for r in tiny_report.rows if r.method == "minimax")
    assert all(0.0 <= r.rmse <= r.sup_error * (1 + 1e-12) for r in tiny_report.rows)


def test_report_is_byte_reproducible(tiny_report, tiny_config):
    assert run_benchmark(tiny_config).to_csv() == tiny_report.to_csv()


def test_report_csv_round_trip(tiny_report, tmp_path):
    path = tmp_path / "report.csv"
    tiny_report.to_csv(path)
    assert BenchReport.from_csv(path).to_csv() == tiny_report.to_csv()


def test_seed_means_and_summary(tiny_report):
    means = tiny_report.seed_means("rmse")
    assert set(means) == {(s, k, m) for s in (0, 1) for k in (5, 10)
                          for m in ("minimax", "kernel", "knn")}
    summary = tiny_report.summary("rmse")
    mean, std = summary[(5, "minimax")]
    vals = [means[(s, 5, "minimax")] for s in (0, 1)]
    assert mean == pytest.approx(np.mean(vals)) and std == pytest.approx(np.std(vals))
    assert tiny_report.summary_csv().splitlines()[0].startswith("k,method,rmse_mean")


def test_failed_cells_are_skipped_in_means():
    nan = math.nan
    rows = [BenchRow(0, 5, "knn", 0, 0.1, 0.5, 0.2, 3, 0.0, 0.0),
            BenchRow(0, 5, "knn", 1, nan, nan, nan, -1, nan, nan)]
    report = BenchReport(rows)
    assert report.seed_means("rmse")[(0, 5, "knn")] == 0.1
    assert report.seed_means("mono_violations")[(0, 5, "knn")] == 3
