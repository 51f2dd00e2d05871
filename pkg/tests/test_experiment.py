import numpy as np
import pytest

from mhtggsp.detector import bh_procedure, evaluate
from mhtggsp.experiment import FitSpec, aggregate, monte_carlo, run_repetition
from mhtggsp.scenario import ModelMatchedConfig, TransmitterConfig, make_scenario

CFG = ModelMatchedConfig(Xi_true=((5.0, 25.0, -15.0), (30.0, 10.0, 0.0)), n_sensors=40, knn_k=5,
                         M=600, box=100.0, seed=1)
FIT = FitSpec(order=(2, 3), box=100.0)


def test_single_rep_is_single_evaluation():
    res = monte_carlo(CFG, methods=("bh",), alphas=(0.1,), reps=1, seed=3)
    data = make_scenario(CFG).generate(np.random.default_rng([3, 0]))
    ev = evaluate(bh_procedure(data.samples.p, 0.1), data.samples.theta)
    (row,) = res.table
    assert row["fdr"] == ev.fdp and row["power"] == ev.tpp
    assert row["se_fdr"] == 0.0 and row["se_power"] == 0.0


def test_deterministic():
    a = monte_carlo(CFG, alphas=(0.1, 0.2), reps=4, seed=9, fit=FIT)
    b = monte_carlo(CFG, alphas=(0.1, 0.2), reps=4, seed=9, fit=FIT)
    assert a.table == b.table


def test_parallel_matches_serial():
    a = monte_carlo(CFG, alphas=(0.1,), reps=4, seed=2, fit=FIT, jobs=1)
    b = monte_carlo(CFG, alphas=(0.1,), reps=4, seed=2, fit=FIT, jobs=2)
    assert a.table == b.table


def test_aggregate_is_mean_of_reps():
    res = monte_carlo(CFG, alphas=(0.05, 0.2), reps=5, seed=4, fit=FIT)
    for row in res.table:
        reps = [r for r in res.per_rep if r["method"] == row["method"] and r["alpha"] == row["alpha"]]
        fdp = [r["fdr"] for r in reps]
        assert row["fdr"] == pytest.approx(np.mean(fdp))
        assert row["se_fdr"] == pytest.approx(np.std(fdp, ddof=1) / np.sqrt(5))


def test_table_shape():
    res = monte_carlo(CFG, alphas=(0.05, 0.1, 0.15, 0.2), reps=2, seed=0, fit=FIT)
    assert len(res.table) == 12


def test_oracle_controls_fdr():
    res = monte_carlo(CFG, methods=("oracle",), alphas=(0.1,), reps=50, seed=5)
    (row,) = res.table
    assert row["fdr"] <= 0.1 + 2 * row["se_fdr"]


def test_failure_recorded_with_rep_index():
    # BIC grid whose only candidate is infeasible: every repetition fails
    bad = FitSpec(grid=((41, 1),))
    out = run_repetition(make_scenario(CFG), ("mht-ggsp",), (0.1,), bad, seed=0, rep=7)
    assert out.error.startswith("repetition 7")
    with pytest.raises(RuntimeError, match="all repetitions failed"):
        monte_carlo(CFG, methods=("mht-ggsp",), reps=2, fit=bad)


def test_bic_fit_info_and_transmitter():
    cfg = TransmitterConfig(grid_side=12, n_sensors=30, knn_k=5, T=3, x0=3.4e6 * 0.0144,
                            walk_step=1, gp_length_scale=1.2)
    res = monte_carlo(cfg, alphas=(0.2,), reps=2, seed=0,
                      fit=FitSpec(grid=((1, 1), (2, 3)), box=100.0))
    assert res.outcomes[0].fit["candidates"][1]["K2"] == 3
    assert 0 <= res.mean_null_proportion <= 1


def test_aggregate_skips_missing():
    assert aggregate([], ("bh",), (0.1,)) == []
