import csv

import numpy as np
import pytest

from levelset.harness import (
    SNR_CAP,
    ImageConfig,
    LowRankExperimentConfig,
    Method,
    RunReport,
    SpikeTrainConfig,
    exact_sigma,
    gen_dct_image,
    gen_lowrank,
    gen_spike_train,
    run_bpdn_study,
    run_convergence_study,
    run_image_study,
    run_lowrank_study,
    write_convergence_csv,
)
from levelset.prox import BallSpec, is_feasible
from levelset.solvers import ContinuationSchedule

SMALL = SpikeTrainConfig(n=64, m=24, spike_frac=0.05, outlier_frac=0.1, seed=3)
QUICK = ContinuationSchedule(0.1, 0.5, 1e-3, 50)


def test_snr_examples():
    from levelset.harness import snr_db

    assert snr_db([1.0, 0.0], [1.0, 0.0]) == SNR_CAP
    assert snr_db([10.0], [9.0]) == pytest.approx(20.0)
    assert snr_db([1.0, 1.0], [0.0, 0.0]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        snr_db([0.0], [1.0])
    with pytest.raises(ValueError):
        snr_db([1.0], [1.0, 2.0])


def test_spike_train_generator():
    p = gen_spike_train(SMALL)
    assert p.A.shape == (24, 64)
    assert np.count_nonzero(p.x_true) == round(0.05 * 64)
    assert set(np.unique(p.x_true)) <= {-1.0, 0.0, 1.0}
    assert np.count_nonzero(p.noise) == p.outlier_support.size == round(0.1 * 24)
    np.testing.assert_allclose(p.b, p.A.apply(p.x_true) + p.noise)
    again = gen_spike_train(SMALL)
    np.testing.assert_array_equal(p.b, again.b)
    with pytest.raises(ValueError):
        SpikeTrainConfig(n=10, m=20)


@pytest.mark.parametrize("norm", ["l1", "l2", "linf"])
def test_exact_sigma_makes_truth_feasible(norm):
    p = gen_spike_train(SMALL)
    r = p.A.apply(p.x_true) - p.b
    assert is_feasible(r, BallSpec(norm, exact_sigma(p.noise, norm)))


def test_method_labels():
    assert Method("alg3", "l1").label == "alg3-l1"
    assert Method("alg2", "linf", cg_iters=5).label == "alg2-cg5-linf"
    assert Method("alg3", "l0", accelerate=True).label == "alg3-acc-l0"


def test_bpdn_study_report_and_determinism(tmp_path):
    methods = [Method("alg3", nm, accelerate=True) for nm in ("l1", "l0")]
    rep, traces = run_bpdn_study(SMALL, methods, schedule=QUICK)
    assert [r.norm for r in rep] == ["l1", "l0"]
    assert not rep.failed and set(traces) == {"alg3-acc-l1", "alg3-acc-l0"}
    rep2, _ = run_bpdn_study(SMALL, methods, schedule=QUICK)
    assert [r.snr_db for r in rep] == [r.snr_db for r in rep2]
    rep.to_csv(tmp_path / "r.csv", timing=False)
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["method", "norm", "snr_db", "snr_w_db", "seconds", "status"]
    assert rows[1][4] == "" and rows[1][5] == "ok"


def test_bpdn_failing_row_is_isolated():
    methods = [Method("alg3", "l1"), Method("alg1", "l2", accelerate=True)]
    rep, traces = run_bpdn_study(SMALL, methods, schedule=QUICK)
    assert rep.rows[0].status == "ok"
    assert rep.rows[1].status.startswith("error: ValueError")
    assert np.isnan(rep.rows[1].snr_db)
    assert len(rep.failed) == 1 and list(traces) == ["alg3-l1"]


def test_negative_sigma_policy_fails_rows():
    rep, _ = run_bpdn_study(SMALL, [Method("alg3", "l2")], sigma_policy=-1.0, schedule=QUICK)
    assert rep.failed


def test_convergence_study_shapes(tmp_path):
    traces = run_convergence_study((1, 3), iters=5, cfg=SMALL, eta=1e-2)
    assert list(traces) == ["alg1", "alg3", "alg2-cg1", "alg2-cg3"]
    starts = {tr.objective[0] for tr in traces.values()}
    assert len(starts) == 1
    for tr in traces.values():
        assert len(tr) == 6
        assert tr.objective[-1] <= tr.objective[0]
    write_convergence_csv(tmp_path / "d.csv", traces)
    rows = list(csv.reader(open(tmp_path / "d.csv")))
    assert rows[0] == ["iter", "alg1", "alg3", "alg2-cg1", "alg2-cg3"] and len(rows) == 7
    with pytest.raises(ValueError):
        run_convergence_study((), cfg=SMALL)


def test_lowrank_generator_modes():
    X, data, noise = gen_lowrank(LowRankExperimentConfig(n=10, m=10, true_rank=2, k=3, mode="interpolate"))
    assert np.linalg.matrix_rank(X) == 2 and len(data) == 50 and not np.any(noise)
    X, data, noise = gen_lowrank(LowRankExperimentConfig(n=10, m=10, true_rank=2, k=3, mode="denoise"))
    assert len(data) == 100 and np.count_nonzero(noise) == 1
    np.testing.assert_allclose(data.values - noise, X.ravel())
    with pytest.raises(ValueError):
        LowRankExperimentConfig(mode="inpaint")


def test_lowrank_study_runs_each_norm():
    cfg = LowRankExperimentConfig(n=12, m=12, true_rank=2, k=3, max_iters=100)
    seen = []
    rep, traces = run_lowrank_study(cfg, ("l2", "l0"), callback=lambda label, it, tr: seen.append(label))
    assert [r.method for r in rep] == ["alg4-l2", "alg4-l0"]
    assert set(seen) == {"alg4-l2", "alg4-l0"}
    assert not rep.failed


def test_image_study_small():
    cfg = ImageConfig(rows=8, cols=8, outlier_frac=0.05)
    C, A, image, b, noise = gen_dct_image(cfg)
    assert np.count_nonzero(np.abs(C.apply(image)) > 1e-12) == round(0.05 * 64)
    rep, _ = run_image_study(cfg, ("l0",), schedule=QUICK)
    assert not rep.failed


def test_report_container():
    rep = RunReport()
    assert len(rep) == 0 and rep.failed == [] and rep.by_norm() == {}
