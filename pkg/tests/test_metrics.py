import numpy as np
import pytest

from mtft.eval_train import MISS_THRESHOLD_M, compute_metrics, default_horizons

from fixtures import FIXTURES
from oracles import loop_metrics


class TestFixtures:
    @pytest.mark.parametrize("name", sorted(FIXTURES))
    def test_hand_computed(self, name):
        preds, truths, expected = FIXTURES[name]()
        report = compute_metrics(preds, truths, horizons=list(expected["rmse"]), hz=10.0)
        assert report.ade == pytest.approx(expected["ade"], abs=1e-12)
        assert report.fde == pytest.approx(expected["fde"], abs=1e-12)
        assert report.mr == pytest.approx(expected["mr"], abs=1e-12)
        for h, v in expected["rmse"].items():
            assert report.rmse_at[h] == pytest.approx(v, abs=1e-12)
        assert report.count == len(preds)

    def test_threshold_is_strict(self):
        preds = np.array([[[2.0, 0.0]], [[2.0 + 1e-9, 0.0]]])
        report = compute_metrics(preds, np.zeros_like(preds), horizons=[0.1])
        assert MISS_THRESHOLD_M == 2.0
        assert report.mr == 0.5


class TestProperties:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            m, t_f = int(rng.integers(1, 8)), int(rng.integers(1, 25))
            preds = rng.normal(0, 3, size=(m, t_f, 2))
            truths = rng.normal(0, 3, size=(m, t_f, 2))
            steps = sorted(set(int(s) for s in rng.integers(0, t_f, size=3)))
            report = compute_metrics(preds, truths, horizons=[(s + 1) / 10 for s in steps], hz=10.0)
            ref = loop_metrics(preds.tolist(), truths.tolist(), steps)
            for s in steps:
                assert abs(report.rmse_at[(s + 1) / 10] - ref["rmse"][s]) <= 1e-12
            assert abs(report.ade - ref["ade"]) <= 1e-12
            assert abs(report.fde - ref["fde"]) <= 1e-12
            assert report.mr == ref["mr"]

    def test_single_step_ade_equals_fde(self):
        preds = np.random.default_rng(1).normal(size=(9, 1, 2))
        report = compute_metrics(preds, np.zeros_like(preds), horizons=[0.1])
        assert report.ade == report.fde

    def test_improving_predictions_never_raises_mr(self):
        rng = np.random.default_rng(2)
        truths = rng.normal(size=(50, 6, 2))
        preds = truths + rng.normal(0, 3, size=truths.shape)
        before = compute_metrics(preds, truths, horizons=[0.6])
        closer = truths + 0.5 * (preds - truths)
        after = compute_metrics(closer, truths, horizons=[0.6])
        assert after.mr <= before.mr
        assert min(after.ade, after.fde, after.mr) >= 0.0

    def test_default_horizons(self):
        assert default_horizons(30, 10.0) == [1.0, 2.0, 3.0]
        assert default_horizons(50, 10.0) == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert default_horizons(4, 10.0) == [0.4]

    def test_errors(self):
        with pytest.raises(ValueError):
            compute_metrics(np.zeros((0, 3, 2)), np.zeros((0, 3, 2)))
        with pytest.raises(ValueError):
            compute_metrics(np.zeros((1, 3, 2)), np.zeros((1, 4, 2)))
        with pytest.raises(ValueError, match="outside"):
            compute_metrics(np.zeros((1, 3, 2)), np.zeros((1, 3, 2)), horizons=[1.0])
