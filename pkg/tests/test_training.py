import dataclasses

import numpy as np
import pytest

from mtft.data import SceneDataset, synth_generate
from mtft.eval_train import TrainConfig, TrainingError, evaluate, loss, train
from mtft.eval_train.training import clip_gradients, scheduled_lr
from mtft.model import MTFTModel, ModelConfig
from mtft.numerics import Tensor


def tiny(variant="mtft", **kw):
    base = dict(t_h=6, t_f=4, variant=variant, d_model=8, n_heads=2, layers=2)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="module")
def scenes():
    return synth_generate(10, t_h=6, t_f=4, seed=0, n_neighbors=1)


class TestLoss:
    def test_perfect(self):
        y = np.random.default_rng(0).normal(size=(3, 5, 2))
        assert loss(Tensor(y), y).item() == 0.0

    def test_single_step(self):
        assert loss(Tensor(np.array([[3.0, 4.0]])), np.zeros((1, 2))).item() == 25.0

    def test_two_steps(self):
        assert loss(Tensor(np.array([[0.0, 0.0], [3.0, 4.0]])), np.zeros((2, 2))).item() == 12.5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            loss(Tensor(np.zeros((2, 2))), np.zeros((3, 2)))


class TestTrain:
    def test_zero_lr_leaves_parameters_bitwise(self, scenes):
        cfg = TrainConfig(model=tiny(), lr=0.0, epochs=3, batch_size=4)
        before = MTFTModel(cfg.model, seed=cfg.seed).params.state()
        after = train(scenes, cfg).model.params.state()
        assert list(before) == list(after)
        for k in before:
            assert before[k].tobytes() == after[k].tobytes()

    def test_deterministic(self, scenes):
        cfg = TrainConfig(model=tiny(), lr=3e-3, epochs=3, batch_size=4, seed=5, interval=(30.0, 60.0))
        a, b = train(scenes, cfg), train(scenes, cfg)
        assert a.losses == b.losses
        for k, v in a.model.params.state().items():
            assert v.tobytes() == b.model.params.state()[k].tobytes()

    def test_loss_decreases(self, scenes):
        cfg = TrainConfig(model=tiny(), lr=1e-2, epochs=15, batch_size=5, interval=None)
        losses = train(scenes, cfg).losses
        assert len(losses) == 15
        assert losses[-1] < 0.5 * losses[0]

    def test_single_scale_vtf_equals_mtf(self, scenes):
        # with one head both variants mask with scale 1 only, i.e. plain attention
        runs = [train(scenes, TrainConfig(model=tiny(v, n_heads=1), lr=3e-3, epochs=2, batch_size=4))
                for v in ("vtf", "mtf")]
        assert runs[0].losses == runs[1].losses
        m0, m1 = (r.model.params.state() for r in runs)
        assert list(m0) == list(m1)
        assert all(m0[k].tobytes() == m1[k].tobytes() for k in m0)
        np.testing.assert_array_equal(runs[0].model.scale_masks.masks, np.ones((1, 6, 6)))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_loss_aborts(self, scenes):
        bad = [dataclasses.replace(sc, future=sc.future * 1e300) for sc in scenes]
        with pytest.raises(TrainingError, match="non-finite loss at epoch 0, batch"):
            train(bad, TrainConfig(model=tiny(), epochs=1, batch_size=4))

    def test_empty_and_mismatched(self, scenes):
        with pytest.raises(TrainingError):
            train([], TrainConfig(model=tiny()))
        with pytest.raises(TrainingError, match="horizons"):
            train(scenes, TrainConfig(model=tiny(t_f=5)))

    def test_checkpoint_round_trip(self, scenes, tmp_path):
        cfg = TrainConfig(model=tiny(), lr=3e-3, epochs=2, batch_size=4)
        result = train(SceneDataset(scenes, 6, 4), cfg, out_dir=tmp_path)
        assert (tmp_path / "loss_curve.csv").read_text().count("\n") == 3
        loaded = MTFTModel.load(result.checkpoint)
        assert loaded.config == cfg.model
        a = evaluate(result.model, scenes, (30.0, 60.0), seed=1)
        b = evaluate(loaded, scenes, (30.0, 60.0), seed=1)
        assert a.predictions.tobytes() == b.predictions.tobytes()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(lr=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(lr_schedule="step")


class TestSchedule:
    def test_cosine_endpoints(self):
        cfg = TrainConfig(lr=1e-2, lr_schedule="cosine")
        assert scheduled_lr(cfg, 0, 100) == pytest.approx(1e-2)
        assert scheduled_lr(cfg, 50, 100) == pytest.approx(5e-3)
        assert scheduled_lr(cfg, 100, 100) == pytest.approx(0.0, abs=1e-18)
        assert scheduled_lr(TrainConfig(lr=1e-2), 70, 100) == 1e-2

    def test_clipping(self):
        model = MTFTModel(tiny(), seed=0)
        for p in model.params:
            p.tensor.grad = np.full(p.shape, 3.0)
        norm = clip_gradients(model.params, 1.0)
        assert norm > 1.0
        after = np.sqrt(sum(float((p.grad ** 2).sum()) for p in model.params))
        assert after == pytest.approx(1.0)


class TestEvaluate:
    def test_fixed_masks_make_runs_paired(self, scenes):
        model = MTFTModel(tiny(), seed=0)
        a = evaluate(model, scenes, (60.0, 90.0), seed=3)
        b = evaluate(model, scenes, (60.0, 90.0), seed=3)
        assert a.predictions.tobytes() == b.predictions.tobytes()
        c = evaluate(model, scenes, (60.0, 90.0), seed=4)
        assert a.predictions.tobytes() != c.predictions.tobytes()

    def test_truths_are_dataset_frame(self, scenes):
        ev = evaluate(MTFTModel(tiny(), seed=0), scenes, None, seed=0)
        np.testing.assert_allclose(ev.truths, np.stack([sc.future for sc in scenes]), atol=1e-9)
