"""Optimizer, schedule, training-loop, and gradient-check harness tests.

Training fixtures fit a small model to renders of a differently-seeded
model, so targets are representable and every loss term is exercised.
"""

import copy
import math

import numpy as np
import pytest

from lumisplat.dataset import Frame
from lumisplat.errors import NumericalError, ValidationError
from lumisplat.geom import Camera
from lumisplat.losses import LossWeights
from lumisplat.pipeline import render_view
from lumisplat.scene import AnchorSet, DecoderConfig, SceneModel, load_checkpoint
from lumisplat.train import (AdamState, TrainConfig, adam_step,
                             evaluate_frames, gradcheck, lambda2_schedule,
                             lr_decay, max_relative_error, train)

RNG = np.random.default_rng


def _camera(position=(0.0, 0.0, 0.0), size=32) -> Camera:
    return Camera(fx=40.0, fy=40.0, cx=size / 2.0, cy=size / 2.0, width=size,
                  height=size, rotation=np.eye(3),
                  position=np.asarray(position, dtype=np.float64))


def _model(seed, n_anchors=8, **cfg_kwargs) -> SceneModel:
    rng = RNG(seed)
    cfg = DecoderConfig(feature_dim=8, offsets_per_anchor=3, dir_embed_dim=4,
                        angle_embed_dim=3, **cfg_kwargs)
    positions = np.stack([rng.uniform(-0.4, 0.4, n_anchors),
                          rng.uniform(-0.4, 0.4, n_anchors),
                          rng.uniform(1.5, 2.5, n_anchors)], axis=-1)
    anchors = AnchorSet(positions=positions,
                        features=rng.normal(0.0, 0.01, (n_anchors, 8)),
                        scales=rng.uniform(0.1, 0.2, (n_anchors, 3)),
                        offsets=rng.uniform(-0.5, 0.5, (n_anchors, 3, 3)))
    return SceneModel.create(anchors, cfg, scene_radius=1.5, voxel_size=0.15,
                             rng=rng)


def _dataset(seed=100, n_train=3, n_test=1, size=32):
    """Frames rendered from a reference model (so targets are attainable)."""
    source = _model(seed, n_anchors=10)
    frames = []
    offsets = np.linspace(-0.2, 0.2, n_train + n_test)
    for i, dx in enumerate(offsets):
        cam = _camera(position=(dx, 0.0, 0.0), size=size)
        result = render_view(source, cam)
        depth = result.buffers.depth.copy()
        depth[1.0 - result.buffers.transmittance < 0.5] = 0.0
        frames.append(Frame(index=i, camera=cam,
                            image=np.clip(result.buffers.color, 0.0, 1.0),
                            depth=depth,
                            split="train" if i < n_train else "test"))
    return frames


class TestLambda2Schedule:
    def test_endpoints(self):
        assert lambda2_schedule(0, 3000) == 0.2
        assert abs(lambda2_schedule(3000, 3000) - 0.01) < 1e-15

    def test_geometric_midpoint(self):
        got = lambda2_schedule(1500, 3000)
        assert abs(got - math.sqrt(0.2 * 0.01)) < 1e-12

    def test_monotone_decreasing(self):
        vals = [lambda2_schedule(i, 100) for i in range(101)]
        assert np.all(np.diff(vals) < 0)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            lambda2_schedule(11, 10)


class TestLrDecay:
    def test_endpoints_and_midpoint(self):
        assert lr_decay(0, 100) == 1.0
        assert abs(lr_decay(100, 100) - 0.1) < 1e-15
        assert abs(lr_decay(50, 100) - (0.1 + 0.9 * 0.5)) < 1e-12


class TestAdam:
    def test_zero_grad_keeps_params(self):
        params = [np.array([1.0, -2.0])]
        state = AdamState(params)
        adam_step(params, [np.zeros(2)], state, lr=0.1)
        np.testing.assert_array_equal(params[0], [1.0, -2.0])
        assert state.step == 1

    def test_first_step_is_signed_lr(self):
        params = [np.array([1.0, 1.0, 1.0])]
        g = np.array([0.3, -70.0, 1e-4])
        state = AdamState(params)
        adam_step(params, [g], state, lr=0.01)
        np.testing.assert_allclose(params[0], 1.0 - 0.01 * np.sign(g),
                                   rtol=1e-9)

    def test_quadratic_descent_is_monotone(self):
        params = [np.array([1.0])]
        state = AdamState(params)
        seen = [1.0]
        for _ in range(10):
            adam_step(params, [2.0 * params[0]], state, lr=0.05)
            seen.append(abs(float(params[0][0])))
        assert np.all(np.diff(seen) < 0)

    def test_non_finite_grad_names_group(self):
        params = [np.ones(3)]
        state = AdamState(params)
        with pytest.raises(NumericalError, match="anchor_offsets"):
            adam_step(params, [np.array([1.0, np.nan, 0.0])], state, lr=0.1,
                      group="anchor_offsets")


class TestMaxRelativeError:
    def test_linear_toy_is_exact(self):
        rng = RNG(0)
        x = rng.normal(size=5)
        w = rng.normal(size=5)
        params = [x]

        def loss():
            return float(np.dot(w, x))

        err = max_relative_error(loss, params, [w], RNG(1), n_probe=5)
        assert err < 1e-10

    def test_wrong_gradient_is_caught(self):
        x = np.ones(4)
        w = np.array([1.0, 2.0, 3.0, 4.0])

        def loss():
            return float(np.dot(w, x))

        err = max_relative_error(loss, [x], [-w], RNG(2), n_probe=4)
        assert err > 1.0


class TestTrainLoop:
    def test_zero_iterations_checkpoint_equals_init(self, tmp_path):
        model = _model(1)
        before = copy.deepcopy(model)
        path = str(tmp_path / "init.ckpt")
        result = train(model, _dataset(), TrainConfig(iterations=0),
                       checkpoint_path=path)
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.anchors.features,
                                      before.anchors.features)
        np.testing.assert_array_equal(loaded.anchors.offsets,
                                      before.anchors.offsets)
        for pa, pb in zip(loaded.mlp_color.params, before.mlp_color.params):
            np.testing.assert_array_equal(pa, pb)
        assert result.final_metrics == {}

    def test_fixed_seed_is_bitwise_reproducible(self, tmp_path):
        frames = _dataset()
        cfg = TrainConfig(iterations=12, eval_interval=6, log_interval=4,
                          seed=3)
        paths = [str(tmp_path / f"run{i}.ckpt") for i in range(2)]
        runs = [train(_model(2), frames, cfg, checkpoint_path=p)
                for p in paths]
        assert runs[0].log_lines == runs[1].log_lines
        assert (open(paths[0], "rb").read() == open(paths[1], "rb").read())

    def test_loss_decreases_on_attainable_target(self):
        frames = _dataset()
        cfg = TrainConfig(iterations=60, eval_interval=60, log_interval=1)
        result = train(_model(4), frames, cfg)
        losses = [float(line.split("total=")[1].split()[0])
                  for line in result.log_lines if "total=" in line]
        assert losses[-1] < 0.7 * losses[0]
        assert math.isfinite(result.final_metrics["psnr"])
        assert math.isfinite(result.final_metrics["train_psnr"])

    def test_missing_depth_rejected(self):
        frames = _dataset()
        frames[1].depth = None
        with pytest.raises(ValidationError, match="frame 1"):
            train(_model(5), frames, TrainConfig(iterations=1))

    def test_depth_loss_can_be_disabled(self):
        frames = [Frame(index=f.index, camera=f.camera, image=f.image,
                        depth=None, split=f.split) for f in _dataset()]
        cfg = TrainConfig(iterations=4, use_depth_loss=False,
                          eval_interval=4, log_interval=2)
        result = train(_model(6), frames, cfg)
        assert any("depth=0 " in line for line in result.log_lines)

    def test_numerical_abort_saves_last_good_checkpoint(self, tmp_path,
                                                        monkeypatch):
        import lumisplat.train as train_mod

        frames = _dataset()
        model = _model(7)
        calls = {"n": 0}
        real = train_mod.backward_view

        def sabotage(*args, **kwargs):
            calls["n"] += 1
            grads = real(*args, **kwargs)
            if calls["n"] >= 3:
                grads["anchor_offsets"][0][0, 0, 0] = np.nan
            return grads

        monkeypatch.setattr(train_mod, "backward_view", sabotage)
        path = str(tmp_path / "abort.ckpt")
        with pytest.raises(NumericalError, match="anchor_offsets"):
            train(model, frames, TrainConfig(iterations=50),
                  checkpoint_path=path)
        loaded = load_checkpoint(path)  # last good state must be readable
        assert np.all(np.isfinite(loaded.anchors.offsets))

    def test_config_echo_line(self):
        result = train(_model(8), _dataset(),
                       TrainConfig(iterations=1, log_interval=1))
        head = result.log_lines[0]
        assert head.startswith("config=train")
        assert "geometry_mode=view_embed" in head
        assert "appearance_mode=attenuated" in head


class TestEvaluate:
    def test_self_render_is_perfect(self):
        model = _model(9)
        cam = _camera()
        result = render_view(model, cam)
        frame = Frame(index=0, camera=cam, image=result.buffers.color,
                      depth=None, split="test")
        metrics = evaluate_frames(model, [frame])
        assert metrics["psnr"] == math.inf
        assert abs(metrics["ssim"] - 1.0) < 1e-12


class TestGradcheck:
    def test_full_pipeline_under_tolerance(self):
        frames = _dataset(seed=200, n_train=1, n_test=0)
        model = _model(10)
        report = gradcheck(model, frames[0], LossWeights(tau_s=0.15),
                           n_probe=6, seed=1)
        assert set(report) == {"anchor_offsets", "anchor_features",
                               "anchor_scales", "mlp_opacity", "mlp_scale",
                               "mlp_rotation", "mlp_color"}
        for name, err in report.items():
            assert err < 1e-4, f"{name}: {err}"

    def test_corrupted_backward_is_detected(self):
        frames = _dataset(seed=201, n_train=1, n_test=0)
        model = _model(11)
        real = model.backward

        def flipped(cache, grads):
            out = real(cache, grads)
            out["anchor_features"] = [-g for g in out["anchor_features"]]
            return out

        model.backward = flipped
        report = gradcheck(model, frames[0], LossWeights(tau_s=0.15),
                           n_probe=6, seed=1)
        assert report["anchor_features"] > 1e-4
