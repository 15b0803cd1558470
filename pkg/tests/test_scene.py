"""Scene representation checks.

Closed-form cases use all-zero decoder networks, where every head lands on a
known constant (sigmoid -> 0.5, softplus -> ln 2, identity quaternion).  The
randomized checks compare against explicit per-anchor loops and central
finite differences through the entire generate() chain, one parameter group
at a time.
"""

import numpy as np
import pytest

from lumisplat.errors import EmptySceneError, ValidationError
from lumisplat.geom import Camera, quat_to_rot
from lumisplat.scene import (
    AnchorSet,
    DecoderConfig,
    Mlp,
    SceneModel,
    cosine_embed,
    cosine_embed_vjp,
    init_from_depth,
    load_checkpoint,
    save_checkpoint,
    view_context,
)
from lumisplat.scene.model import GaussianGrads, view_context_vjp

RNG = np.random.default_rng


def _camera(position=(0.0, 0.0, 0.0), rotation=None, fx=100.0, fy=100.0,
            width=64, height=64) -> Camera:
    return Camera(fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0, width=width,
                  height=height, rotation=np.eye(3) if rotation is None else rotation,
                  position=np.asarray(position, dtype=np.float64))


def _model(seed=0, n_anchors=4, **cfg_kwargs) -> SceneModel:
    """Anchors scattered in front of the default camera at the origin."""
    rng = RNG(seed)
    cfg = DecoderConfig(**cfg_kwargs)
    k = cfg.offsets_per_anchor
    positions = np.stack([rng.uniform(-0.3, 0.3, n_anchors),
                          rng.uniform(-0.3, 0.3, n_anchors),
                          rng.uniform(1.5, 3.0, n_anchors)], axis=-1)
    anchors = AnchorSet(positions=positions,
                        features=rng.normal(0.0, 0.01, (n_anchors, cfg.feature_dim)),
                        scales=rng.uniform(0.05, 0.15, (n_anchors, 3)),
                        offsets=rng.uniform(-0.5, 0.5, (n_anchors, k, 3)))
    return SceneModel.create(anchors, cfg, scene_radius=2.0, voxel_size=0.1, rng=rng)


def _zero_params(mlp: Mlp) -> None:
    for p in mlp.params:
        p[:] = 0.0


class TestCosineEmbed:
    def test_zero_input_gives_ones(self):
        np.testing.assert_array_equal(cosine_embed(0.0, 4), np.ones(4))

    def test_unit_input_alternates(self):
        # cos(pi), cos(2 pi), cos(4 pi)
        np.testing.assert_allclose(cosine_embed(1.0, 3), [-1.0, 1.0, 1.0],
                                   atol=1e-15)

    def test_vector_matches_component_loop(self):
        v = np.array([0.6, 0.8, 0.0])
        got = cosine_embed(v, 10)
        assert got.shape == (30,)
        expected = []
        for comp in v:
            for j in range(10):
                expected.append(np.cos((2.0**j) * np.pi * comp))
        np.testing.assert_allclose(got, expected, atol=1e-15)

    def test_zero_frequencies_empty(self):
        assert cosine_embed(np.array([0.3, 0.4]), 0).shape == (0,)

    def test_batch_shape(self):
        x = RNG(0).normal(size=(7, 3))
        assert cosine_embed(x, 5).shape == (7, 15)

    def test_vjp_matches_finite_differences(self):
        rng = RNG(1)
        x = rng.uniform(-1.0, 1.0, size=4)
        g = rng.normal(size=4 * 6)
        analytic = cosine_embed_vjp(x, 6, g)
        h = 1e-7
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            num = (np.dot(g, cosine_embed(x + e, 6))
                   - np.dot(g, cosine_embed(x - e, 6))) / (2 * h)
            assert abs(analytic[i] - num) <= 1e-5 * max(1.0, abs(num))


class TestMlp:
    def test_zero_network_outputs_zero(self):
        mlp = Mlp(5, 3, RNG(0))
        _zero_params(mlp)
        y, _ = mlp.forward(np.ones((4, 5)))
        np.testing.assert_array_equal(y, np.zeros((4, 3)))

    def test_deterministic_init(self):
        a, b = Mlp(6, 2, RNG(3)), Mlp(6, 2, RNG(3))
        for pa, pb in zip(a.params, b.params):
            np.testing.assert_array_equal(pa, pb)

    def test_backward_matches_finite_differences(self):
        rng = RNG(4)
        mlp = Mlp(7, 5, rng)
        x = rng.normal(size=(6, 7))
        w = rng.normal(size=(6, 5))
        y, cache = mlp.forward(x)
        g_x, grads = mlp.backward(cache, w)
        h = 1e-6

        def loss():
            return np.sum(w * mlp.forward(x)[0])

        for p, g in zip(mlp.params, grads):
            flat = p.reshape(-1)
            for idx in rng.choice(flat.size, size=min(10, flat.size), replace=False):
                old = flat[idx]
                flat[idx] = old + h
                up = loss()
                flat[idx] = old - h
                down = loss()
                flat[idx] = old
                num = (up - down) / (2 * h)
                assert abs(g.reshape(-1)[idx] - num) <= 1e-5 * max(1.0, abs(num))
        for i in range(6):
            for j in range(7):
                x2 = x.copy()
                x2[i, j] += h
                up = np.sum(w * mlp.forward(x2)[0])
                x2[i, j] -= 2 * h
                down = np.sum(w * mlp.forward(x2)[0])
                num = (up - down) / (2 * h)
                assert abs(g_x[i, j] - num) <= 1e-5 * max(1.0, abs(num))

    def test_from_params_validates_count(self):
        with pytest.raises(ValueError):
            Mlp.from_params([np.zeros((3, 3))])


class TestViewContext:
    def test_on_axis_anchor(self):
        ctx = view_context(np.array([[0.0, 0.0, 2.0]]), _camera())
        assert ctx.distance[0] == 2.0
        np.testing.assert_array_equal(ctx.direction[0], [0.0, 0.0, 1.0])
        assert ctx.cos_axis[0] == 1.0

    def test_perpendicular_anchor(self):
        ctx = view_context(np.array([[3.0, 0.0, 0.0]]), _camera())
        assert abs(ctx.cos_axis[0]) < 1e-15

    def test_matches_explicit_rotation(self):
        rng = RNG(5)
        for _ in range(10):
            rot = quat_to_rot(rng.normal(size=4))
            cam = _camera(position=rng.normal(size=3), rotation=rot)
            pos = cam.position + rng.normal(size=(6, 3))
            ctx = view_context(pos, cam)
            for i in range(6):
                delta = pos[i] - cam.position
                d = np.linalg.norm(delta)
                v = delta / d
                assert abs(ctx.distance[i] - d) < 1e-12
                np.testing.assert_allclose(ctx.direction[i], v, atol=1e-12)
                assert abs(ctx.cos_axis[i] - v @ rot[2]) < 1e-12

    def test_degenerate_anchor_raises(self):
        with pytest.raises(ValueError):
            view_context(np.array([[0.0, 0.0, 1e-12]]), _camera())

    def test_vjp_matches_finite_differences(self):
        rng = RNG(6)
        cam = _camera(position=rng.normal(size=3),
                      rotation=quat_to_rot(rng.normal(size=4)))
        pos = cam.position + rng.normal(size=(3, 3))
        g_d = rng.normal(size=3)
        g_v = rng.normal(size=(3, 3))
        g_c = rng.normal(size=3)
        ctx = view_context(pos, cam)
        analytic = view_context_vjp(ctx, cam, g_d, g_v, g_c)

        def loss(p):
            c = view_context(p, cam)
            return (np.dot(g_d, c.distance) + np.sum(g_v * c.direction)
                    + np.dot(g_c, c.cos_axis))

        h = 1e-6
        for i in range(3):
            for j in range(3):
                p = pos.copy()
                p[i, j] += h
                up = loss(p)
                p[i, j] -= 2 * h
                down = loss(p)
                num = (up - down) / (2 * h)
                assert abs(analytic[i, j] - num) <= 1e-5 * max(1.0, abs(num))


class TestDecodeGeometry:
    def test_zero_network_closed_form(self):
        model = _model(seed=7)
        for m in (model.mlp_opacity, model.mlp_scale, model.mlp_rotation):
            _zero_params(m)
        ctx = view_context(model.anchors.positions, _camera())
        alpha, scale, quat, _ = model.decode_geometry(model.anchors.features, ctx,
                                                      model.anchors.scales)
        np.testing.assert_array_equal(alpha, np.full(alpha.shape, 0.5))
        expected_s = np.broadcast_to(model.anchors.scales[:, None, :] * np.log(2.0),
                                     scale.shape)
        np.testing.assert_allclose(scale, expected_s, rtol=1e-15)
        expected_q = np.zeros(quat.shape)
        expected_q[..., 0] = 1.0
        np.testing.assert_array_equal(quat, expected_q)

    def test_view_embed_mode_ignores_distance(self):
        # Two contexts sharing a direction but not a distance decode equally.
        model = _model(seed=8, geometry_mode="view_embed")
        from lumisplat.scene.model import ViewContext

        v = np.tile(np.array([[0.1, -0.2, 0.97][0:3]]), (len(model.anchors), 1))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        near_ = ViewContext(distance=np.full(len(model.anchors), 1.0),
                            direction=v, cos_axis=v[:, 2])
        far_ = ViewContext(distance=np.full(len(model.anchors), 3.7),
                           direction=v, cos_axis=v[:, 2])
        a1, s1, q1, _ = model.decode_geometry(model.anchors.features, near_,
                                              model.anchors.scales)
        a2, s2, q2, _ = model.decode_geometry(model.anchors.features, far_,
                                              model.anchors.scales)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(s1, s2)
        np.testing.assert_array_equal(q1, q2)

    def test_plain_mode_sees_distance(self):
        model = _model(seed=9, geometry_mode="plain")
        from lumisplat.scene.model import ViewContext

        v = np.zeros((len(model.anchors), 3))
        v[:, 2] = 1.0
        near_ = ViewContext(distance=np.full(len(model.anchors), 1.0),
                            direction=v, cos_axis=v[:, 2])
        far_ = ViewContext(distance=np.full(len(model.anchors), 3.7),
                           direction=v, cos_axis=v[:, 2])
        a1, _, _, _ = model.decode_geometry(model.anchors.features, near_,
                                            model.anchors.scales)
        a2, _, _, _ = model.decode_geometry(model.anchors.features, far_,
                                            model.anchors.scales)
        assert np.abs(a1 - a2).max() > 0.0


class TestDecodeColor:
    def test_zero_network_gray(self):
        model = _model(seed=10)
        _zero_params(model.mlp_color)
        ctx = view_context(model.anchors.positions, _camera())
        color, _ = model.decode_color(model.anchors.features, ctx)
        np.testing.assert_array_equal(color, np.full(color.shape, 0.5))

    def test_zero_angle_dims_equal_zeroed_angle_weights(self):
        # Dropping the angle embedding entirely must equal a full network
        # whose first-layer rows for the angle block are zero.
        cfg_small = dict(feature_dim=8, offsets_per_anchor=2, angle_embed_dim=0)
        cfg_big = dict(feature_dim=8, offsets_per_anchor=2, angle_embed_dim=5)
        small = _model(seed=11, **cfg_small)
        big = _model(seed=11, **cfg_big)
        base = small.config.feature_dim + 4
        params = [p.copy() for p in small.mlp_color.params]
        w1 = np.zeros((base + 5, params[0].shape[1]))
        w1[:base] = params[0]
        big.mlp_color = Mlp.from_params([w1] + params[1:])
        ctx = view_context(small.anchors.positions, _camera())
        c_small, _ = small.decode_color(small.anchors.features, ctx)
        c_big, _ = big.decode_color(small.anchors.features, ctx)
        np.testing.assert_allclose(c_small, c_big, atol=1e-14)

    def test_axis_rotation_invariance_with_zeroed_direction_rows(self):
        # With the raw-direction rows zeroed, color depends on the view only
        # through distance and the axis cosine, both invariant under a
        # rotation of the direction about the optical axis.
        model = _model(seed=12)
        f = model.config.feature_dim
        model.mlp_color.params[0][f:f + 3] = 0.0
        from lumisplat.scene.model import ViewContext

        rng = RNG(13)
        v = rng.normal(size=(len(model.anchors), 3))
        v[:, 2] = np.abs(v[:, 2]) + 1.0
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        d = rng.uniform(1.0, 3.0, len(model.anchors))
        phi = 1.234
        rot_z = np.array([[np.cos(phi), -np.sin(phi), 0.0],
                          [np.sin(phi), np.cos(phi), 0.0],
                          [0.0, 0.0, 1.0]])
        ctx1 = ViewContext(distance=d, direction=v, cos_axis=v[:, 2])
        v2 = v @ rot_z.T
        ctx2 = ViewContext(distance=d, direction=v2, cos_axis=v2[:, 2])
        np.testing.assert_allclose(ctx1.cos_axis, ctx2.cos_axis, atol=1e-15)
        c1, _ = model.decode_color(model.anchors.features, ctx1)
        c2, _ = model.decode_color(model.anchors.features, ctx2)
        np.testing.assert_allclose(c1, c2, atol=1e-13)


class TestGenerate:
    def test_zero_offsets_collapse_to_anchor(self):
        model = _model(seed=14)
        model.anchors.offsets[:] = 0.0
        batch, _ = model.generate(_camera())
        k = model.config.offsets_per_anchor
        expected = np.repeat(model.anchors.positions, k, axis=0)[batch.rows]
        np.testing.assert_array_equal(batch.mean, expected)

    def test_mean_formula_is_exact(self):
        model = _model(seed=15)
        batch, cache = model.generate(_camera())
        vis = cache.visible_ids
        k = model.config.offsets_per_anchor
        la = model.anchors.scales[vis]
        expected = (model.anchors.positions[vis][:, None, :]
                    + model.anchors.offsets[vis] * la[:, None, :])
        np.testing.assert_array_equal(batch.mean,
                                      expected.reshape(-1, 3)[batch.rows])

    def test_doubling_anchor_scale_doubles_offsets_and_scales(self):
        model = _model(seed=16, geometry_mode="view_embed")
        cam = _camera()
        b1, _ = model.generate(cam)
        disp1 = b1.mean - model.anchors.positions[b1.anchor_ids]
        model.anchors.scales[:] *= 2.0
        b2, _ = model.generate(cam)
        disp2 = b2.mean - model.anchors.positions[b2.anchor_ids]
        np.testing.assert_array_equal(b1.rows, b2.rows)  # alpha untouched
        np.testing.assert_allclose(disp2, 2.0 * disp1, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(b2.scale, 2.0 * b1.scale, rtol=1e-12)

    def test_matches_per_anchor_loop(self):
        model = _model(seed=17, n_anchors=5)
        cam = _camera()
        batch, cache = model.generate(cam)
        k = model.config.offsets_per_anchor
        means, alphas = [], []
        for a in cache.visible_ids:
            xa = model.anchors.positions[a]
            la = model.anchors.scales[a]
            ctx = view_context(xa[None], cam)
            al, sc, qu, _ = model.decode_geometry(model.anchors.features[a][None],
                                                  ctx, la[None])
            for j in range(k):
                means.append(xa + model.anchors.offsets[a, j] * la)
                alphas.append(al[0, j])
        means = np.asarray(means)[batch.rows if len(batch.rows) < len(means)
                                  else slice(None)]
        alphas = np.asarray(alphas)
        keep = alphas >= model.config.alpha_min
        np.testing.assert_allclose(batch.mean, np.asarray(means)[keep][:len(batch)],
                                   atol=1e-12)
        np.testing.assert_allclose(batch.alpha, alphas[keep], atol=1e-12)

    def test_opacity_cut(self):
        model = _model(seed=18)
        # Bias the opacity head hard negative: sigmoid(-10) is far below cut.
        model.mlp_opacity.params[-1][:] = -10.0
        batch, _ = model.generate(_camera())
        assert len(batch) == 0

    def test_out_of_frustum_empty(self):
        model = _model(seed=19)
        model.anchors.positions[:, 2] *= -1.0  # everything behind the camera
        batch, _ = model.generate(_camera())
        assert len(batch) == 0
        assert batch.mean.shape == (0, 3)

    def test_far_plane_cut(self):
        model = _model(seed=20)
        cam = _camera()
        far_cam = Camera(fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
                         width=cam.width, height=cam.height,
                         rotation=cam.rotation, position=cam.position,
                         near=0.01, far=1.0)
        batch, _ = model.generate(far_cam)
        assert len(batch) == 0


class TestSceneBackward:
    @staticmethod
    def _weights(rng, batch):
        return GaussianGrads(mean=rng.normal(size=batch.mean.shape),
                             scale=rng.normal(size=batch.scale.shape),
                             quat=rng.normal(size=batch.quat.shape),
                             alpha=rng.normal(size=batch.alpha.shape),
                             color=rng.normal(size=batch.color.shape))

    @staticmethod
    def _loss(model, cam, w):
        batch, _ = model.generate(cam)
        return (np.sum(w.mean * batch.mean) + np.sum(w.scale * batch.scale)
                + np.sum(w.quat * batch.quat) + np.sum(w.alpha * batch.alpha)
                + np.sum(w.color * batch.color))

    def test_zero_upstream_gives_zero(self):
        model = _model(seed=21)
        cam = _camera()
        batch, cache = model.generate(cam)
        zeros = GaussianGrads(mean=np.zeros_like(batch.mean),
                              scale=np.zeros_like(batch.scale),
                              quat=np.zeros_like(batch.quat),
                              alpha=np.zeros_like(batch.alpha),
                              color=np.zeros_like(batch.color))
        grads = model.backward(cache, zeros)
        for gs in grads.values():
            for g in gs:
                assert not g.any()

    def test_offset_gradient_is_anchor_scaling(self):
        model = _model(seed=22)
        cam = _camera()
        batch, cache = model.generate(cam)
        w = GaussianGrads(mean=np.ones_like(batch.mean),
                          scale=np.zeros_like(batch.scale),
                          quat=np.zeros_like(batch.quat),
                          alpha=np.zeros_like(batch.alpha),
                          color=np.zeros_like(batch.color))
        grads = model.backward(cache, w)
        g_off = grads["anchor_offsets"][0]
        k = model.config.offsets_per_anchor
        vis = cache.visible_ids
        kept = np.zeros((len(vis) * k,), dtype=bool)
        kept[cache.rows] = True
        kept = kept.reshape(len(vis), k)
        for ai, a in enumerate(vis):
            for j in range(k):
                expected = model.anchors.scales[a] if kept[ai, j] else np.zeros(3)
                np.testing.assert_array_equal(g_off[a, j], expected)

    @pytest.mark.parametrize("modes", [
        dict(geometry_mode="view_embed", appearance_mode="attenuated"),
        dict(geometry_mode="plain", appearance_mode="plain"),
    ])
    def test_full_chain_matches_finite_differences(self, modes):
        model = _model(seed=23, n_anchors=3, feature_dim=8,
                       offsets_per_anchor=3, dir_embed_dim=4,
                       angle_embed_dim=3, **modes)
        cam = _camera()
        rng = RNG(24)
        batch, cache = model.generate(cam)
        w = self._weights(rng, batch)
        grads = model.backward(cache, w)
        h = 1e-6
        for name, params in model.param_groups().items():
            for p, g in zip(params, grads[name]):
                flat = p.reshape(-1)
                gflat = g.reshape(-1)
                n_probe = min(8, flat.size)
                for idx in rng.choice(flat.size, size=n_probe, replace=False):
                    old = flat[idx]
                    flat[idx] = old + h
                    up = self._loss(model, cam, w)
                    flat[idx] = old - h
                    down = self._loss(model, cam, w)
                    flat[idx] = old
                    num = (up - down) / (2 * h)
                    err = abs(gflat[idx] - num) / max(abs(num), abs(gflat[idx]), 1e-6)
                    assert err < 1e-4, f"{name}[{idx}]: {gflat[idx]} vs {num}"


class TestInitFromDepth:
    def test_single_pixel_single_anchor(self):
        cam = _camera()
        depth = np.zeros((cam.height, cam.width))
        depth[3, 4] = 2.0
        model = init_from_depth([depth], [cam], voxel_size=0.5,
                                config=DecoderConfig(), seed=1)
        point = np.array([(4.5 - cam.cx) / cam.fx * 2.0,
                          (3.5 - cam.cy) / cam.fy * 2.0, 2.0])
        expected = (np.floor(point / 0.5) + 0.5) * 0.5
        assert len(model.anchors) == 1
        np.testing.assert_allclose(model.anchors.positions[0], expected, atol=1e-12)
        np.testing.assert_array_equal(model.anchors.scales[0], [0.5, 0.5, 0.5])

    def test_same_voxel_pixels_merge(self):
        cam = _camera()
        depth = np.zeros((cam.height, cam.width))
        depth[10, 10] = 2.0
        depth[10, 11] = 2.0  # neighbouring rays land in the same coarse voxel
        model = init_from_depth([depth], [cam], voxel_size=1.0,
                                config=DecoderConfig(), seed=1)
        assert len(model.anchors) == 1

    def test_anchor_count_matches_voxel_hash(self):
        rng = RNG(25)
        cam = _camera()
        depth = rng.uniform(1.0, 3.0, size=(cam.height, cam.width))
        depth[rng.uniform(size=depth.shape) < 0.3] = 0.0  # invalid holes
        voxel = 0.25
        model = init_from_depth([depth], [cam], voxel_size=voxel,
                                config=DecoderConfig(), seed=2)
        ii, jj = np.nonzero(depth > 0.0)
        z = depth[ii, jj]
        pts = np.stack([(jj + 0.5 - cam.cx) / cam.fx * z,
                        (ii + 0.5 - cam.cy) / cam.fy * z, z], axis=-1)
        keys = {tuple(key) for key in np.floor(pts / voxel).astype(np.int64)}
        assert len(model.anchors) == len(keys)

    def test_empty_depth_raises(self):
        cam = _camera()
        with pytest.raises(EmptySceneError):
            init_from_depth([np.zeros((cam.height, cam.width))], [cam],
                            voxel_size=0.5, config=DecoderConfig(), seed=0)

    def test_deterministic_for_fixed_seed(self):
        cam = _camera()
        depth = RNG(26).uniform(1.0, 3.0, size=(cam.height, cam.width))
        a = init_from_depth([depth], [cam], 0.3, DecoderConfig(), seed=7)
        b = init_from_depth([depth], [cam], 0.3, DecoderConfig(), seed=7)
        np.testing.assert_array_equal(a.anchors.features, b.anchors.features)
        np.testing.assert_array_equal(a.anchors.offsets, b.anchors.offsets)
        for pa, pb in zip(a.mlp_color.params, b.mlp_color.params):
            np.testing.assert_array_equal(pa, pb)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        model = _model(seed=27, feature_dim=16, offsets_per_anchor=3)
        path = str(tmp_path / "scene.ckpt")
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.anchors.positions,
                                      model.anchors.positions)
        np.testing.assert_array_equal(loaded.anchors.features,
                                      model.anchors.features)
        np.testing.assert_array_equal(loaded.anchors.scales, model.anchors.scales)
        np.testing.assert_array_equal(loaded.anchors.offsets, model.anchors.offsets)
        for name in ("mlp_opacity", "mlp_scale", "mlp_rotation", "mlp_color"):
            for pa, pb in zip(getattr(loaded, name).params,
                              getattr(model, name).params):
                np.testing.assert_array_equal(pa, pb)
        assert loaded.config == model.config
        assert loaded.scene_radius == model.scene_radius
        assert loaded.voxel_size == model.voxel_size

    def test_save_is_deterministic(self, tmp_path):
        model = _model(seed=28)
        p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        save_checkpoint(model, p1)
        save_checkpoint(model, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValidationError):
            load_checkpoint(str(path))

    def test_rejects_future_version(self, tmp_path):
        model = _model(seed=29)
        path = str(tmp_path / "scene.ckpt")
        save_checkpoint(model, path)
        blob = bytearray(open(path, "rb").read())
        blob[4:8] = (99).to_bytes(4, "little")
        open(path, "wb").write(bytes(blob))
        with pytest.raises(ValidationError):
            load_checkpoint(path)
