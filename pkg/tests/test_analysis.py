"""PCA, confidence curves, and score landscapes."""

import numpy as np
import pytest

import shiftscope as ss
from shiftscope.analysis import (confidence_curve, pca_fit, pca_project,
                                 score_landscape)


class TestPca:
    def test_line_in_3d(self):
        rng = np.random.default_rng(0)
        t = rng.normal(size=400)
        direction = np.array([1.0, 2.0, -1.0]) / np.sqrt(6)
        data = np.outer(t, direction) + 0.001 * rng.normal(size=(400, 3))
        model = pca_fit(data)
        assert abs(model.components[0] @ direction) > 0.999
        assert model.explained[0] > 0.999

    def test_isotropic_explained_fractions(self):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(20000, 8))
        model = pca_fit(data)
        np.testing.assert_allclose(model.explained, [1 / 8, 1 / 8], atol=0.01)

    def test_projection_deterministic(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(50, 5))
        model = pca_fit(data)
        p1 = pca_project(model, data)
        p2 = pca_project(model, data)
        assert np.array_equal(p1, p2)
        assert p1.shape == (50, 2)

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        data = rng.normal(size=(60, 4))
        m1 = pca_fit(data)
        m2 = pca_fit(data + 13.0)
        np.testing.assert_allclose(np.abs(m1.components),
                                   np.abs(m2.components), atol=1e-8)
        np.testing.assert_allclose(pca_project(m1, data),
                                   pca_project(m2, data + 13.0) *
                                   np.sign((m1.components *
                                            m2.components).sum(axis=1)),
                                   atol=1e-8)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(4)
        data = rng.normal(size=(80, 3)) @ np.diag([3.0, 1.0, 0.3])
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        m1 = pca_fit(data)
        m2 = pca_fit(data @ q)
        np.testing.assert_allclose(m1.explained, m2.explained, rtol=1e-9)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            pca_fit(np.zeros((1, 3)))


class TestConfidenceCurve:
    def _trained(self):
        cfg = ss.SynthConfig(seed=5)
        data = ss.gen_id(cfg)
        net0 = ss.init_net([2, 16, 16, 3], seed=6)
        net, _ = ss.train(net0, data, ss.LossConfig.ce_only(), epochs=80,
                          seed=7)
        return cfg, net

    def test_single_point(self):
        cfg, net = self._trained()
        seq = ss.gen_shift_sequence(cfg, 2, [0.0], 100, seed=8)
        curve = confidence_curve(net, seq)
        assert len(curve) == 1
        assert curve[0][0] == 0.0 and curve[0][1] > 1 / 3

    def test_category1_confidence_drops(self):
        cfg, net = self._trained()
        seq = ss.gen_shift_sequence(cfg, 1, [0.0, 0.5, 1.0], 300, seed=9)
        curve = confidence_curve(net, seq)
        assert curve[-1][1] < curve[0][1]

    def test_category2_confidence_holds_or_rises(self):
        cfg, net = self._trained()
        seq = ss.gen_shift_sequence(cfg, 2, [0.0, 3.0, 6.0], 300, seed=10)
        curve = confidence_curve(net, seq)
        assert curve[-1][1] >= curve[0][1]

    def test_empty_sequence(self):
        _, net = self._trained()
        with pytest.raises(ValueError):
            confidence_curve(net, [])


class TestScoreLandscape:
    def test_two_by_two_evaluates_cell_centers(self):
        calls = []

        def score_fn(points):
            calls.append(np.asarray(points))
            return np.zeros(len(points))

        grid = score_landscape(score_fn, (0, 1, 0, 2), 2)
        assert len(calls) == 1 and calls[0].shape == (4, 2)
        np.testing.assert_allclose(grid.xs, [0.25, 0.75])
        np.testing.assert_allclose(grid.ys, [0.5, 1.5])
        assert grid.scores.shape == (2, 2)
        assert len(list(grid.rows())) == 4

    def test_landscape_is_pure(self):
        rng = np.random.default_rng(11)
        w = rng.normal(size=(2,))

        def score_fn(points):
            return points @ w

        a = score_landscape(score_fn, (-1, 1, -1, 1), (5, 4))
        b = score_landscape(score_fn, (-1, 1, -1, 1), (5, 4))
        assert np.array_equal(a.scores, b.scores)

    def test_mahalanobis_peak_near_class_centroid(self):
        cfg = ss.SynthConfig(seed=12)
        data = ss.gen_id(cfg)
        net0 = ss.init_net([2, 16, 16, 3], seed=13)
        net, _ = ss.train(net0, data, ss.LossConfig.ce_only(), epochs=100,
                          seed=14)
        score_fn = ss.fit_scorer("mahalanobis", net, data)
        grid = score_landscape(score_fn, (-8, 8, -8, 8), 40)
        j, i = np.unravel_index(np.argmax(grid.scores), grid.scores.shape)
        peak = np.array([grid.xs[i], grid.ys[j]])
        centroids = [data.inputs[data.labels == c + 1].mean(axis=0)
                     for c in range(3)]
        cell = 16 / 40
        assert min(np.linalg.norm(peak - c) for c in centroids) <= 2 * cell

    def test_msp_isolines_parallel_to_linear_boundary(self):
        # hand-set linear two-class net: boundary is the vertical axis
        net = ss.init_net([2, 2], seed=0)
        net.weights[0][:] = np.array([[1.0, -1.0], [0.0, 0.0]])
        net.biases[0][:] = 0.0
        score_fn = ss.fit_scorer("msp", net, None)
        grid = score_landscape(score_fn, (-2, 2, -3, 3), (8, 6))
        # scores depend only on |x|: identical along columns, increasing in |x|
        for col in range(8):
            assert np.ptp(grid.scores[:, col]) < 1e-12
        row = grid.scores[0]
        order = np.argsort(np.abs(grid.xs))
        assert np.all(np.diff(row[order]) >= -1e-12)

    def test_invalid_resolution(self):
        with pytest.raises(ValueError):
            score_landscape(lambda p: np.zeros(len(p)), (0, 1, 0, 1), 1)

    def test_degenerate_bounds(self):
        with pytest.raises(ValueError):
            score_landscape(lambda p: np.zeros(len(p)), (1, 1, 0, 1), 4)


class TestPcaProjectionCsv:
    def test_format_and_round_trip_values(self, tmp_path):
        rng = np.random.default_rng(20)
        feats = rng.normal(size=(30, 6))
        model = pca_fit(feats)
        proj = pca_project(model, feats)
        labels = rng.integers(1, 4, size=30)
        path = tmp_path / "proj.csv"
        ss.write_pca_projection_csv(path, proj, labels, 0.5)
        lines = path.read_text().splitlines()
        assert lines[0] == "pc1,pc2,label,delta"
        assert len(lines) == 31
        first = lines[1].split(",")
        assert float(first[0]) == proj[0, 0]
        assert int(first[2]) == labels[0] and float(first[3]) == 0.5

    def test_per_sample_deltas(self, tmp_path):
        proj = np.zeros((4, 2))
        path = tmp_path / "proj.csv"
        ss.write_pca_projection_csv(path, proj, [1, 1, 2, 2],
                                    [0.0, 0.0, 1.5, 1.5])
        deltas = [float(l.split(",")[3])
                  for l in path.read_text().splitlines()[1:]]
        assert deltas == [0.0, 0.0, 1.5, 1.5]
