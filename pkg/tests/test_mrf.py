"""Tests for the grid min-cut solver and MRF foreground segmentation.

The central oracle is the max-flow/min-cut certificate: for any labeling O,
cut(O) >= flow, with equality exactly when O is a minimum cut.  Asserting
cut(labels) == flow therefore certifies both that the solver's flow value is
maximal and that the returned labeling is a global minimizer -- no
enumeration needed.  Small grids are additionally checked exhaustively, and
flow values are cross-checked against scipy's integer max-flow.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from staticbg.foreground import (
    MrfParams,
    detect,
    estimate_params,
    mrf_energy,
    segment,
    subtract,
    unary_weights,
)
from staticbg.gridcut import GridGraph, min_cut


def _random_graph(rng, h, w, integer=False, hi=10.0):
    def draw(shape):
        if integer:
            return rng.integers(0, int(hi) + 1, size=shape).astype(np.float64)
        return rng.uniform(0.0, hi, size=shape)

    return GridGraph(
        source_cap=draw((h, w)),
        sink_cap=draw((h, w)),
        right_cap=draw((h, max(w - 1, 0))),
        down_cap=draw((max(h - 1, 0), w)),
    )


def _cut_value(graph, labels):
    """Total capacity severed by assigning label-1 pixels to the source side."""
    o = labels.astype(bool)
    val = float(graph.sink_cap[o].sum()) + float(graph.source_cap[~o].sum())
    if graph.right_cap.size:
        val += float(graph.right_cap[o[:, 1:] != o[:, :-1]].sum())
    if graph.down_cap.size:
        val += float(graph.down_cap[o[1:, :] != o[:-1, :]].sum())
    return val


def _all_labelings(h, w):
    for bits in itertools.product((0, 1), repeat=h * w):
        yield np.array(bits, dtype=np.uint8).reshape(h, w)


def _scipy_flow(graph):
    h, w = graph.shape
    n = h * w + 2
    s, t = h * w, h * w + 1
    rows, cols, caps = [], [], []

    def add(u, v, c):
        if c > 0:
            rows.append(u)
            cols.append(v)
            caps.append(int(c))

    for i in range(h):
        for j in range(w):
            p = i * w + j
            add(s, p, graph.source_cap[i, j])
            add(p, t, graph.sink_cap[i, j])
            if j + 1 < w:
                add(p, p + 1, graph.right_cap[i, j])
                add(p + 1, p, graph.right_cap[i, j])
            if i + 1 < h:
                add(p, p + w, graph.down_cap[i, j])
                add(p + w, p, graph.down_cap[i, j])
    mat = csr_matrix((caps, (rows, cols)), shape=(n, n), dtype=np.int32)
    return float(maximum_flow(mat, s, t).flow_value)


class TestGridGraph:
    def test_shape_property(self):
        g = GridGraph(np.zeros((2, 3)), np.zeros((2, 3)),
                      np.zeros((2, 2)), np.zeros((1, 3)))
        assert g.shape == (2, 3)

    def test_sink_shape_mismatch(self):
        with pytest.raises(ValueError, match="sink_cap"):
            GridGraph(np.zeros((2, 3)), np.zeros((3, 2)),
                      np.zeros((2, 2)), np.zeros((1, 3)))

    def test_right_shape_mismatch(self):
        with pytest.raises(ValueError, match="right_cap"):
            GridGraph(np.zeros((2, 3)), np.zeros((2, 3)),
                      np.zeros((2, 3)), np.zeros((1, 3)))

    def test_down_shape_mismatch(self):
        with pytest.raises(ValueError, match="down_cap"):
            GridGraph(np.zeros((2, 3)), np.zeros((2, 3)),
                      np.zeros((2, 2)), np.zeros((2, 3)))

    def test_negative_capacity_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            GridGraph(np.full((2, 2), -1.0), np.zeros((2, 2)),
                      np.zeros((2, 1)), np.zeros((1, 2)))


class TestMinCut:
    def test_single_pixel(self):
        g = GridGraph(np.array([[2.0]]), np.array([[1.0]]),
                      np.zeros((1, 0)), np.zeros((0, 1)))
        labels, flow = min_cut(g)
        assert flow == 1.0
        assert labels.tolist() == [[1]]

    def test_single_pixel_sink_wins(self):
        g = GridGraph(np.array([[1.0]]), np.array([[3.0]]),
                      np.zeros((1, 0)), np.zeros((0, 1)))
        labels, flow = min_cut(g)
        assert flow == 1.0
        assert labels.tolist() == [[0]]

    def test_two_pixel_bridge(self):
        # s -5-> p0 -2-> p1 -5-> t: the bridge is the bottleneck, so the cut
        # separates the pair and p0 stays on the source side.
        g = GridGraph(source_cap=np.array([[5.0, 0.0]]),
                      sink_cap=np.array([[0.0, 5.0]]),
                      right_cap=np.array([[2.0]]),
                      down_cap=np.zeros((0, 2)))
        labels, flow = min_cut(g)
        assert flow == 2.0
        assert labels.tolist() == [[1, 0]]

    @pytest.mark.parametrize("shape", [(1, 1), (1, 4), (4, 1), (2, 2), (2, 3), (3, 3)])
    def test_exhaustive_small_grids(self, shape):
        h, w = shape
        for seed in range(4):
            rng = np.random.default_rng(100 * h + 10 * w + seed)
            g = _random_graph(rng, h, w)
            labels, flow = min_cut(g)
            best = min(_cut_value(g, o) for o in _all_labelings(h, w))
            assert flow == pytest.approx(best, abs=1e-9)
            assert _cut_value(g, labels) == pytest.approx(best, abs=1e-9)

    @pytest.mark.parametrize("seed", range(30))
    def test_flow_matches_scipy_integer_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h, w = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        g = _random_graph(rng, h, w, integer=True, hi=20)
        _, flow = min_cut(g)
        assert flow == _scipy_flow(g)

    @given(seed=st.integers(0, 2**32 - 1),
           h=st.integers(1, 5), w=st.integers(1, 5))
    @settings(max_examples=60, deadline=None)
    def test_cut_certificate(self, seed, h, w):
        # cut(labels) == flow certifies global optimality of the labeling.
        rng = np.random.default_rng(seed)
        g = _random_graph(rng, h, w)
        labels, flow = min_cut(g)
        assert _cut_value(g, labels) == pytest.approx(flow, abs=1e-9)

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(7)
        g = _random_graph(rng, 6, 6)
        first, flow1 = min_cut(g)
        second, flow2 = min_cut(g)
        assert flow1 == flow2
        assert np.array_equal(first, second)

    def test_zero_capacities_all_background(self):
        g = GridGraph(np.zeros((3, 3)), np.zeros((3, 3)),
                      np.zeros((3, 2)), np.zeros((2, 3)))
        labels, flow = min_cut(g)
        assert flow == 0.0
        assert not labels.any()


class TestMrfParams:
    def test_negative_lambda_a(self):
        with pytest.raises(ValueError):
            MrfParams(lambda_a=-0.1, lambda_b=0.0)

    def test_negative_lambda_b(self):
        with pytest.raises(ValueError):
            MrfParams(lambda_a=0.1, lambda_b=-1e-9)

    def test_zero_allowed(self):
        p = MrfParams(lambda_a=0.0, lambda_b=0.0)
        assert p.lambda_a == 0.0 and p.lambda_b == 0.0


class TestSubtract:
    def test_signed_residual(self):
        f = np.array([[0.7, 0.2]])
        b = np.array([[0.5, 0.5]])
        np.testing.assert_allclose(subtract(f, b), [[0.2, -0.3]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            subtract(np.zeros((2, 2)), np.zeros((2, 3)))


class TestMrfEnergy:
    def test_hand_computed(self):
        o = np.array([[1, 0], [0, 1]])
        r = np.array([[1.0, 2.0], [3.0, 4.0]])
        # data 0.5*(4+9)=6.5, unary 0.3*2=0.6, 4 disagreeing pairs * 0.2
        e = mrf_energy(o, r, MrfParams(lambda_a=0.3, lambda_b=0.2))
        assert e == pytest.approx(6.5 + 0.6 + 0.8, abs=1e-12)

    def test_all_zero_labels(self):
        r = np.array([[1.0, 2.0], [3.0, 4.0]])
        e = mrf_energy(np.zeros((2, 2)), r, MrfParams(0.3, 0.2))
        assert e == pytest.approx(15.0, abs=1e-12)

    def test_all_one_labels(self):
        r = np.array([[1.0, 2.0], [3.0, 4.0]])
        e = mrf_energy(np.ones((2, 2)), r, MrfParams(0.3, 0.2))
        assert e == pytest.approx(1.2, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mrf_energy(np.zeros((2, 2)), np.zeros((3, 2)), MrfParams(0.1, 0.1))


class TestSegment:
    def test_residual_must_be_2d(self):
        with pytest.raises(ValueError, match="2-D"):
            segment(np.zeros((2, 2, 3)), MrfParams(0.1, 0.1))

    @pytest.mark.parametrize("shape", [(1, 4), (2, 2), (2, 3), (3, 3)])
    def test_exhaustive_energy_minimum(self, shape):
        h, w = shape
        for seed in range(3):
            rng = np.random.default_rng(1000 + 10 * h + w + seed)
            r = rng.normal(0.0, 0.6, size=(h, w))
            params = MrfParams(lambda_a=float(rng.uniform(0.01, 0.3)),
                               lambda_b=float(rng.uniform(0.0, 0.2)))
            labels = segment(r, params)
            best = min(mrf_energy(o, r, params) for o in _all_labelings(h, w))
            assert mrf_energy(labels, r, params) == pytest.approx(best, abs=1e-9)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_flow_energy_relation(self, seed):
        # flow == min E - sum(0.5 r^2) + sum(max(-w, 0)) ties the cut value
        # back to the energy of the returned labeling.
        rng = np.random.default_rng(seed)
        r = rng.normal(0.0, 0.6, size=(4, 5))
        params = MrfParams(lambda_a=float(rng.uniform(0.01, 0.3)),
                           lambda_b=float(rng.uniform(0.0, 0.2)))
        w = unary_weights(r, params)
        h, wd = r.shape
        graph = GridGraph(np.maximum(-w, 0.0), np.maximum(w, 0.0),
                          np.full((h, wd - 1), params.lambda_b),
                          np.full((h - 1, wd), params.lambda_b))
        labels, flow = min_cut(graph)
        offset = 0.5 * float(np.sum(r * r)) - float(np.maximum(-w, 0.0).sum())
        assert mrf_energy(labels, r, params) == pytest.approx(flow + offset, abs=1e-9)

    def test_no_smoothing_is_pointwise_threshold(self):
        rng = np.random.default_rng(5)
        r = rng.normal(0.0, 0.6, size=(8, 8))
        la = 0.1
        labels = segment(r, MrfParams(lambda_a=la, lambda_b=0.0))
        expected = (0.5 * r * r > la).astype(np.uint8)
        assert np.array_equal(labels, expected)

    def test_threshold_tie_goes_to_background(self):
        # 0.5 * 0.5^2 == lambda_a exactly: zero net weight, label stays 0.
        r = np.array([[0.5, 1.0]])
        labels = segment(r, MrfParams(lambda_a=0.125, lambda_b=0.0))
        assert labels.tolist() == [[0, 1]]

    def test_smoothing_fills_hole(self):
        # A strong 3x3 blob with a weak center pixel: without smoothing the
        # center drops out, with it the blob is filled.
        r = np.zeros((5, 5))
        r[1:4, 1:4] = 1.0
        r[2, 2] = 0.3
        params_plain = MrfParams(lambda_a=0.1, lambda_b=0.0)
        params_smooth = MrfParams(lambda_a=0.1, lambda_b=0.05)
        hole = segment(r, params_plain)
        filled = segment(r, params_smooth)
        assert hole[2, 2] == 0
        assert filled[2, 2] == 1
        expected = np.zeros((5, 5), dtype=np.uint8)
        expected[1:4, 1:4] = 1
        assert np.array_equal(filled, expected)

    @pytest.mark.parametrize("seed", range(6))
    def test_mask_nested_in_lambda_a(self, seed):
        # Raising the count penalty can only shrink the (minimal) optimal
        # foreground set.
        rng = np.random.default_rng(seed)
        r = rng.normal(0.0, 0.5, size=(7, 9))
        prev = None
        for la in [0.01, 0.03, 0.06, 0.1, 0.2, 0.4]:
            mask = segment(r, MrfParams(lambda_a=la, lambda_b=0.02))
            if prev is not None:
                assert not np.any(mask > prev)
            prev = mask


class TestEstimateParams:
    def test_formula(self):
        rng = np.random.default_rng(11)
        r = rng.normal(0.0, 0.1, size=(16, 16))
        p = estimate_params(r)
        sigma = 1.4826 * np.median(np.abs(r - np.median(r)))
        assert p.lambda_a == pytest.approx(2.0 * sigma * sigma, rel=1e-12)
        assert p.lambda_b == pytest.approx(p.lambda_a / 2.0, rel=1e-12)

    def test_zero_residual(self):
        p = estimate_params(np.zeros((4, 4)))
        assert p.lambda_a == 0.0 and p.lambda_b == 0.0

    def test_scale_quadratic(self):
        rng = np.random.default_rng(3)
        r = rng.normal(0.0, 0.2, size=(12, 12))
        p1 = estimate_params(r)
        p2 = estimate_params(3.0 * r)
        assert p2.lambda_a == pytest.approx(9.0 * p1.lambda_a, rel=1e-9)


class TestDetect:
    def test_identical_frames_all_background(self):
        rng = np.random.default_rng(2)
        frame = rng.uniform(0.0, 1.0, size=(10, 10))
        mask = detect(frame, frame)
        assert mask.shape == (10, 10)
        assert not mask.any()

    def test_bright_block_recovered(self):
        bg = np.full((8, 8), 0.2)
        frame = bg.copy()
        frame[2:5, 3:6] = 0.9
        mask = detect(frame, bg, MrfParams(lambda_a=0.02, lambda_b=0.005))
        expected = np.zeros((8, 8), dtype=np.uint8)
        expected[2:5, 3:6] = 1
        assert np.array_equal(mask, expected)

    def test_dark_object_also_fires(self):
        # The data term is quadratic in the residual, so sign does not matter.
        bg = np.full((8, 8), 0.8)
        frame = bg.copy()
        frame[1:4, 1:4] = 0.1
        mask = detect(frame, bg, MrfParams(lambda_a=0.02, lambda_b=0.005))
        assert mask[1:4, 1:4].all()
        assert mask.sum() == 9

    def test_color_inputs_collapse_to_gray(self):
        rng = np.random.default_rng(9)
        bg = rng.uniform(0.0, 1.0, size=(6, 6, 3))
        frame = bg.copy()
        frame[2:4, 2:4, :] = 1.0
        params = MrfParams(lambda_a=0.01, lambda_b=0.0)
        from staticbg.frame_io import to_gray

        color_mask = detect(frame, bg, params)
        gray_mask = detect(to_gray(frame), to_gray(bg), params)
        assert np.array_equal(color_mask, gray_mask)

    def test_auto_params_on_noisy_scene(self):
        rng = np.random.default_rng(21)
        bg = np.full((32, 32), 0.5)
        frame = bg + rng.normal(0.0, 0.02, size=(32, 32))
        frame[10:20, 10:20] += 0.4
        mask = detect(frame, bg)
        assert mask[10:20, 10:20].mean() > 0.95
        outside = mask.sum() - mask[10:20, 10:20].sum()
        assert outside <= 5
