import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radiloc.errors import ConfigError, InputError
from radiloc.imgcore import (BoundingBox, GrayImage, Heatmap, RoiMask, bounding_box,
                             boxes_from_components, connected_components, generate_bboxes,
                             normalize_heatmap, render_overlay, threshold_binary)


def hm(values, **kw):
    return Heatmap(np.atleast_2d(np.asarray(values, dtype=float)), **kw)


def gaussian(shape, cy, cx, sigma):
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))


class TestNormalize:
    def test_midpoint_rounds_half_away_from_zero(self):
        # 255 * 128 / 256 = 127.5 exactly
        assert normalize_heatmap(hm([0, 128, 256])).pixels.tolist() == [[0, 128, 255]]

    def test_two_values(self):
        assert normalize_heatmap(hm([-1, 1])).pixels.tolist() == [[0, 255]]

    def test_constant_is_zero(self):
        assert not normalize_heatmap(hm(np.full((4, 5), 3.7))).pixels.any()

    def test_range(self, rng):
        out = normalize_heatmap(hm(rng.normal(size=(9, 7)))).pixels
        assert out.min() == 0 and out.max() == 255
        assert np.array_equal(out, np.round(out))

    def test_prenormalized_passthrough(self):
        out = normalize_heatmap(hm([[10, 200]], prenormalized=True))
        assert out.pixels.tolist() == [[10, 200]]

    @given(arrays(np.int64, (6, 6), elements=st.integers(-1000, 1000)),
           st.integers(-3, 3), st.integers(-10 ** 6, 10 ** 6))
    def test_invariant_under_positive_affine(self, v, log_a, b):
        # power-of-two scale and integer shift keep the arithmetic exact
        a = 2.0 ** log_a
        ref = normalize_heatmap(hm(v)).pixels
        assert np.array_equal(normalize_heatmap(hm(a * v + b)).pixels, ref)


class TestThreshold:
    def test_saturated(self):
        assert threshold_binary(GrayImage(np.full((3, 3), 255.0)), 60).bits.all()
        assert not threshold_binary(GrayImage(np.zeros((3, 3))), 60).bits.any()

    def test_inclusive(self):
        assert threshold_binary(GrayImage([[50, 60, 200]]), 60).bits.tolist() == [[False, True, True]]

    @pytest.mark.parametrize("t", [0, 255, -3, 300])
    def test_out_of_range(self, t):
        with pytest.raises(ConfigError):
            threshold_binary(GrayImage(np.zeros((2, 2))), t)


class TestComponents:
    def test_two_blobs(self):
        m = np.zeros((6, 6), bool)
        m[0:2, 0:2] = True
        m[4:6, 3:5] = True
        comps = connected_components(RoiMask(m))
        assert len(comps) == 2
        assert comps[0].bits[0, 0] and comps[1].bits[4, 3]

    def test_empty(self):
        assert connected_components(RoiMask(np.zeros((4, 4)))) == []

    def test_checkerboard(self):
        m = (np.indices((6, 6)).sum(axis=0) % 2) == 0
        assert len(connected_components(RoiMask(m), 8)) == 1
        assert len(connected_components(RoiMask(m), 4)) == 18

    def test_bad_connectivity(self):
        with pytest.raises(ConfigError):
            connected_components(RoiMask(np.ones((2, 2))), 6)

    def test_partition_random_masks(self, rng):
        for _ in range(1000):
            m = rng.random((int(rng.integers(1, 10)), int(rng.integers(1, 10)))) < 0.5
            conn = int(rng.choice([4, 8]))
            comps = connected_components(RoiMask(m), conn)
            stack = np.array([c.bits for c in comps]) if comps else np.zeros((0,) + m.shape, bool)
            assert (stack.sum(axis=0) <= 1).all()                 # disjoint
            assert np.array_equal(stack.any(axis=0), m)            # union
            firsts = [np.flatnonzero(c.bits.ravel())[0] for c in comps]
            assert firsts == sorted(firsts)                        # raster ordering


class TestBoxes:
    def test_single_pixel(self):
        m = np.zeros((8, 8), bool)
        m[5, 3] = True
        assert bounding_box(RoiMask(m)) == BoundingBox(3, 5, 1, 1)

    def test_full_frame(self):
        assert bounding_box(RoiMask(np.ones((8, 10)))) == BoundingBox(0, 0, 10, 8)

    def test_l_shape(self):
        m = np.zeros((9, 9), bool)
        m[2:7, 1] = True
        m[6, 1:5] = True
        assert boxes_from_components([RoiMask(m)]) == [BoundingBox(1, 2, 4, 5)]

    def test_empty_region_rejected(self):
        with pytest.raises(InputError):
            bounding_box(RoiMask(np.zeros((3, 3))))

    def test_tightness(self, rng):
        for _ in range(300):
            m = rng.random((10, 10)) < 0.3
            for comp in connected_components(RoiMask(m)):
                b = bounding_box(comp)
                bits = comp.bits
                assert bits[b.y, b.x:b.x + b.w].any() and bits[b.y + b.h - 1, b.x:b.x + b.w].any()
                assert bits[b.y:b.y + b.h, b.x].any() and bits[b.y:b.y + b.h, b.x + b.w - 1].any()
                assert bits[b.y:b.y + b.h, b.x:b.x + b.w].sum() == bits.sum()

    def test_invalid(self):
        with pytest.raises(InputError):
            BoundingBox(0, 0, 0, 3)


class TestGenerate:
    def test_constant(self):
        assert generate_bboxes(hm(np.ones((16, 16)))) == []

    def test_gaussian_blob(self):
        h = hm(gaussian((64, 64), 32, 32, 6.0))
        out = generate_bboxes(h, (60, 180))
        by_t = {t: [b for tt, b in out if tt == t] for t in (60, 180)}
        assert len(by_t[60]) == 1 and len(by_t[180]) == 1
        for t in (60, 180):
            assert by_t[t][0].contains_point(32, 32)
        assert by_t[60][0].contains(by_t[180][0])

    def test_tags_preserved_in_order(self):
        out = generate_bboxes(hm(gaussian((32, 32), 10, 20, 3.0)), (60, 180))
        assert [t for t, _ in out] == [60, 180]

    def test_min_area_filters(self):
        v = np.zeros((10, 10))
        v[1, 1] = 1.0
        v[5:8, 5:8] = 1.0
        assert len(generate_bboxes(hm(v), (60,), min_area=1)) == 2
        assert len(generate_bboxes(hm(v), (60,), min_area=2)) == 1

    def test_needs_thresholds(self):
        with pytest.raises(ConfigError):
            generate_bboxes(hm(np.ones((3, 3))), ())

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, (12, 12), elements=st.floats(-5, 5)))
    def test_threshold_monotonicity(self, v):
        h = hm(v)
        norm = normalize_heatmap(h)
        lo, hi = threshold_binary(norm, 60).bits, threshold_binary(norm, 180).bits
        assert not (hi & ~lo).any()
        out = generate_bboxes(h, (60, 180))
        low = [b for t, b in out if t == 60]
        for t, b in out:
            if t == 180:
                assert any(a.contains(b) for a in low)


class TestOverlay:
    def setup_method(self):
        self.img = GrayImage(np.arange(48, dtype=float).reshape(6, 8) * 5)

    def test_zero_heatmap_is_gray(self):
        rgb = render_overlay(self.img, hm(np.zeros((6, 8))))
        assert rgb.dtype == np.uint8
        assert (rgb == self.img.pixels[..., None].astype(np.uint8)).all()

    def test_box_outline_only(self):
        h = hm(gaussian((6, 8), 3, 4, 2.0))
        base = render_overlay(self.img, h)
        box = BoundingBox(1, 1, 4, 3)
        boxed = render_overlay(self.img, h, [box])
        changed = (boxed != base).any(axis=2)
        expect = np.zeros((6, 8), bool)
        expect[1:4, 1:5] = True
        expect[2:3, 2:4] = False
        assert np.array_equal(changed, expect)

    def test_deterministic(self):
        h = hm(gaussian((6, 8), 3, 4, 2.0))
        assert np.array_equal(render_overlay(self.img, h), render_overlay(self.img, h))

    def test_size_mismatch(self):
        with pytest.raises(InputError):
            render_overlay(self.img, hm(np.zeros((5, 8))))


def test_types_validate():
    with pytest.raises(InputError):
        GrayImage([[np.nan, 1.0]])
    with pytest.raises(InputError):
        Heatmap(np.array([[np.inf]]))
    with pytest.raises(InputError):
        GrayImage(np.zeros((0, 3)))
    img = GrayImage(np.zeros((3, 4)))
    assert (img.width, img.height) == (4, 3)
