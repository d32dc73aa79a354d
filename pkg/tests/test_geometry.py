import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zoomrec.geometry import (
    Box,
    ImageSize,
    NormBox,
    area_ratio,
    clamp_shift,
    crop_resample,
    iou,
    to_global,
    to_local,
)


def pixel_count_iou(a: Box, b: Box, step: float = 0.125) -> float:
    """Independent IoU oracle: count sub-pixel grid cells in each region."""
    x_lo = min(a.x0, b.x0)
    x_hi = max(a.x1, b.x1)
    y_lo = min(a.y0, b.y0)
    y_hi = max(a.y1, b.y1)
    xs = np.arange(x_lo + step / 2, x_hi, step)
    ys = np.arange(y_lo + step / 2, y_hi, step)
    gx, gy = np.meshgrid(xs, ys)
    in_a = (gx >= a.x0) & (gx <= a.x1) & (gy >= a.y0) & (gy <= a.y1)
    in_b = (gx >= b.x0) & (gx <= b.x1) & (gy >= b.y0) & (gy <= b.y1)
    inter = np.count_nonzero(in_a & in_b)
    union = np.count_nonzero(in_a | in_b)
    return inter / union


boxes_in_100 = st.builds(
    lambda x0, y0, w, h: Box(x0, y0, x0 + w, y0 + h),
    st.floats(0, 80),
    st.floats(0, 80),
    st.floats(1, 20),
    st.floats(1, 20),
)


class TestBoxTypes:
    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            Box(0, 0, 0, 10)
        with pytest.raises(ValueError):
            Box(5, 5, 4, 10)

    def test_normbox_invariants(self):
        NormBox(0, 0, 1, 1)
        with pytest.raises(ValueError):
            NormBox(0.5, 0, 0.5, 1)
        with pytest.raises(ValueError):
            NormBox(-0.1, 0, 0.5, 1)
        with pytest.raises(ValueError):
            NormBox(0, 0, 1.1, 1)

    def test_image_size(self):
        with pytest.raises(ValueError):
            ImageSize(0, 10)
        assert ImageSize(4, 5).area == 20.0

    def test_box_list_roundtrip(self):
        b = Box(1.5, 2.5, 3.5, 4.5)
        assert Box.from_list(b.as_list()) == b


class TestIoU:
    def test_identity(self):
        b = Box(0, 0, 10, 10)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 1, 1), Box(5, 5, 6, 6)) == 0.0

    def test_known_third(self):
        # Intersection 2, union 6, checked by hand and by the pixel oracle.
        a = Box(0, 0, 2, 2)
        b = Box(1, 0, 3, 2)
        assert iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert pixel_count_iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)

    @given(boxes_in_100, boxes_in_100)
    @settings(max_examples=200, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0

    def test_matches_pixel_oracle_on_aligned_boxes(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            # Eighth-aligned coordinates so the counting oracle is exact.
            x0, y0, x1, y1 = rng.integers(0, 40, 4) * 0.25
            a = Box(x0, y0, x0 + 1 + x1, y0 + 1 + y1)
            x0, y0, x1, y1 = rng.integers(0, 40, 4) * 0.25
            b = Box(x0, y0, x0 + 1 + x1, y0 + 1 + y1)
            assert iou(a, b) == pytest.approx(pixel_count_iou(a, b), abs=1e-9)


class TestAreaRatio:
    def test_full_image(self):
        img = ImageSize(640, 480)
        assert area_ratio(img.full_box(), img) == 1.0

    def test_known_values(self):
        assert area_ratio(Box(0, 0, 10, 10), ImageSize(100, 100)) == pytest.approx(0.01)
        assert area_ratio(Box(0, 0, 32, 16), ImageSize(1024, 512)) == pytest.approx(
            512 / 524288
        )

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            area_ratio(Box(-1, 0, 10, 10), ImageSize(100, 100))
        with pytest.raises(ValueError):
            area_ratio(Box(0, 0, 101, 10), ImageSize(100, 100))


class TestToGlobal:
    def test_identity_map(self):
        crop = Box(100, 200, 300, 400)
        assert to_global(NormBox(0, 0, 1, 1), crop) == crop

    def test_affine_by_hand(self):
        got = to_global(NormBox(0.25, 0.25, 0.5, 0.5), Box(100, 200, 300, 400))
        assert got == Box(150, 250, 200, 300)

    def test_full_image_crop(self):
        img = ImageSize(1024, 768)
        assert to_global(NormBox(0, 0, 1, 1), img.full_box()) == img.full_box()

    @given(
        st.floats(0.0, 0.9),
        st.floats(0.0, 0.9),
        st.floats(0.05, 0.1),
        st.floats(0.05, 0.1),
        boxes_in_100,
    )
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_and_nesting(self, u0, v0, du, dv, crop):
        n = NormBox(u0, v0, u0 + du, v0 + dv)
        g = to_global(n, crop)
        assert crop.contains(g)
        back = to_local(g, crop)
        for a, b in zip(
            (back.u0, back.v0, back.u1, back.v1), (n.u0, n.v0, n.u1, n.v1)
        ):
            assert a == pytest.approx(b, abs=1e-9)


def brute_force_min_shift(b: Box, img: ImageSize) -> float | None:
    """Search integer shifts for the minimal L-inf move that fits the box."""
    best_mag = None
    for dx in range(-200, 201):
        for dy in range(-200, 201):
            x0, x1 = b.x0 + dx, b.x1 + dx
            y0, y1 = b.y0 + dy, b.y1 + dy
            if x0 >= 0 and y0 >= 0 and x1 <= img.w and y1 <= img.h:
                mag = max(abs(dx), abs(dy))
                if best_mag is None or mag < best_mag:
                    best_mag = mag
    return best_mag


class TestClampShift:
    def test_already_inside(self):
        img = ImageSize(100, 100)
        b = Box(10, 10, 20, 20)
        assert clamp_shift(b, img) == b

    def test_shift_in_x(self):
        assert clamp_shift(Box(-10, 0, 40, 50), ImageSize(100, 100)) == Box(0, 0, 50, 50)

    def test_oversize_clips(self):
        assert clamp_shift(Box(-10, -10, 120, 120), ImageSize(100, 100)) == Box(
            0, 0, 100, 100
        )

    def test_matches_brute_force_on_integer_grid(self):
        img = ImageSize(50, 40)
        rng = np.random.default_rng(3)
        for _ in range(100):
            x0, y0 = rng.integers(-60, 60, 2)
            w, h = rng.integers(1, 45, 2)
            b = Box(float(x0), float(y0), float(x0 + w), float(y0 + h))
            got = clamp_shift(b, img)
            if w <= img.w and h <= img.h:
                ref_mag = brute_force_min_shift(b, img)
                assert ref_mag is not None
                assert img.full_box().contains(got)
                assert got.width == b.width and got.height == b.height
                mag = max(abs(got.x0 - b.x0), abs(got.y0 - b.y0))
                assert mag == ref_mag

    @given(boxes_in_100)
    @settings(max_examples=200, deadline=None)
    def test_always_inside(self, b):
        img = ImageSize(60, 60)
        out = clamp_shift(b, img)
        assert img.full_box().contains(out)


def reference_bilinear(image: np.ndarray, b: Box, out: int) -> np.ndarray:
    """Straightforward per-pixel bilinear oracle (pixel-center convention)."""
    h, w = image.shape[:2]
    res = np.zeros((out, out) + image.shape[2:], dtype=np.float64)
    for i in range(out):
        for j in range(out):
            y = b.y0 + (i + 0.5) * b.height / out - 0.5
            x = b.x0 + (j + 0.5) * b.width / out - 0.5
            yi, xi = int(np.floor(y)), int(np.floor(x))
            fy, fx = y - yi, x - xi
            y0 = min(max(yi, 0), h - 1)
            y1 = min(max(yi + 1, 0), h - 1)
            x0 = min(max(xi, 0), w - 1)
            x1 = min(max(xi + 1, 0), w - 1)
            res[i, j] = (
                image[y0, x0] * (1 - fy) * (1 - fx)
                + image[y0, x1] * (1 - fy) * fx
                + image[y1, x0] * fy * (1 - fx)
                + image[y1, x1] * fy * fx
            )
    return res


class TestCropResample:
    def test_full_image_identity(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 255, (16, 16, 3))
        out = crop_resample(img, Box(0, 0, 16, 16), 16)
        np.testing.assert_allclose(out, img, atol=1e-12)

    def test_uniform_region_stays_uniform(self):
        img = np.full((32, 32, 3), 77.0)
        out = crop_resample(img, Box(3.7, 5.1, 20.2, 28.9), 8)
        np.testing.assert_allclose(out, 77.0, atol=1e-12)

    def test_checkerboard_upsample_matches_oracle(self):
        img = np.array([[0.0, 1.0], [1.0, 0.0]])
        b = Box(0, 0, 2, 2)
        got = crop_resample(img, b, 4)
        ref = reference_bilinear(img, b, 4)
        np.testing.assert_allclose(got, ref, atol=1e-6)

    def test_random_regions_match_oracle(self):
        rng = np.random.default_rng(5)
        img = rng.uniform(0, 255, (24, 30, 3))
        for _ in range(20):
            x0 = rng.uniform(0, 10)
            y0 = rng.uniform(0, 10)
            b = Box(x0, y0, x0 + rng.uniform(2, 18), y0 + rng.uniform(2, 12))
            got = crop_resample(img, b, 7)
            ref = reference_bilinear(img, b, 7)
            np.testing.assert_allclose(got, ref, atol=1e-9)

    def test_tiny_region_rejected(self):
        img = np.zeros((10, 10))
        with pytest.raises(ValueError):
            crop_resample(img, Box(0, 0, 0.5, 5), 4)

    def test_region_outside_rejected(self):
        img = np.zeros((10, 10))
        with pytest.raises(ValueError):
            crop_resample(img, Box(0, 0, 12, 5), 4)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        img = rng.uniform(0, 255, (20, 20, 3))
        b = Box(1.3, 2.7, 15.9, 18.2)
        a = crop_resample(img, b, 12)
        c = crop_resample(img, b, 12)
        assert np.array_equal(a, c)
