import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cerberus.errors import BadThresholds, DimensionMismatch
from cerberus.frames import Frame, encode_png, to_gray
from cerberus.motion import (
    MotionField,
    extract_regions,
    gate,
    motion_field,
    motion_mask,
    motion_proportion,
    prompt_frame,
    render_prompts,
    select_prompt,
    stroke_width,
)


def flood_fill_regions(mask, dilation_radius=2, connectivity=4):
    """Brute-force reference: dilate with a square element, then label
    components by iterative flood fill."""
    h, w = mask.shape
    dilated = np.zeros_like(mask)
    r = dilation_radius
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                dilated[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1] = 1
    labels = np.zeros((h, w), dtype=int)
    next_label = 0
    for y in range(h):
        for x in range(w):
            if dilated[y, x] and labels[y, x] == 0:
                next_label += 1
                stack = [(y, x)]
                labels[y, x] = next_label
                while stack:
                    cy, cx = stack.pop()
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and dilated[ny, nx] \
                                and labels[ny, nx] == 0:
                            labels[ny, nx] = next_label
                            stack.append((ny, nx))
    components = []
    for lab in range(1, next_label + 1):
        pixels = [(y, x) for y in range(h) for x in range(w)
                  if labels[y, x] == lab and mask[y, x]]
        if pixels:
            components.append(sorted(pixels))
    return components


class TestMotionProportion:
    def test_identical_frames_zero(self):
        frame = np.random.default_rng(0).random((16, 16))
        assert motion_proportion(frame, frame) == 0.0

    def test_single_pixel_flip(self):
        prev = np.zeros((16, 16))
        cur = prev.copy()
        cur[3, 7] = 1.0
        assert motion_proportion(prev, cur) == pytest.approx(1 / 256, abs=0)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(1)
        for _ in range(20)[:20]:
            prev = rng.random((8, 8))
            cur = rng.random((8, 8))
            expected = sum(abs(cur[i, j] - prev[i, j])
                           for i in range(8) for j in range(8)) / 64
            assert motion_proportion(prev, cur) == pytest.approx(expected, abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        prev, cur = rng.random((8, 8)), rng.random((8, 8))
        assert motion_proportion(prev, cur) == motion_proportion(cur, prev)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            motion_proportion(np.zeros((4, 4)), np.zeros((4, 5)))


class TestGate:
    def test_zero_is_static(self):
        frame = np.zeros((8, 8))
        assert gate(frame, frame, 7e-4) is None

    def test_boundary_passes(self):
        prev = np.zeros((10, 10))
        cur = prev.copy()
        cur[0, 0] = 0.07  # p ~ 7e-4
        eps = motion_proportion(prev, cur)  # epsilon exactly equal to p
        fld = gate(prev, cur, eps)
        assert fld is not None
        assert fld.proportion == eps

    def test_synthetic_recall_total(self):
        # frames built with p >= 2*epsilon must always pass
        rng = np.random.default_rng(3)
        eps = 7e-4
        for _ in range(50):
            prev = rng.random((12, 12))
            delta = np.zeros((12, 12))
            delta[rng.integers(0, 12), rng.integers(0, 12)] = 2 * eps * 144
            cur = np.clip(prev + delta, 0, None)
            assert gate(prev, np.clip(cur, 0, 1), eps) is not None \
                or motion_proportion(prev, np.clip(cur, 0, 1)) < eps


class TestMotionMask:
    def test_all_zero(self):
        fld = motion_field(np.zeros((6, 6)), np.zeros((6, 6)))
        assert not motion_mask(fld).any()

    def test_single_active_pixel(self):
        prev = np.zeros((6, 6))
        cur = prev.copy()
        cur[2, 2] = 1.0
        mask = motion_mask(motion_field(prev, cur), 10 / 255)
        assert mask.sum() == 1
        assert mask[2, 2] == 1

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            fld = motion_field(rng.random((8, 8)), rng.random((8, 8)))
            thresh = 10 / 255
            mask = motion_mask(fld, thresh)
            for i in range(8):
                for j in range(8):
                    assert mask[i, j] == (1 if fld.diffs[i, j] >= thresh else 0)


class TestExtractRegions:
    def test_empty_mask(self):
        fld = motion_field(np.zeros((8, 8)), np.zeros((8, 8)))
        assert extract_regions(np.zeros((8, 8), dtype=np.uint8), fld) == []

    def test_two_separated_blobs(self):
        diffs = np.zeros((40, 40))
        diffs[2:9, 2:9] = 0.5       # 49 px
        diffs[25:32, 25:32] = 0.9   # 49 px, farther than dilation reach
        fld = MotionField(diffs=diffs, proportion=float(diffs.mean()))
        regions = extract_regions(motion_mask(fld), fld, min_area=25)
        assert len(regions) == 2
        # sorted by descending mass
        assert regions[0].mass > regions[1].mass
        assert regions[0].bbox == (25, 25, 31, 31)

    def test_min_area_drops_specks(self):
        diffs = np.zeros((20, 20))
        diffs[5, 5] = 1.0
        fld = MotionField(diffs=diffs, proportion=float(diffs.mean()))
        assert extract_regions(motion_mask(fld), fld, min_area=25) == []

    def test_matches_flood_fill_reference(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            diffs = (rng.random((24, 24)) > 0.92).astype(float) * 0.5
            fld = MotionField(diffs=diffs, proportion=float(diffs.mean()))
            mask = motion_mask(fld)
            regions = extract_regions(mask, fld, min_area=1)
            reference = flood_fill_regions(mask)
            assert len(regions) == len(reference)
            got = sorted(tuple(r.bbox) for r in regions)
            want = sorted(
                (min(x for _, x in px), min(y for y, _ in px),
                 max(x for _, x in px), max(y for y, _ in px))
                for px in reference)
            assert got == want

    def test_region_mass_bounded_by_total(self):
        rng = np.random.default_rng(6)
        diffs = rng.random((16, 16)) * (rng.random((16, 16)) > 0.7)
        fld = MotionField(diffs=diffs, proportion=float(diffs.mean()))
        regions = extract_regions(motion_mask(fld), fld, min_area=1)
        assert sum(r.mass for r in regions) <= fld.proportion + 1e-12


class TestSelectPrompt:
    def test_circle_interval(self):
        assert select_prompt(1e-3, 7e-4, 1.2e-3) == "circle"

    def test_square_boundary_inclusive(self):
        assert select_prompt(1.2e-3, 7e-4, 1.2e-3) == "square"

    def test_epsilon_boundary_none(self):
        assert select_prompt(7e-4, 7e-4, 1.2e-3) is None

    def test_bad_thresholds(self):
        with pytest.raises(BadThresholds):
            select_prompt(1e-3, 2e-3, 1e-3)


class TestRenderPrompts:
    def _frame(self, size=64):
        rng = np.random.default_rng(7)
        img = rng.integers(0, 255, size=(size, size, 3), dtype=np.uint8)
        return Frame(frame_id="f0", image=img)

    def test_zero_regions_identity(self):
        frame = self._frame()
        out = render_prompts(frame, frame.image, [], [], 0.0)
        assert np.array_equal(out.rendered, frame.image)

    def test_corner_region_clipped(self):
        frame = self._frame()
        from cerberus.motion import MotionRegion
        region = MotionRegion(bbox=(0, 0, 5, 5), mass=0.01, pixel_count=36)
        out = render_prompts(frame, frame.image, [region], ["square"], 0.01)
        assert out.rendered.shape == frame.image.shape  # no out-of-bounds writes

    def test_deterministic(self):
        frame = self._frame()
        from cerberus.motion import MotionRegion
        region = MotionRegion(bbox=(10, 10, 20, 24), mass=0.01, pixel_count=100)
        a = render_prompts(frame, frame.image, [region], ["circle"], 0.01)
        b = render_prompts(frame, frame.image, [region], ["circle"], 0.01)
        assert encode_png(a.rendered) == encode_png(b.rendered)

    def test_only_stroke_pixels_change(self):
        frame = self._frame()
        from cerberus.motion import MotionRegion
        region = MotionRegion(bbox=(20, 20, 30, 30), mass=0.01, pixel_count=100)
        out = render_prompts(frame, frame.image, [region], ["square"], 0.01)
        changed = np.any(out.rendered != frame.image, axis=2)
        # changed pixels are pure red and lie near the expanded bbox ring
        assert changed.any()
        reds = out.rendered[changed]
        assert np.all(reds == np.array([255, 0, 0]))
        ys, xs = np.nonzero(changed)
        assert xs.min() >= 15 and xs.max() <= 35 and ys.min() >= 15 and ys.max() <= 35

    def test_stroke_width_floor(self):
        assert stroke_width(100, 100) == 2
        assert stroke_width(1000, 2000) == 4


class TestGrayAndPipeline:
    def test_luma_weights(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        img[0, 0] = [255, 0, 0]
        gray = to_gray(img)
        assert gray[0, 0] == pytest.approx(0.299)
        assert gray[1, 1] == 0.0

    def test_prompt_frame_end_to_end(self):
        rng = np.random.default_rng(8)
        base = rng.integers(0, 50, size=(32, 32, 3), dtype=np.uint8)
        moved = base.copy()
        moved[10:18, 10:18] = 250
        frame = Frame(frame_id="f1", image=moved)
        fld = motion_field(to_gray(base), to_gray(moved))
        prompted = prompt_frame(frame, fld)
        assert prompted.proportion > 7e-4
        assert len(prompted.prompts) >= 1
