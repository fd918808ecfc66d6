import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ionscope.imaging import (
    Image,
    ScanConfig,
    beam_transmission,
    empirical_snr,
    format_image,
    parse_image,
    raster_scan,
    read_image,
    write_image,
)
from ionscope.models import BitmapMask, DiscMask, EdgeMask, RectMask, disc_containment, mask_transmission
from ionscope.source import DetectorSpec, Deterministic, Poissonian, make_rng

OPEN = RectMask(-math.inf, -math.inf, math.inf, math.inf)
PERFECT = DetectorSpec(1.0)


def frames(mask, scan, source, det, n, seed=0):
    return [raster_scan(mask, scan, source, det, rng=make_rng(seed, k)) for k in range(n)]


def test_open_mask_perfect_detector_counts_every_shot():
    for sigma in (0.0, 30.0):
        scan = ScanConfig(pixels=(7, 5), beam_sigma=sigma)
        img = raster_scan(OPEN, scan, Deterministic(1), PERFECT, seed=1)
        assert img.shape == (5, 7)
        assert np.all(img.counts == 1)


def test_edge_with_point_beam_is_exact_step():
    scan = ScanConfig(origin=(-100.0, 0.0), pixel=(10.0, 10.0), pixels=(20, 3))
    img = raster_scan(EdgeMask(0.0), scan, Deterministic(1), PERFECT, seed=2)
    x, _ = scan.centres()
    assert np.array_equal(img.counts, (x > 0).astype(int))


@given(st.integers(0, 2**31), st.sampled_from(["edge", "disc", "rect", "bitmap"]),
       st.floats(-50, 50), st.floats(-50, 50))
def test_point_beam_image_equals_mask_indicator(seed, kind, ox, oy):
    mask = {"edge": EdgeMask(3.0), "disc": DiscMask(40, 60, 45), "rect": RectMask(0, 10, 70, 55),
            "bitmap": BitmapMask(np.array([[0, 1, 1], [1, 0, 1]]), pitch=30.0)}[kind]
    scan = ScanConfig(origin=(ox, oy), pixel=(9.0, 11.0), pixels=(12, 9))
    img = raster_scan(mask, scan, Deterministic(1), PERFECT, seed=seed)
    x, y = scan.centres()
    assert np.array_equal(img.counts, mask_transmission(mask, x, y).astype(int))


def test_disc_interior_detection_rate():
    scan = ScanConfig(pixel=(25.0, 25.0), pixels=(16, 16))
    mask = DiscMask(200.0, 200.0, 75.0)
    x, y = scan.centres()
    interior = np.hypot(x - 200, y - 200) <= 75
    assert interior.sum() >= 20
    per_seed = [raster_scan(mask, scan, Deterministic(1), DetectorSpec(0.95), seed=s).counts[interior].mean()
                for s in range(100)]
    vals = np.array(per_seed)
    assert abs(vals.mean() - 0.95) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_beam_convolution_uses_analytic_forms():
    scan = ScanConfig(origin=(-50.0, -50.0), pixel=(10.0, 10.0), pixels=(10, 10), beam_sigma=12.0)
    x, y = scan.centres()
    t_edge = beam_transmission(EdgeMask(5.0), scan)
    # oracle: Gaussian beam mass on the open side x > 5 is Phi((x - 5) / sigma)
    from scipy.stats import norm
    assert np.allclose(t_edge, norm.cdf((x - 5.0) / 12.0), atol=1e-15)
    t_disc = beam_transmission(DiscMask(0, 0, 30), scan)
    assert np.allclose(t_disc, disc_containment(np.hypot(x, y), 30.0, 12.0), atol=0)
    t_rect = beam_transmission(RectMask(-20, -10, 20, 10), scan)
    expect = ((norm.cdf((20 - x) / 12) - norm.cdf((-20 - x) / 12))
              * (norm.cdf((10 - y) / 12) - norm.cdf((-10 - y) / 12)))
    assert np.allclose(t_rect, expect, atol=1e-14)


def test_bitmap_beam_sampling_matches_monte_carlo_blur():
    lv = np.array([[0, 255, 0], [255, 128, 255], [0, 255, 0]])
    mask = BitmapMask(lv, pitch=20.0)
    scan = ScanConfig(pixel=(15.0, 15.0), pixels=(4, 4), ions_per_pixel=4000, beam_sigma=8.0)
    img = raster_scan(mask, scan, Deterministic(1), PERFECT, seed=9)
    # oracle: brute-force blur with 10^6 independent beam offsets per pixel
    rng = np.random.default_rng(0)
    x, y = scan.centres()
    off = rng.normal(0, 8.0, (10**6, 2))
    blur = np.array([[np.mean(mask_transmission(mask, xi + off[:, 0], yi + off[:, 1]))
                      for xi, yi in zip(rx, ry)] for rx, ry in zip(x, y)])
    rate = img.counts / 4000
    se = np.sqrt(np.maximum(blur * (1 - blur), 1e-4) / 4000)
    assert np.all(np.abs(rate - blur) <= 4 * se)


def test_counts_bounded_by_shots_and_dark_counts():
    scan = ScanConfig(pixels=(8, 8), ions_per_pixel=3, beam_sigma=10.0)
    img = raster_scan(DiscMask(100, 100, 60), scan, Deterministic(2), DetectorSpec(0.9, 0.3), seed=4)
    assert np.all(img.counts <= 2 * 3 + 3)
    dark_only = raster_scan(RectMask(1e6, 1e6, 2e6, 2e6), scan, Deterministic(2), DetectorSpec(0.9, 0.3), seed=4)
    assert np.all(dark_only.counts <= 3)
    assert dark_only.counts.sum() > 0


def test_same_seed_same_image_and_file(tmp_path):
    scan = ScanConfig(pixels=(6, 4), beam_sigma=20.0)
    a = raster_scan(DiscMask(60, 50, 40), scan, Poissonian(2.0), DetectorSpec(0.8), seed=12)
    b = raster_scan(DiscMask(60, 50, 40), scan, Poissonian(2.0), DetectorSpec(0.8), seed=12)
    assert a == b
    write_image(a, tmp_path / "a.pgm")
    write_image(b, tmp_path / "b.pgm")
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
    assert a.metadata["seed"] == 12 and a.metadata["scan_order"].startswith("row-major")


def test_raster_needs_a_generator():
    with pytest.raises(ValueError):
        raster_scan(OPEN, ScanConfig(), Deterministic(1), PERFECT)


@pytest.mark.parametrize("kw", [dict(pixel=(0.0, 1.0)), dict(pixels=(0, 4)), dict(ions_per_pixel=0),
                                dict(beam_sigma=-1.0)])
def test_bad_scan_rejected(kw):
    with pytest.raises(ValueError):
        ScanConfig(**kw)


# -- SNR ---------------------------------------------------------------------------------------


def test_constant_frames_give_infinite_snr():
    img = Image(np.ones((3, 3), dtype=int), {"scan": {"a": 1}})
    assert empirical_snr([img, img]) == (1.0, 0.0, math.inf)


def test_mismatched_frames_rejected():
    a = Image(np.ones((3, 3), dtype=int), {"scan": {"a": 1}})
    with pytest.raises(ValueError):
        empirical_snr([a, Image(np.ones((3, 3), dtype=int), {"scan": {"a": 2}})])
    with pytest.raises(ValueError):
        empirical_snr([a, Image(np.ones((2, 3), dtype=int), {"scan": {"a": 1}})])
    with pytest.raises(ValueError):
        empirical_snr([a])


def test_region_selects_pixels():
    a = Image(np.array([[1, 5], [1, 9]]))
    b = Image(np.array([[1, 7], [1, 3]]))
    mean, std, snr = empirical_snr([a, b], region=np.array([[False, True], [False, True]]))
    assert mean == pytest.approx(6.0)
    assert std == pytest.approx(np.std([5, 9, 7, 3], ddof=1))


SNR_SCAN = ScanConfig(pixels=(2, 2))


def test_deterministic_frames_snr():
    _, _, snr = empirical_snr(frames(OPEN, SNR_SCAN, Deterministic(1), DetectorSpec(0.96), 10**4, seed=1))
    assert snr == pytest.approx(4.899, rel=0.05)


def test_poisson_frames_snr():
    _, _, snr = empirical_snr(frames(OPEN, SNR_SCAN, Poissonian(1.0), PERFECT, 10**4, seed=2))
    assert snr == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize("a", [0.5, 0.9])
def test_deterministic_beats_poisson_in_images(a):
    det = empirical_snr(frames(OPEN, SNR_SCAN, Deterministic(1), DetectorSpec(a), 10**4, seed=3))[2]
    poi = empirical_snr(frames(OPEN, SNR_SCAN, Poissonian(1.0), DetectorSpec(a), 10**4, seed=4))[2]
    assert det > poi


# -- file formats ---------------------------------------------------------------------------------


def test_minimal_pgm():
    text = format_image(Image(np.array([[1]])), "pgm")
    lines = text.split("\n")
    assert lines[0] == "P2" and lines[1].startswith("# ")
    assert "\n".join(lines[2:]) == "1 1\n1\n1\n"


def test_pgm_maxval_at_least_one():
    text = format_image(Image(np.zeros((2, 3), dtype=int)), "pgm")
    assert text.split("\n")[2:4] == ["3 2", "1"]


def test_csv_example():
    assert format_image(Image(np.array([[0, 1], [1, 0]])), "csv") == "0,1\n1,0\n"


images = st.builds(
    Image,
    hnp.arrays(np.int64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12), elements=st.integers(0, 10**6)),
    st.fixed_dictionaries({"seed": st.integers(0, 2**31), "note": st.text(max_size=10)}),
)


@given(images, st.sampled_from(["pgm", "csv"]))
def test_file_round_trip(tmp_path_factory, img, fmt):
    path = tmp_path_factory.mktemp("img") / f"x.{fmt}"
    write_image(img, path)
    back = read_image(path)
    assert np.array_equal(back.counts, img.counts)
    if fmt == "pgm":
        assert back == img


def test_bad_files_rejected():
    with pytest.raises(ValueError):
        parse_image("P5\n1 1\n1\n1\n", "pgm")
    with pytest.raises(ValueError):
        parse_image("P2\n2 2\n1\n1 0 1\n", "pgm")
    with pytest.raises(ValueError):
        Image(np.array([[-1]]))
    with pytest.raises(ValueError):
        write_image(Image(np.array([[1]])), "x.tiff")
