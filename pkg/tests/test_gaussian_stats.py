from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hflsim.errors import DegenerateInputError, EmptyMergeError, ImageFormatError
from hflsim.gaussian_stats import (
    GaussianSummary,
    ImagePixels,
    dataset_summary,
    dump_ppm,
    estimate_image_summary,
    load_ppm,
    merge_summaries,
)
from oracles import exact_merge, exact_moments


def rgb(w, h, values):
    return ImagePixels(w, h, 3, np.asarray(values, dtype=np.uint8))


def test_constant_image_has_zero_variance():
    s = estimate_image_summary(rgb(2, 2, [128] * 12))
    assert (s.n, s.mean, s.var) == (1, 128.0, 0.0)


def test_two_sample_extremes():
    s = estimate_image_summary(ImagePixels(2, 1, 1, np.array([0, 255], dtype=np.uint8)))
    assert (s.n, s.mean, s.var) == (1, 127.5, 32512.5)


def test_single_sample_is_degenerate():
    with pytest.raises(DegenerateInputError):
        estimate_image_summary(ImagePixels(1, 1, 1, np.array([7], dtype=np.uint8)))


def test_channels_are_pooled():
    # R, G, B planes with different means collapse into one distribution
    data = np.array([0, 100, 200] * 4, dtype=np.uint8)
    s = estimate_image_summary(rgb(2, 2, data))
    mean, var = exact_moments(data)
    assert s.mean == float(mean)
    assert s.var == float(var)


@given(st.lists(st.integers(0, 255), min_size=2, max_size=300))
def test_integer_images_match_rational_oracle(samples):
    img = ImagePixels(len(samples), 1, 1, np.array(samples, dtype=np.uint8))
    s = estimate_image_summary(img)
    mean, var = exact_moments(samples)
    assert s.mean == pytest.approx(float(mean), rel=1e-15, abs=0)
    assert s.var == pytest.approx(float(var), rel=1e-12, abs=1e-12)


def test_float_pixels_use_two_pass_estimate():
    data = np.array([1.5, 2.5, 3.5, 4.5, 5.5, 6.5])
    s = estimate_image_summary(ImagePixels(2, 1, 3, data))
    assert s.mean == 4.0
    assert s.var == pytest.approx(np.var(data, ddof=1), rel=1e-15)


def test_merge_examples():
    a = GaussianSummary(1, 100.0, 4.0)
    b = GaussianSummary(1, 200.0, 16.0)
    assert merge_summaries([a]) == a
    assert merge_summaries([a, a]) == GaussianSummary(2, 100.0, 2.0)
    assert merge_summaries([a, b]) == GaussianSummary(2, 150.0, 5.0)


def test_merge_empty_raises():
    with pytest.raises(EmptyMergeError):
        merge_summaries([])


summaries = st.builds(
    GaussianSummary,
    st.integers(1, 500),
    st.floats(0, 255, allow_nan=False),
    st.floats(0, 5000, allow_nan=False),
)


@given(st.lists(summaries, min_size=1, max_size=12))
def test_merge_matches_rational_oracle(children):
    got = merge_summaries(children)
    n, mean, var = exact_merge([(c.n, Fraction(c.mean), Fraction(c.var)) for c in children])
    assert got.n == n
    assert got.mean == pytest.approx(float(mean), rel=1e-13, abs=1e-12)
    assert got.var == pytest.approx(float(var), rel=1e-12, abs=1e-300)


@given(st.lists(summaries, min_size=1, max_size=12))
def test_merged_mean_stays_within_children(children):
    got = merge_summaries(children)
    assert min(c.mean for c in children) <= got.mean <= max(c.mean for c in children)


@given(st.lists(summaries, min_size=2, max_size=12), st.data())
def test_merge_is_associative(children, data):
    cut = data.draw(st.integers(1, len(children) - 1))
    nested = merge_summaries([merge_summaries(children[:cut]), merge_summaries(children[cut:])])
    flat = merge_summaries(children)
    assert nested.n == flat.n
    assert nested.mean == pytest.approx(flat.mean, rel=1e-10, abs=1e-10)
    assert nested.var == pytest.approx(flat.var, rel=1e-10, abs=1e-300)


def test_dataset_summary_merges_images():
    imgs = [rgb(2, 1, [10, 20, 30, 40, 50, 60]), rgb(2, 1, [0, 0, 0, 255, 255, 255])]
    s = dataset_summary(imgs)
    a, b = (estimate_image_summary(i) for i in imgs)
    assert s == merge_summaries([a, b])


# --- decoding ---------------------------------------------------------------


def test_p5_all_zero():
    img = load_ppm(b"P5 2 2 255\n\x00\x00\x00\x00")
    assert (img.width, img.height, img.channels) == (2, 2, 1)
    assert img.data.tolist() == [0, 0, 0, 0]


def test_p6_length_contract():
    img = load_ppm(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 255, 0]))
    assert img.channels == 3
    assert img.data.size == 6


def test_header_comments_are_skipped():
    img = load_ppm(b"P5\n# made by hand\n1 2\n# max\n255\n\x05\x06")
    assert img.data.tolist() == [5, 6]


def test_payload_may_start_with_whitespace_byte():
    img = load_ppm(b"P5 2 1 255\n\x20\x0a")
    assert img.data.tolist() == [32, 10]


@pytest.mark.parametrize("raw, fragment", [
    (b"P3 1 1 255\n0 0 0", "magic"),
    (b"P6 1 1 65535\n\x00\x00", "unsupported maxval"),
    (b"P6 2 2 255\n\x00\x00\x00", "truncated payload"),
    (b"P6 2", "truncated header"),
    (b"P5 x 2 255\n", "non-numeric"),
])
def test_decode_errors_name_the_field(raw, fragment):
    with pytest.raises(ImageFormatError, match=fragment):
        load_ppm(raw)


@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3]), st.data())
def test_encode_decode_round_trip(w, h, c, data):
    values = data.draw(st.lists(st.integers(0, 255), min_size=w * h * c, max_size=w * h * c))
    img = ImagePixels(w, h, c, np.array(values, dtype=np.uint8))
    back = load_ppm(dump_ppm(img))
    assert (back.width, back.height, back.channels) == (w, h, c)
    assert back.data.tolist() == values


def test_pixel_range_and_shape_are_validated():
    with pytest.raises(ImageFormatError):
        ImagePixels(2, 2, 3, np.zeros(5))
    with pytest.raises(ImageFormatError):
        ImagePixels(1, 2, 1, np.array([0.0, 256.0]))
    with pytest.raises(ImageFormatError):
        ImagePixels(1, 1, 2, np.zeros(2))


def test_summary_dict_round_trip():
    s = GaussianSummary(7, 121.97, 55.54)
    assert GaussianSummary.from_dict(s.to_dict()) == s
    with pytest.raises(DegenerateInputError):
        GaussianSummary.from_dict({"n": 1, "mean": 0.0})
