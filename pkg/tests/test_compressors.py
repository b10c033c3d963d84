"""Tests for the contractive compressor family and its bit accounting."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hedzoc.compressors import (
    CompressorKind,
    compress,
    contraction_estimate,
    format_compressor,
    params_for,
    parse_compressor,
)
from hedzoc.rng import stream


def make(spec_text: str, p: int):
    return params_for(parse_compressor(spec_text), p)


class TestParams:
    def test_quantizer_reference_row(self):
        spec = make("quant:4", 784)
        assert spec.r == 1.0 + 784.0 / 4**4
        assert spec.r == 4.0625
        assert spec.delta == pytest.approx(1.0 / 4.0625, rel=1e-15)
        assert spec.bits_per_vector == 3984

    def test_topk_row(self):
        spec = make("topk:1", 3)
        assert spec.r == 1.0
        assert spec.delta == pytest.approx(1.0 / 3.0, rel=1e-15)
        assert spec.delta0 == pytest.approx(4.0 / 3.0, rel=1e-15)
        assert spec.bits_per_vector == 64

    def test_randk_row(self):
        spec = make("randk:2", 8)
        assert spec.delta == 0.25
        assert spec.bits_per_vector == 128

    def test_normsign_row(self):
        spec = make("normsign", 4)
        assert spec.r == 2.0
        assert spec.delta == 1.0 / 16.0
        assert spec.delta0 == 9.5
        assert spec.bits_per_vector == 68

    def test_identity_row(self):
        spec = make("identity", 5)
        assert spec.r == 1.0
        assert spec.delta == 1.0
        assert spec.delta0 == 0.0
        assert spec.bits_per_vector == 5 * 64

    def test_k_larger_than_p_rejected(self):
        with pytest.raises(ValueError, match="k"):
            make("topk:9", 4)
        with pytest.raises(ValueError, match="k"):
            make("randk:9", 4)

    def test_kind_validation(self):
        with pytest.raises(ValueError):
            CompressorKind("topk")
        with pytest.raises(ValueError):
            CompressorKind("identity", k=3)
        with pytest.raises(ValueError):
            CompressorKind("quant", k=0)


class TestParseFormat:
    @pytest.mark.parametrize("text", ["identity", "quant:4", "topk:7", "randk:2", "normsign"])
    def test_round_trip(self, text):
        assert format_compressor(parse_compressor(text)) == text

    @pytest.mark.parametrize("text", ["", "gzip", "topk", "topk:x", "quant:", "randk:-1"])
    def test_rejects_malformed(self, text):
        with pytest.raises(ValueError):
            parse_compressor(text)


class TestCompressBehavior:
    def test_identity_copies(self):
        spec = make("identity", 3)
        x = np.array([1.0, -2.0, 3.0])
        out = compress(spec, x)
        assert np.array_equal(out, x)
        out[0] = 99.0
        assert x[0] == 1.0

    def test_topk_keeps_largest_magnitudes(self):
        spec = make("topk:2", 5)
        out = compress(spec, np.array([3.0, -4.0, 1.0, 0.5, 2.0]))
        assert np.array_equal(out, [3.0, -4.0, 0.0, 0.0, 0.0])

    def test_topk_tie_prefers_lower_index(self):
        spec = make("topk:1", 4)
        out = compress(spec, np.array([1.0, -2.0, 2.0, 0.0]))
        assert np.array_equal(out, [0.0, -2.0, 0.0, 0.0])

    def test_randk_keeps_exactly_k_original_entries(self):
        spec = make("randk:3", 10)
        rng = stream(5, 0, "dither")
        x = np.arange(1.0, 11.0)
        out = compress(spec, x, rng)
        kept = np.nonzero(out)[0]
        assert kept.shape[0] == 3
        assert np.array_equal(out[kept], x[kept])

    def test_randk_requires_rng(self):
        spec = make("randk:1", 4)
        with pytest.raises(ValueError, match="rng"):
            compress(spec, np.ones(4))

    def test_normsign_levels(self):
        spec = make("normsign", 4)
        out = compress(spec, np.array([0.5, -3.0, 0.0, 1.0]))
        assert np.array_equal(out, [1.5, -1.5, 0.0, 1.5])

    def test_quantizer_zero_maps_to_zero(self):
        spec = make("quant:3", 6)
        out = compress(spec, np.zeros(6), stream(0, 0, "dither"))
        assert np.array_equal(out, np.zeros(6))

    def test_quantizer_requires_rng(self):
        spec = make("quant:3", 6)
        with pytest.raises(ValueError, match="rng"):
            compress(spec, np.ones(6))

    def test_quantizer_outputs_on_grid(self):
        spec = make("quant:4", 12)
        rng = stream(9, 0, "dither")
        x = stream(9, 1, "init").standard_normal(12)
        out = compress(spec, x, rng)
        cell = np.max(np.abs(x)) / 2.0 ** (4 - 1)
        levels = out / cell
        assert np.allclose(levels, np.round(levels), atol=1e-12)

    def test_shape_mismatch_rejected(self):
        spec = make("identity", 3)
        with pytest.raises(ValueError, match="shape"):
            compress(spec, np.ones(4))


@settings(max_examples=60, deadline=None)
@given(
    x=arrays(
        np.float64,
        st.integers(min_value=1, max_value=12),
        elements=st.floats(min_value=-100, max_value=100, allow_nan=False),
    ),
    k=st.integers(min_value=1, max_value=12),
)
def test_topk_contraction_holds_pointwise(x, k):
    p = x.shape[0]
    k = min(k, p)
    spec = make(f"topk:{k}", p)
    err = compress(spec, x) - x
    lhs = float(err @ err)
    rhs = (1.0 - spec.delta) * float(x @ x)
    assert lhs <= rhs + 1e-9 * max(1.0, rhs)


@settings(max_examples=60, deadline=None)
@given(
    x=arrays(
        np.float64,
        st.integers(min_value=1, max_value=10),
        elements=st.floats(min_value=-50, max_value=50, allow_nan=False),
    )
)
def test_normsign_contraction_holds_pointwise(x):
    p = x.shape[0]
    spec = make("normsign", p)
    err = compress(spec, x) / spec.r - x
    lhs = float(err @ err)
    rhs = (1.0 - spec.delta) * float(x @ x)
    assert lhs <= rhs + 1e-9 * max(1.0, rhs)


@pytest.mark.parametrize("text,p", [("quant:2", 16), ("quant:5", 16), ("randk:4", 16)])
def test_randomized_contraction_within_monte_carlo_slack(text, p):
    spec = make(text, p)
    mean, se = contraction_estimate(spec, trials=4000, rng=stream(123, 0, "dither"))
    assert mean <= (1.0 - spec.delta) + 4.0 * se


def test_randk_mean_matches_exact_expectation():
    spec = make("randk:4", 16)
    mean, se = contraction_estimate(spec, trials=4000, rng=stream(7, 0, "dither"))
    assert abs(mean - (1.0 - 4.0 / 16.0)) <= 4.0 * se


def test_contraction_estimate_deterministic():
    spec = make("quant:3", 8)
    a = contraction_estimate(spec, trials=500, rng=stream(11, 0, "dither"))
    b = contraction_estimate(spec, trials=500, rng=stream(11, 0, "dither"))
    assert a == b
