import numpy as np
import pytest

from tsgpt.bench import (
    BenchResult,
    attention_flops,
    dominant_term,
    ffn_flops,
    fit_loglog_slope,
    layer_flops,
    run_bench,
    softmax_attention,
    time_mechanism,
)
from tsgpt.errors import UsageError
from tsgpt.retention import DecayMask, retention_parallel
from tsgpt.tensor import Rng, Tensor


def test_flop_model_formulas():
    n, h, d = 100, 4, 32
    assert attention_flops(n, h, d) == 4 * n * h * h * d * d + 2 * n * n * h * d
    assert ffn_flops(n, h, d) == 8 * n * h * h * d * d
    assert layer_flops(n, h, d) == 12 * n * h * h * d * d + 2 * n * n * h * d


def test_flop_boundaries_exact():
    for h, d in ((1, 8), (2, 16), (8, 64), (8, 512 // 8)):
        n = 2 * h * d
        # attention's linear and quadratic terms tie
        assert 4 * n * h * h * d * d == 2 * n * n * h * d
        n = 6 * h * d
        # the quadratic term equals the full linear part
        assert 2 * n * n * h * d == 12 * n * h * h * d * d


def test_three_regime_rule():
    h, d = 8, 64  # hd = 512, crossover at 3072 per the complexity analysis
    assert dominant_term(2 * h * d, h, d) == "feed-forward"
    assert dominant_term(4 * h * d, h, d) == "linear"
    assert dominant_term(6 * h * d + 1, h, d) == "quadratic"
    assert dominant_term(3072 + 1, h, d) == "quadratic"


def test_slope_fit_recovers_known_exponents():
    lengths = np.array([128, 256, 512, 1024, 2048])
    for p in (1.0, 2.0):
        t = 1e-6 * lengths.astype(float) ** p
        assert abs(fit_loglog_slope(lengths, t) - p) < 1e-9


def test_slope_fit_needs_four_points():
    with pytest.raises(UsageError):
        fit_loglog_slope([10, 100, 1000], [1, 2, 3])


def test_run_bench_validations():
    with pytest.raises(UsageError):
        run_bench([64, 128, 256], ["parallel"])  # too few lengths
    with pytest.raises(UsageError):
        run_bench([64, 128, 256, 257], ["parallel"])  # span < 8x
    with pytest.raises(UsageError):
        time_mechanism("parallel", 64, repetitions=3)
    with pytest.raises(UsageError):
        time_mechanism("quantum", 64)


def test_time_mechanism_returns_sane_result():
    r = time_mechanism("chunkwise", 64, heads=1, d=8, repetitions=5)
    assert isinstance(r, BenchResult)
    assert r.median_seconds > 0
    assert r.model_flops == layer_flops(64, 1, 8)


def test_softmax_attention_stub_is_causal_and_normalized():
    rng = Rng(3)
    q, k, v = rng.normal((1, 6, 4)), rng.normal((1, 6, 4)), rng.normal((1, 6, 4))
    out = softmax_attention(q, k, v)
    assert out.shape == (1, 6, 4)
    # position 0 attends only to itself
    np.testing.assert_allclose(out[0, 0], v[0, 0], atol=1e-12)
    kp, vp = k.copy(), v.copy()
    kp[0, 4:] += 3.0
    vp[0, 4:] -= 1.0
    out2 = softmax_attention(q, kp, vp)
    np.testing.assert_array_equal(out[0, :4], out2[0, :4])


def test_parallel_retention_and_attention_comparable_shapes():
    rng = Rng(4)
    q, k, v = rng.normal((2, 10, 4)), rng.normal((2, 10, 4)), rng.normal((2, 10, 4))
    ret = retention_parallel(Tensor(q), Tensor(k), Tensor(v), DecayMask.build(0.9, length=10))
    att = softmax_attention(q, k, v)
    assert ret.shape == att.shape
