import numpy as np
import pytest

from falcontk import _kernels
from falcontk.conv import (
    MacCounter, conv2d_depthwise, conv2d_group, conv2d_pointwise, conv2d_standard, output_dims,
)
from falcontk.errors import GeometryError, ShapeError
from falcontk.falcon import dpconv_forward
from falcontk.gep import DpconvFactors, gep_dpconv, gep_group
from falcontk.tensor import ConvDims
from conftest import relerr
from oracles import conv_loop, depthwise_loop, pointwise_loop


@pytest.mark.parametrize("H, D, s, p, expected", [
    (32, 3, 1, 1, (32, 32)),
    (224, 7, 2, 3, (112, 112)),
    (1, 1, 1, 0, (1, 1)),
])
def test_output_dims(H, D, s, p, expected):
    assert output_dims(ConvDims(D=D, M=1, N=1, H=H, W=H, s=s, p=p)) == expected


class TestStandard:
    def test_scalar(self):
        out = conv2d_standard(np.full((1, 1, 1), 3.0), np.full((1, 1, 1, 1), 2.0))
        assert out.shape == (1, 1, 1) and out[0, 0, 0] == 6.0

    def test_counting_taps(self):
        out = conv2d_standard(np.ones((3, 3, 1)), np.ones((2, 2, 1, 1)))
        assert out.shape == (2, 2, 1) and np.all(out == 4.0)

    @pytest.mark.parametrize("s, p", [(2, 1), (1, 0), (1, 2), (3, 1)])
    def test_loop_oracle(self, rng, s, p):
        I = rng.standard_normal((5, 5, 3))
        K = rng.standard_normal((3, 3, 3, 2))
        assert relerr(conv2d_standard(I, K, s, p), conv_loop(I, K, s, p)) <= 1e-12

    def test_padding_is_zero(self):
        # corner output with p=1 only sees the 2x2 in-range taps
        K = np.zeros((3, 3, 1, 1))
        K[0, 0, 0, 0] = 1.0
        I = np.arange(1.0, 10.0).reshape(3, 3, 1)
        out = conv2d_standard(I, K, 1, 1)
        assert out[0, 0, 0] == 0.0 and out[1, 1, 0] == 1.0 and out[2, 2, 0] == 5.0

    def test_linearity(self, rng):
        I1, I2 = rng.standard_normal((6, 6, 3)), rng.standard_normal((6, 6, 3))
        K = rng.standard_normal((3, 3, 3, 4))
        lhs = conv2d_standard(2.5 * I1 - 1.5 * I2, K, 2, 1)
        rhs = 2.5 * conv2d_standard(I1, K, 2, 1) - 1.5 * conv2d_standard(I2, K, 2, 1)
        assert relerr(lhs, rhs) <= 1e-10

    def test_errors(self):
        with pytest.raises(ShapeError):
            conv2d_standard(np.ones((3, 3, 2)), np.ones((1, 1, 3, 1)))
        with pytest.raises(GeometryError):
            conv2d_standard(np.ones((2, 2, 1)), np.ones((5, 5, 1, 1)))

    def test_counter(self, rng):
        c = MacCounter()
        conv2d_standard(rng.standard_normal((7, 5, 3)), rng.standard_normal((3, 3, 3, 2)), 2, 1, c)
        assert c.count == 4 * 3 * 9 * 3 * 2


class TestDepthwise:
    def test_identity_filter(self, rng):
        I = rng.standard_normal((4, 5, 3))
        assert np.array_equal(conv2d_depthwise(I, np.ones((1, 1, 3))), I)

    def test_single_channel_collapse(self, rng):
        I, Dk = rng.standard_normal((6, 6, 1)), rng.standard_normal((3, 3, 1))
        assert np.array_equal(conv2d_depthwise(I, Dk, 2, 1), conv2d_standard(I, Dk.reshape(3, 3, 1, 1), 2, 1))

    def test_loop_oracle(self, rng):
        I, Dk = rng.standard_normal((4, 4, 3)), rng.standard_normal((3, 3, 3))
        assert relerr(conv2d_depthwise(I, Dk, 1, 1), depthwise_loop(I, Dk, 1, 1)) <= 1e-12


class TestPointwise:
    def test_identity(self, rng):
        I = rng.standard_normal((3, 4, 5))
        assert np.array_equal(conv2d_pointwise(I, np.eye(5)), I)

    def test_channel_sum(self, rng):
        I = rng.standard_normal((3, 3, 2))
        out = conv2d_pointwise(I, np.ones((2, 1)))
        assert np.array_equal(out[:, :, 0], I[:, :, 0] + I[:, :, 1])

    def test_loop_oracle(self, rng):
        I, P = rng.standard_normal((3, 3, 4)), rng.standard_normal((4, 2))
        assert relerr(conv2d_pointwise(I, P), pointwise_loop(I, P)) <= 1e-12

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            conv2d_pointwise(np.ones((2, 2, 3)), np.ones((2, 2)))


class TestGroup:
    def test_g1(self, rng):
        I, K = rng.standard_normal((5, 5, 4)), rng.standard_normal((3, 3, 4, 2))
        assert np.array_equal(conv2d_group(I, [K], 1, 1), conv2d_standard(I, K, 1, 1))

    def test_diagonal_scaling(self, rng):
        I = rng.standard_normal((3, 3, 4))
        c = [2.0, -1.0, 0.5, 3.0]
        out = conv2d_group(I, [np.full((1, 1, 1, 1), v) for v in c])
        for l in range(4):
            assert np.array_equal(out[:, :, l], c[l] * I[:, :, l])

    def test_per_group_oracle(self, rng):
        I = rng.standard_normal((5, 5, 4))
        Ks = [rng.standard_normal((3, 3, 2, 2)) for _ in range(2)]
        expected = np.concatenate([conv_loop(I[:, :, 2 * l:2 * l + 2], Ks[l], 1, 1) for l in range(2)], axis=2)
        assert relerr(conv2d_group(I, Ks, 1, 1), expected) <= 1e-12

    def test_divisibility(self):
        with pytest.raises(ShapeError):
            conv2d_group(np.ones((3, 3, 5)), [np.ones((1, 1, 2, 1))] * 2)

    def test_group_gep_identity(self, rng):
        I = rng.standard_normal((6, 6, 4))
        Ds = [rng.standard_normal((3, 3, 2)) for _ in range(2)]
        Ps = [rng.standard_normal((2, 3)) for _ in range(2)]
        out = conv2d_group(I, gep_group(Ds, Ps, 2), 2, 1)
        parts = [dpconv_forward(I[:, :, 2 * l:2 * l + 2], DpconvFactors(Ds[l], Ps[l]), 2, 1) for l in range(2)]
        assert relerr(out, np.concatenate(parts, axis=2)) <= 1e-10


@pytest.mark.parametrize("s", [1, 2])
@pytest.mark.parametrize("p", [0, 1])
def test_dpconv_kernel_identity(rng, s, p):
    I = rng.standard_normal((7, 6, 3))
    f = DpconvFactors(rng.standard_normal((3, 3, 3)), rng.standard_normal((3, 4)))
    ref = conv2d_standard(I, gep_dpconv(f), s, p)
    assert relerr(dpconv_forward(I, f, s, p), ref) <= 1e-10


@pytest.mark.skipif(_kernels.compiled is None, reason="compiled kernels not built")
@pytest.mark.parametrize("s, p", [(1, 0), (1, 1), (2, 1), (3, 2)])
def test_backends_bit_identical(rng, s, p):
    I = rng.standard_normal((9, 8, 5))
    K = rng.standard_normal((3, 3, 5, 4))
    Dk = rng.standard_normal((3, 3, 5))
    P = rng.standard_normal((5, 6))
    Ho, Wo = (9 + 2 * p - 3) // s + 1, (8 + 2 * p - 3) // s + 1
    for name, args in [("conv2d", (I, K, s, p, Ho, Wo)), ("depthwise", (I, Dk, s, p, Ho, Wo)),
                       ("pointwise", (I, P))]:
        a, ma = getattr(_kernels.compiled, name)(*args)
        b, mb = getattr(_kernels.python, name)(*args)
        assert np.array_equal(a, b) and ma == mb
