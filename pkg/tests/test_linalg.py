"""Array validators, linear operators, transforms and image I/O."""

import math

import numpy as np
import pytest

from nfbkit.linalg import (LinearOperator, adjoint_mismatch, as_image,
                           as_matrix, as_vector, averaging_kernel,
                           blur_apply, blur_operator, discrete_divergence,
                           discrete_gradient, gaussian3_kernel,
                           gradient_operator, haar_inverse, haar_operator,
                           haar_transform, matrix_operator, op_norm_estimate,
                           read_pgm, write_pgm)


# ---------------------------------------------------------------------------
# validators
# ---------------------------------------------------------------------------

def test_as_vector_casts_and_flattens_rejections():
    v = as_vector([1, 2, 3])
    assert v.dtype == np.float64 and v.shape == (3,)
    with pytest.raises(ValueError):
        as_vector(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        as_vector(np.array([1.0, np.inf]))
    with pytest.raises(ValueError):
        as_vector(np.ones((2, 2)))


def test_as_matrix_and_image_shapes():
    m = as_matrix([[1, 2], [3, 4]])
    assert m.dtype == np.float64 and m.shape == (2, 2)
    with pytest.raises(ValueError):
        as_matrix(np.ones(3))
    img = as_image(np.zeros((4, 5)))
    assert img.shape == (4, 5)
    with pytest.raises(ValueError):
        as_image(np.zeros((2, 2, 2)))


# ---------------------------------------------------------------------------
# operators and norm estimation
# ---------------------------------------------------------------------------

def test_matrix_operator_matches_matmul():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((5, 7))
    op = matrix_operator(m)
    x = rng.standard_normal(7)
    y = rng.standard_normal(5)
    assert np.allclose(op.apply(x), m @ x, atol=1e-14)
    assert np.allclose(op.adjoint(y), m.T @ y, atol=1e-14)
    assert np.allclose(op.as_matrix(), m, atol=1e-14)


def test_op_norm_matches_svd():
    rng = np.random.default_rng(11)
    for trial in range(20):
        rows, cols = rng.integers(3, 40, size=2)
        m = rng.standard_normal((rows, cols))
        true = np.linalg.svd(m, compute_uv=False)[0]
        est = op_norm_estimate(matrix_operator(m), seed=trial)
        assert abs(est - true) <= 1e-6 * true
        # the Rayleigh estimate never overshoots the true norm
        assert est <= true * (1.0 + 1e-12)


def test_op_norm_monotone_in_iterations():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((12, 12))
    op = matrix_operator(m)
    estimates = [op_norm_estimate(op, iters=k, tol=0.0, seed=9)
                 for k in (1, 2, 4, 8, 16, 64)]
    diffs = np.diff(estimates)
    assert np.all(diffs >= -1e-12)


def test_op_norm_deterministic_and_info():
    m = np.diag([3.0, 1.0, 0.5])
    a = op_norm_estimate(matrix_operator(m), seed=5)
    b = op_norm_estimate(matrix_operator(m), seed=5)
    assert a == b
    val, info = op_norm_estimate(matrix_operator(m), return_info=True)
    assert abs(val - 3.0) < 1e-9
    assert info["converged"] and info["iterations"] >= 1


def test_adjoint_mismatch_flags_broken_adjoint():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((6, 6))
    good = matrix_operator(m)
    assert adjoint_mismatch(good) < 1e-10
    bad = LinearOperator(6, 6, lambda x: m @ x, lambda y: m @ y)
    assert adjoint_mismatch(bad) > 1e-2


# ---------------------------------------------------------------------------
# discrete gradient / divergence
# ---------------------------------------------------------------------------

def test_gradient_small_example():
    img = np.array([[0.0, 1.0], [0.0, 1.0]])
    g = discrete_gradient(img)
    assert g.shape == (2, 2, 2)
    # horizontal forward differences, last column zero
    assert np.array_equal(g[0], [[1.0, 0.0], [1.0, 0.0]])
    # vertical differences vanish on this image
    assert np.array_equal(g[1], np.zeros((2, 2)))


def test_gradient_divergence_negative_adjoint():
    rng = np.random.default_rng(21)
    for shape in ((4, 4), (5, 7), (8, 3)):
        x = rng.standard_normal(shape)
        y = rng.standard_normal((2,) + shape)
        lhs = float(np.sum(discrete_gradient(x) * y))
        rhs = -float(np.sum(x * discrete_divergence(y)))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_gradient_operator_norm():
    op = gradient_operator((16, 16))
    assert op.norm_bound == pytest.approx(math.sqrt(8.0), abs=1e-15)
    est = op_norm_estimate(op, iters=2000, seed=1)
    assert est <= op.norm_bound + 1e-9
    assert est > 2.5  # the bound is nearly attained on a 16x16 grid
    assert adjoint_mismatch(op) < 1e-10


# ---------------------------------------------------------------------------
# Haar transform
# ---------------------------------------------------------------------------

def test_haar_roundtrip_and_orthogonality():
    rng = np.random.default_rng(8)
    for n, level in ((8, 1), (8, 3), (16, 2), (16, 4)):
        x = rng.standard_normal((n, n))
        y = rng.standard_normal((n, n))
        wx, wy = haar_transform(x, level), haar_transform(y, level)
        assert np.abs(haar_inverse(wx, level) - x).max() < 1e-12
        # orthogonality: inner products are preserved
        assert float(np.sum(wx * wy)) == pytest.approx(
            float(np.sum(x * y)), rel=1e-12)


def test_haar_constant_image_concentrates():
    img = np.full((8, 8), 2.0)
    w = haar_transform(img, 3)
    assert w[0, 0] == pytest.approx(16.0, abs=1e-12)
    w[0, 0] = 0.0
    assert np.abs(w).max() < 1e-12


def test_haar_operator_matrix_is_orthonormal():
    op = haar_operator((8, 8), 3)
    q = op.as_matrix()
    assert np.abs(q.T @ q - np.eye(64)).max() < 1e-12
    assert op.norm_bound == 1.0
    assert adjoint_mismatch(op) < 1e-10


def test_haar_validates_level_and_size():
    with pytest.raises(ValueError):
        haar_transform(np.zeros((8, 8)), 4)  # 8 / 2**4 < 1
    with pytest.raises(ValueError):
        haar_transform(np.zeros((6, 6)), 2)  # 6 not divisible by 4
    with pytest.raises(ValueError):
        haar_transform(np.zeros((8, 8)), 0)


# ---------------------------------------------------------------------------
# blur
# ---------------------------------------------------------------------------

def _reflect_correlate(img, kernel):
    """Independent route: explicit symmetric padding + sliding window."""
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(img, ((ph, ph), (pw, pw)), mode="symmetric")
    out = np.zeros_like(img)
    for i in range(img.shape[0]):
        for j in range(img.shape[1]):
            out[i, j] = np.sum(padded[i:i + kh, j:j + kw] * kernel)
    return out


def test_blur_matches_symmetric_padding_oracle():
    rng = np.random.default_rng(14)
    img = rng.uniform(0.0, 1.0, (9, 7))
    for kernel in (averaging_kernel(3), gaussian3_kernel(0.5),
                   averaging_kernel(5)):
        assert np.abs(blur_apply(img, kernel)
                      - _reflect_correlate(img, kernel)).max() < 1e-13


def test_blur_preserves_constants():
    img = np.full((6, 6), 0.37)
    out = blur_apply(img, averaging_kernel(3))
    assert np.abs(out - 0.37).max() < 1e-14


def test_blur_operator_self_adjoint_unit_norm():
    op = blur_operator((32, 32), averaging_kernel(3), norm_bound=1.0)
    assert adjoint_mismatch(op) < 1e-10
    est = op_norm_estimate(op, iters=3000, seed=0)
    assert abs(est - 1.0) < 1e-6


def test_blur_operator_rejects_bad_kernels():
    with pytest.raises(ValueError):
        blur_operator((8, 8), np.ones((2, 2)) / 4.0)  # even size
    asym = np.zeros((3, 3))
    asym[0, 0] = 1.0
    with pytest.raises(ValueError):
        blur_operator((8, 8), asym)  # not centrosymmetric


def test_averaging_kernel_values():
    k = averaging_kernel(3)
    assert k.shape == (3, 3)
    assert np.abs(k - 1.0 / 9.0).max() < 1e-15
    assert averaging_kernel(9).sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        averaging_kernel(4)


def test_gaussian3_kernel_values():
    k = gaussian3_kernel(0.5)
    # independent normalization oracle
    ref = np.array([[math.exp(-(i * i + j * j) / (2 * 0.25))
                     for j in (-1, 0, 1)] for i in (-1, 0, 1)])
    ref /= ref.sum()
    assert np.abs(k - ref).max() < 1e-12
    assert k.sum() == pytest.approx(1.0, abs=1e-12)
    assert k[1, 1] == pytest.approx(0.6193470305571772, abs=1e-12)


# ---------------------------------------------------------------------------
# PGM I/O
# ---------------------------------------------------------------------------

def test_pgm_roundtrip_binary_and_ascii(tmp_path):
    rng = np.random.default_rng(30)
    img = rng.uniform(0.0, 1.0, (12, 17))
    for binary in (True, False):
        path = tmp_path / f"im_{binary}.pgm"
        write_pgm(path, img, binary=binary)
        back = read_pgm(path)
        assert back.shape == img.shape
        # 16-bit quantization error bound
        assert np.abs(back - img).max() <= 0.5 / 65535 + 1e-12


def test_pgm_binary_layout(tmp_path):
    path = tmp_path / "two.pgm"
    write_pgm(path, np.array([[0.0, 1.0]]), binary=True)
    blob = path.read_bytes()
    assert blob.startswith(b"P5")
    assert b"65535" in blob
    assert blob.endswith(b"\x00\x00\xff\xff")  # big-endian 16-bit samples


def test_pgm_reader_skips_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_text("P2\n# a comment\n2 1\n# another\n65535\n0 65535\n")
    img = read_pgm(path)
    assert img.shape == (1, 2)
    assert img[0, 0] == 0.0 and img[0, 1] == 1.0


def test_pgm_clips_out_of_range(tmp_path):
    path = tmp_path / "clip.pgm"
    write_pgm(path, np.array([[-0.2, 1.5]]))
    img = read_pgm(path)
    assert img[0, 0] == 0.0 and img[0, 1] == 1.0
