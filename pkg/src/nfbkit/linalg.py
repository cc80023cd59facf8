r"""Dense linear algebra helpers shared by the splitting kernels.

Everything in here is deliberately matrix-free where it matters: the image
operators (gradient, Haar transform, blur) are exposed both as plain
functions acting on 2-D arrays and as :class:`LinearOperator` instances
acting on flattened vectors, which is the form the iteration kernels
consume.  Conventions:

* vectors are 1-D float64 arrays, matrices 2-D, images 2-D in ``[0, 1]``
  (only enforced where a contract needs it);
* the discrete gradient uses forward differences with replicated last
  row/column (Neumann boundary), and ``discrete_divergence`` is its
  negative adjoint: ``<grad x, y> == -<x, div y>`` exactly;
* the Haar transform is the orthonormal multilevel decomposition, so its
  inverse and its adjoint coincide;
* blurring is correlation with half-sample symmetric boundary handling,
  which is self-adjoint for centrosymmetric kernels and has unit spectral
  norm for normalized averaging/Gaussian kernels.
"""

import numpy as np
from scipy import ndimage

__all__ = [
    "as_vector", "as_matrix", "as_image", "LinearOperator",
    "matrix_operator", "op_norm_estimate", "adjoint_mismatch",
    "discrete_gradient", "discrete_divergence", "gradient_operator",
    "haar_transform", "haar_inverse", "haar_operator",
    "blur_apply", "blur_operator", "averaging_kernel", "gaussian3_kernel",
    "write_pgm", "read_pgm",
]

_SQRT2 = np.sqrt(2.0)


def as_vector(x):
    """Return ``x`` as a finite 1-D float64 array (raises on anything else)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return v


def as_matrix(m):
    """Return ``m`` as a finite 2-D float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def as_image(im):
    """Return ``im`` as a finite 2-D float64 array (grayscale image)."""
    return as_matrix(im)


class LinearOperator:
    """A linear map between flat vectors with an explicit adjoint.

    Parameters
    ----------
    dim_out, dim_in : int
        Sizes of the output and input vectors.
    apply, adjoint : callable
        ``apply(x)`` evaluates the map on a 1-D array of length
        ``dim_in``; ``adjoint(y)`` evaluates the adjoint on a 1-D array
        of length ``dim_out``.
    norm_bound : float, optional
        A known upper bound on the spectral norm (used by callers that
        need a certified constant rather than an estimate).
    name : str, optional
        Label used in diagnostics.
    """

    def __init__(self, dim_out, dim_in, apply, adjoint, norm_bound=None,
                 name=""):
        self.dim_out = int(dim_out)
        self.dim_in = int(dim_in)
        self._apply = apply
        self._adjoint = adjoint
        self.norm_bound = None if norm_bound is None else float(norm_bound)
        self.name = name

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim_in,):
            raise ValueError(
                f"operator {self.name or '<anon>'} expects input of length "
                f"{self.dim_in}, got shape {x.shape}")
        return self._apply(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.dim_out,):
            raise ValueError(
                f"adjoint of {self.name or '<anon>'} expects input of length "
                f"{self.dim_out}, got shape {y.shape}")
        return self._adjoint(y)

    def __call__(self, x):
        return self.apply(x)

    def as_matrix(self):
        """Materialize the dense matrix (small problems / test oracles only)."""
        cols = [self.apply(e) for e in np.eye(self.dim_in)]
        return np.stack(cols, axis=1)


def matrix_operator(m, name="", norm_bound=None):
    """Wrap a dense matrix as a :class:`LinearOperator`."""
    m = as_matrix(m)
    return LinearOperator(m.shape[0], m.shape[1],
                          lambda x: m @ x, lambda y: m.T @ y,
                          norm_bound=norm_bound, name=name)


def op_norm_estimate(op, iters=500, seed=0, tol=1e-10, return_info=False):
    """Estimate the spectral norm of ``op`` by power iteration on A*A.

    The returned value is the Rayleigh-quotient estimate
    ``||A v_k|| / ||v_k||``, which is nondecreasing in the iteration
    count for a fixed seed, so a larger ``iters`` never reports a
    smaller norm.  Iteration stops early once the relative change of
    the estimate drops below ``tol``.

    Parameters
    ----------
    op : LinearOperator
    iters : int
        Maximum number of power steps.
    seed : int
        Seed for the random start vector.
    tol : float
        Relative-change stopping threshold.
    return_info : bool
        If True, also return a dict with ``iterations`` and
        ``converged`` (False means the iteration cap was hit first).

    Returns
    -------
    float, or (float, dict) when ``return_info`` is set.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dim_in)
    nv = np.linalg.norm(v)
    if nv == 0.0:  # cannot happen with a Gaussian draw, but be safe
        v = np.ones(op.dim_in)
        nv = np.linalg.norm(v)
    v /= nv

    est = 0.0
    converged = False
    k = 0
    for k in range(1, iters + 1):
        w = op.apply(v)
        new_est = np.linalg.norm(w)  # ||A v|| with ||v|| = 1
        if new_est == 0.0:
            est = 0.0
            converged = True
            break
        if abs(new_est - est) <= tol * new_est:
            est = new_est
            converged = True
            break
        est = new_est
        v = op.adjoint(w)
        v /= np.linalg.norm(v)
    info = {"iterations": k, "converged": converged}
    return (est, info) if return_info else est


def adjoint_mismatch(op, n_pairs=20, seed=0):
    """Max of ``|<A v, w> - <v, A* w>|`` over random unit pairs.

    Used throughout the tests to certify that an operator's adjoint
    actually is its adjoint.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        v = rng.standard_normal(op.dim_in)
        w = rng.standard_normal(op.dim_out)
        v /= np.linalg.norm(v)
        w /= np.linalg.norm(w)
        worst = max(worst, abs(np.dot(op.apply(v), w)
                               - np.dot(v, op.adjoint(w))))
    return worst


# ---------------------------------------------------------------------------
# discrete gradient / divergence
# ---------------------------------------------------------------------------

def discrete_gradient(img):
    """Forward-difference gradient of a 2-D image.

    Returns an array of shape ``(2, H, W)``: component 0 holds the
    horizontal differences ``x[i, j+1] - x[i, j]`` (last column zero),
    component 1 the vertical differences (last row zero).  The spectral
    norm of the operator satisfies ``||grad||^2 <= 8``.
    """
    x = as_image(img)
    g = np.zeros((2,) + x.shape)
    g[0][:, :-1] = x[:, 1:] - x[:, :-1]
    g[1][:-1, :] = x[1:, :] - x[:-1, :]
    return g


def discrete_divergence(field):
    """Negative adjoint of :func:`discrete_gradient`.

    ``<grad x, y> == -<x, div y>`` holds exactly for all ``x`` and pair
    fields ``y`` of shape ``(2, H, W)``.
    """
    y = np.asarray(field, dtype=np.float64)
    if y.ndim != 3 or y.shape[0] != 2:
        raise ValueError(f"expected a (2, H, W) pair field, got {y.shape}")
    gh, gv = y[0], y[1]
    div = np.zeros(gh.shape)
    # horizontal part: transpose of the forward difference along axis 1
    div[:, 0] += gh[:, 0]
    div[:, 1:-1] += gh[:, 1:-1] - gh[:, :-2]
    div[:, -1] -= gh[:, -2]
    # vertical part
    div[0, :] += gv[0, :]
    div[1:-1, :] += gv[1:-1, :] - gv[:-2, :]
    div[-1, :] -= gv[-2, :]
    return div


def gradient_operator(shape):
    """:class:`LinearOperator` form of the discrete gradient on flat vectors.

    Input length ``H*W``, output length ``2*H*W`` (horizontal field then
    vertical field).  ``norm_bound`` is the classical ``sqrt(8)``.
    """
    h, w = int(shape[0]), int(shape[1])
    n = h * w

    def apply(x):
        return discrete_gradient(x.reshape(h, w)).ravel()

    def adjoint(y):
        return -discrete_divergence(y.reshape(2, h, w)).ravel()

    return LinearOperator(2 * n, n, apply, adjoint,
                          norm_bound=np.sqrt(8.0), name="grad")


# ---------------------------------------------------------------------------
# orthonormal Haar wavelet transform
# ---------------------------------------------------------------------------

def _haar_rows(block):
    # one orthonormal analysis step along the last axis
    s = (block[..., 0::2] + block[..., 1::2]) / _SQRT2
    d = (block[..., 0::2] - block[..., 1::2]) / _SQRT2
    return np.concatenate([s, d], axis=-1)


def _haar_rows_inv(block):
    n = block.shape[-1] // 2
    s, d = block[..., :n], block[..., n:]
    out = np.empty_like(block)
    out[..., 0::2] = (s + d) / _SQRT2
    out[..., 1::2] = (s - d) / _SQRT2
    return out


def _check_haar_shape(shape, level):
    h, w = shape
    if level < 1:
        raise ValueError("level must be >= 1")
    f = 2 ** level
    if h % f or w % f:
        raise ValueError(
            f"image shape {shape} not divisible by 2**level = {f}")


def haar_transform(img, level):
    """Orthonormal multilevel 2-D Haar analysis.

    Coefficients are laid out in the usual Mallat arrangement with the
    coarse approximation in the top-left ``(H/2^level, W/2^level)``
    corner.  The transform is orthogonal: it preserves the Euclidean
    norm and its inverse equals its adjoint.  An ``n x n`` constant
    image ``c`` at full depth ends up as a single scaling coefficient
    ``n * c``.
    """
    x = as_image(img).copy()
    _check_haar_shape(x.shape, level)
    h, w = x.shape
    for _ in range(level):
        block = x[:h, :w]
        block = _haar_rows(block)
        block = _haar_rows(block.T).T
        x[:h, :w] = block
        h //= 2
        w //= 2
    return x


def haar_inverse(coeffs, level):
    """Inverse (= adjoint) of :func:`haar_transform`."""
    x = as_image(coeffs).copy()
    _check_haar_shape(x.shape, level)
    full_h, full_w = x.shape
    sizes = [(full_h >> k, full_w >> k) for k in range(level)]
    for h, w in reversed(sizes):
        block = x[:h, :w]
        block = _haar_rows_inv(block.T).T
        block = _haar_rows_inv(block)
        x[:h, :w] = block
    return x


def haar_operator(shape, level):
    """Flat-vector :class:`LinearOperator` for the orthonormal Haar transform.

    Orthogonality gives ``norm_bound = 1`` and ``adjoint == inverse``.
    """
    h, w = int(shape[0]), int(shape[1])
    _check_haar_shape((h, w), level)
    n = h * w

    def apply(x):
        return haar_transform(x.reshape(h, w), level).ravel()

    def adjoint(y):
        return haar_inverse(y.reshape(h, w), level).ravel()

    return LinearOperator(n, n, apply, adjoint, norm_bound=1.0, name="haar")


# ---------------------------------------------------------------------------
# blur
# ---------------------------------------------------------------------------

def blur_apply(img, kernel):
    """Correlate ``img`` with ``kernel`` using symmetric boundary handling.

    The boundary rule replicates then mirrors the image across each edge
    (half-sample symmetry), which keeps constants invariant: a constant
    image times a kernel summing to one comes back unchanged.  Kernels
    must be odd-sized in both dimensions.
    """
    x = as_image(img)
    k = as_matrix(kernel)
    if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ValueError(f"kernel must be odd-sized, got {k.shape}")
    return ndimage.correlate(x, k, mode="reflect")


def blur_operator(shape, kernel, norm_bound=None):
    """Self-adjoint blur :class:`LinearOperator` on flat vectors.

    Restricted to centrosymmetric kernels (``k == flip(k)``), for which
    correlation with symmetric boundaries is its own adjoint; anything
    else is rejected.  For normalized averaging/Gaussian kernels the
    spectral norm is 1, which callers may pass as ``norm_bound``.
    """
    k = as_matrix(kernel)
    if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ValueError(f"kernel must be odd-sized, got {k.shape}")
    if not np.allclose(k, k[::-1, ::-1], atol=1e-14):
        raise ValueError("blur_operator requires a centrosymmetric kernel")
    h, w = int(shape[0]), int(shape[1])
    n = h * w

    def apply(x):
        return blur_apply(x.reshape(h, w), k).ravel()

    return LinearOperator(n, n, apply, apply, norm_bound=norm_bound,
                          name="blur")


def averaging_kernel(size):
    """Normalized ``size x size`` averaging kernel (``size`` odd)."""
    size = int(size)
    if size % 2 == 0 or size < 1:
        raise ValueError("averaging kernel size must be odd and positive")
    return np.full((size, size), 1.0 / (size * size))


def gaussian3_kernel(sigma=0.5):
    """Normalized 3x3 Gaussian kernel sampled on the integer grid."""
    r = np.arange(-1, 2, dtype=np.float64)
    xx, yy = np.meshgrid(r, r)
    k = np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2))
    return k / k.sum()


# ---------------------------------------------------------------------------
# PGM image files
# ---------------------------------------------------------------------------

_PGM_MAXVAL = 65535


def write_pgm(path, img, binary=True):
    """Write a ``[0, 1]`` image as a 16-bit PGM file (P5, or P2 if ASCII).

    Values are clipped to ``[0, 1]`` and scaled to the 16-bit range, so
    a write/read round trip loses at most half a quantization step.
    """
    x = np.clip(as_image(img), 0.0, 1.0)
    q = np.rint(x * _PGM_MAXVAL).astype(np.uint16)
    h, w = q.shape
    if binary:
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n{_PGM_MAXVAL}\n".encode("ascii"))
            f.write(q.astype(">u2").tobytes())
    else:
        with open(path, "w") as f:
            f.write(f"P2\n{w} {h}\n{_PGM_MAXVAL}\n")
            for row in q:
                f.write(" ".join(str(v) for v in row) + "\n")


def _pgm_tokens(data):
    # yields whitespace-separated header tokens, skipping '#' comments
    i = 0
    while True:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i < len(data) and data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i:i + 1].isspace():
            i += 1
        yield data[start:i], i


def read_pgm(path):
    """Read a P2/P5 PGM file and rescale it to a float image in ``[0, 1]``."""
    with open(path, "rb") as f:
        data = f.read()
    toks = _pgm_tokens(data)
    magic, _ = next(toks)
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"not a PGM file: magic {magic!r}")
    (wtok, _), (htok, _), (mtok, pos) = next(toks), next(toks), next(toks)
    w, h, maxval = int(wtok), int(htok), int(mtok)
    if maxval <= 0:
        raise ValueError("PGM maxval must be positive")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        raw = np.frombuffer(data, dtype=dtype, count=h * w, offset=pos)
    else:
        raw = np.array(data[pos:].split(), dtype=np.float64)
        if raw.size != h * w:
            raise ValueError("P2 payload size mismatch")
    return raw.reshape(h, w).astype(np.float64) / maxval
