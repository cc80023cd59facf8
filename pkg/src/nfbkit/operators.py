r"""Resolvents, smooth maps and the split-problem container.

The solvers in :mod:`nfbkit.methods` consume a :class:`SplitProblem`
describing the inclusion

    0 in A x + D x + C x + L* B (L x)

with ``A`` maximally monotone (given through its resolvent), ``C``
cocoercive with modulus ``beta``, ``D`` monotone and ``zeta``-Lipschitz,
``B`` maximally monotone (given through the resolvent of ``sigma B``)
and ``L`` a bounded linear coupling.  Terms that a problem does not have
are *structurally absent* (``None``), never zero-valued closures — the
kernels dispatch on that structure, which is what makes the
specialization collapses exact.

Resolvent handles follow the convention ``res(point, step)`` evaluates
``J_{step*A}(point)``; smooth-map handles are plain callables carrying
their modulus (cocoercivity ``beta``) or Lipschitz constant ``zeta``.
"""

import numpy as np

from .linalg import LinearOperator, as_matrix

__all__ = [
    "Resolvent", "SmoothMap", "SplitProblem",
    "project_box", "project_nonneg", "soft_threshold",
    "box_resolvent", "nonneg_resolvent", "l1_resolvent", "zero_resolvent",
    "resolvent_of_inverse", "inverse_resolvent",
    "huber_value", "huber_gradient", "huber_composite_map",
    "least_squares_gradient", "skew_constraint_map",
    "firm_nonexpansive_violation",
]


class Resolvent:
    """Wrapper for a resolvent map ``(point, step) -> J_{step*A}(point)``.

    Any instance is expected to be firmly nonexpansive in ``point`` for
    each fixed ``step > 0``; the tests sample that property for every
    handle constructed here.
    """

    def __init__(self, fn, name=""):
        self._fn = fn
        self.name = name

    def __call__(self, point, step):
        if step <= 0:
            raise ValueError(f"resolvent step must be positive, got {step}")
        return self._fn(np.asarray(point, dtype=np.float64), float(step))


class SmoothMap:
    """A single-valued map with a known modulus.

    ``kind`` is ``"cocoercive"`` (``constant`` is the cocoercivity
    modulus ``beta``) or ``"lipschitz"`` (``constant`` is the Lipschitz
    constant ``zeta``).
    """

    def __init__(self, fn, constant, kind, name=""):
        if kind not in ("cocoercive", "lipschitz"):
            raise ValueError(f"unknown smooth-map kind {kind!r}")
        if not constant > 0:
            raise ValueError("smooth-map constant must be positive")
        self._fn = fn
        self.constant = float(constant)
        self.kind = kind
        self.name = name

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# elementary proximal maps
# ---------------------------------------------------------------------------

def project_box(x, lo=0.0, hi=1.0):
    """Componentwise projection onto ``[lo, hi]``."""
    if lo > hi:
        raise ValueError(f"empty box: lo={lo} > hi={hi}")
    return np.clip(x, lo, hi)


def project_nonneg(x):
    """Projection onto the nonnegative orthant."""
    return np.maximum(x, 0.0)


def soft_threshold(x, t):
    """Soft thresholding, the proximal map of ``t * ||.||_1``."""
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def box_resolvent(lo=0.0, hi=1.0):
    """Resolvent of the normal cone of a box (step-independent)."""
    if not lo < hi:
        raise ValueError(f"empty box: lo={lo} must be < hi={hi}")
    return Resolvent(lambda x, s: project_box(x, lo, hi), name="box")


def nonneg_resolvent():
    """Resolvent of the normal cone of the nonnegative orthant."""
    return Resolvent(lambda x, s: project_nonneg(x), name="nonneg")


def l1_resolvent(weight):
    """Resolvent of ``weight * ||.||_1`` (soft threshold at ``weight*step``)."""
    if weight < 0:
        raise ValueError("l1 weight must be nonnegative")
    return Resolvent(lambda x, s: soft_threshold(x, weight * s), name="l1")


def zero_resolvent():
    """Resolvent of the zero operator: the identity for every step."""
    return Resolvent(lambda x, s: x, name="zero")


# ---------------------------------------------------------------------------
# resolvent of an inverse operator
# ---------------------------------------------------------------------------

def resolvent_of_inverse(res, point, sigma):
    """Evaluate ``J_{sigma * B^{-1}}`` given a handle for ``J_{step * B}``.

    Uses the inversion identity
    ``J_{sigma B^{-1}}(u) = u - sigma * J_{B/sigma}(u / sigma)``, which
    for subdifferentials is Moreau's decomposition: the proximal map of
    ``sigma * g^*`` in terms of the proximal map of ``g``.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    u = np.asarray(point, dtype=np.float64)
    return u - sigma * res(u / sigma, 1.0 / sigma)


def inverse_resolvent(res, name=""):
    """Package :func:`resolvent_of_inverse` as a :class:`Resolvent`."""
    return Resolvent(lambda u, s: resolvent_of_inverse(res, u, s),
                     name=name or f"{res.name}-inverse")


# ---------------------------------------------------------------------------
# smooth maps
# ---------------------------------------------------------------------------

def huber_value(x, delta):
    """Sum of componentwise Huber penalties with threshold ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    a = np.abs(x)
    return float(np.sum(np.where(a <= delta, x * x / (2.0 * delta),
                                 a - delta / 2.0)))


def huber_gradient(x, delta):
    """Componentwise gradient of the Huber penalty.

    ``x/delta`` in the quadratic region ``|x| <= delta`` and ``sign(x)``
    outside; globally ``1/delta``-Lipschitz with values in ``[-1, 1]``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) <= delta, x / delta, np.sign(x))


def huber_composite_map(transform, weight, delta):
    """Gradient of ``weight * Huber_delta(W x)`` for an orthonormal ``W``.

    Parameters
    ----------
    transform : LinearOperator
        The analysis operator ``W`` (flat vectors); must be norm-1
        orthonormal so that the composite gradient
        ``weight * W^T huber_grad(W x)`` is monotone with Lipschitz
        constant ``weight / delta``.
    weight, delta : float
    """
    if transform.norm_bound is None or transform.norm_bound > 1.0 + 1e-12:
        raise ValueError("transform must carry a norm bound <= 1")

    def fn(x):
        return weight * transform.adjoint(huber_gradient(transform.apply(x),
                                                         delta))

    return SmoothMap(fn, weight / delta, "lipschitz", name="huber-composite")


def least_squares_gradient(m, b, norm_m=None):
    """Gradient map ``x -> M^T (M x - b)`` of ``0.5 * ||M x - b||^2``.

    Cocoercive with modulus ``beta = 1 / ||M||^2``; the spectral norm is
    computed exactly from the dense matrix unless ``norm_m`` is given.
    """
    m = as_matrix(m)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (m.shape[0],):
        raise ValueError(f"b has shape {b.shape}, expected ({m.shape[0]},)")
    if norm_m is None:
        norm_m = float(np.linalg.norm(m, 2))
    if norm_m <= 0:
        raise ValueError("M must be nonzero")
    return SmoothMap(lambda x: m.T @ (m @ x - b), 1.0 / norm_m**2,
                     "cocoercive", name="least-squares")


def skew_constraint_map(r, norm_r=None):
    """Skew map ``(x, u) -> (R^T u, -R x)`` on the stacked vector.

    This is the monotone Lipschitz term encoding the linear inequality
    constraints ``R x <= 0`` once the multiplier ``u`` is adjoined to
    the primal variable; the stacked layout is ``[x (n entries), u (p
    entries)]``.  Lipschitz constant ``||R||``.
    """
    r = as_matrix(r)
    p, n = r.shape
    if norm_r is None:
        norm_r = float(np.linalg.norm(r, 2))
    if norm_r <= 0:
        raise ValueError("R must be nonzero")

    def fn(z):
        x, u = z[:n], z[n:]
        if u.shape != (p,):
            raise ValueError(f"stacked point has wrong length {z.shape}")
        return np.concatenate([r.T @ u, -(r @ x)])

    return SmoothMap(fn, norm_r, "lipschitz", name="skew-constraint")


# ---------------------------------------------------------------------------
# problem container
# ---------------------------------------------------------------------------

class SplitProblem:
    """Monotone inclusion data for the forward-backward family.

    Parameters
    ----------
    dim : int
        Primal dimension (flat).
    resolvent_a : Resolvent
        Handle for ``J_{step*A}``.
    smooth_coco : SmoothMap or None
        Cocoercive term ``C`` (modulus ``beta``); ``None`` when absent.
    smooth_lip : SmoothMap or None
        Monotone Lipschitz term ``D`` (constant ``zeta``).
    coupling : LinearOperator or None
        Coupling ``L``; requires ``norm_bound`` and comes paired with
        ``resolvent_b_inv``.
    resolvent_b_inv : Resolvent or None
        Handle for ``J_{sigma * B^{-1}}`` in the dual update.
    name : str
    """

    def __init__(self, dim, resolvent_a, smooth_coco=None, smooth_lip=None,
                 coupling=None, resolvent_b_inv=None, name=""):
        if (coupling is None) != (resolvent_b_inv is None):
            raise ValueError(
                "coupling L and resolvent of B^{-1} must be both present "
                "or both absent")
        if smooth_coco is not None and smooth_coco.kind != "cocoercive":
            raise ValueError("smooth_coco must have kind 'cocoercive'")
        if smooth_lip is not None and smooth_lip.kind != "lipschitz":
            raise ValueError("smooth_lip must have kind 'lipschitz'")
        if coupling is not None:
            if coupling.dim_in != dim:
                raise ValueError("coupling input size != primal dim")
            if coupling.norm_bound is None:
                raise ValueError("coupling operator needs a norm_bound")
        self.dim = int(dim)
        self.resolvent_a = resolvent_a
        self.smooth_coco = smooth_coco
        self.smooth_lip = smooth_lip
        self.coupling = coupling
        self.resolvent_b_inv = resolvent_b_inv
        self.name = name

    # structure flags the kernels dispatch on
    @property
    def has_coco(self):
        return self.smooth_coco is not None

    @property
    def has_lip(self):
        return self.smooth_lip is not None

    @property
    def has_coupling(self):
        return self.coupling is not None

    @property
    def dual_dim(self):
        return self.coupling.dim_out if self.has_coupling else 0

    # certified constants
    @property
    def beta(self):
        """Cocoercivity modulus of ``C`` (``inf`` when ``C`` is absent)."""
        return self.smooth_coco.constant if self.has_coco else np.inf

    @property
    def zeta(self):
        """Lipschitz constant of ``D`` (0 when ``D`` is absent)."""
        return self.smooth_lip.constant if self.has_lip else 0.0

    @property
    def norm_coupling(self):
        """Bound on ``||L||`` (0 when ``L`` is absent)."""
        return self.coupling.norm_bound if self.has_coupling else 0.0

    def structure(self):
        """Short structure signature, e.g. ``'A+C+D+L/B'``."""
        parts = ["A"]
        if self.has_coco:
            parts.append("C")
        if self.has_lip:
            parts.append("D")
        if self.has_coupling:
            parts.append("L/B")
        return "+".join(parts)


# ---------------------------------------------------------------------------
# test helper
# ---------------------------------------------------------------------------

def firm_nonexpansive_violation(res, dim, step=1.0, n_pairs=200, seed=0,
                                scale=10.0):
    """Worst violation of ``||Jx - Jy||^2 <= <Jx - Jy, x - y>`` on samples.

    Returns the max over random pairs of
    ``||Jx - Jy||^2 - <Jx - Jy, x - y>``; a genuine resolvent keeps this
    below numerical slack.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_pairs):
        x = scale * rng.standard_normal(dim)
        y = scale * rng.standard_normal(dim)
        jx, jy = res(x, step), res(y, step)
        d = jx - jy
        worst = max(worst, float(d @ d - d @ (x - y)))
    return worst
