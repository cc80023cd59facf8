r"""Method kernels for the engine, and step-parameter initialization.

Every kernel here instantiates the same warped-resolvent template; they
differ only in which structural parts of the :class:`SplitProblem` they
use.  The two families are

* primal-only kernels on ``z = x``:
  ``kernel_fb`` (forward-backward, needs ``C`` at most),
  ``kernel_fbf`` (Tseng's method, needs ``D``),
  ``kernel_fbhf`` (both ``C`` and ``D``);
* primal-dual kernels on the stacked ``z = (x, u)``:
  ``kernel_fpdhf`` (the full four-block method),
  ``kernel_condat_vu`` (``D`` absent), ``kernel_chambolle_pock``
  (``C`` and ``D`` absent), ``kernel_cp_fbf`` (``C`` absent), and
  ``kernel_nfb_product`` — an independent arithmetic route through the
  product-space warp used as a cross-check oracle.

All specialized constructors delegate to one shared builder and merely
pin down which operators must be present/absent, so a specialization
produces *bit-identical* iterates to the general kernel on the same
problem.  :func:`make_kernel` dispatches on problem structure.

The primal-dual iteration metric is
``<(x,u),(x',u')>_S = <x,x'> - tau(<Lx,u'> + <Lx',u>) + (tau/sigma)<u,u'>``,
positive definite exactly when ``sigma*tau*||L||^2 < 1``.
"""

import math
from typing import NamedTuple

import numpy as np

from .certificates import (Certificate, FeasibilityError, StepParams,
                           alpha_bound, fpdhf_constants, make_certificate,
                           phi_value)
from .engine import MethodKernel

__all__ = [
    "PrimalDualPoint", "InitResult", "EPS_FLOOR",
    "eps_bar_value", "chi_value", "initialize_fpdhf",
    "kernel_fb", "kernel_fbf", "kernel_fbhf",
    "kernel_fpdhf", "kernel_condat_vu", "kernel_chambolle_pock",
    "kernel_cp_fbf", "kernel_nfb_product", "make_kernel",
    "product_space_maps", "pd_metric_inner", "KERNELS", "kernel_by_name",
]

#: epsilon floor used when the cocoercive part is absent (beta = inf),
#: where the margin may be driven arbitrarily close to 0.
EPS_FLOOR = 1e-6


class PrimalDualPoint(NamedTuple):
    """A stacked primal-dual point; kernels consume the flat layout."""
    x: np.ndarray
    u: np.ndarray

    def stack(self):
        return np.concatenate([np.ravel(self.x), np.ravel(self.u)])

    @classmethod
    def unstack(cls, z, primal_dim):
        z = np.asarray(z)
        return cls(z[:primal_dim], z[primal_dim:])


# ---------------------------------------------------------------------------
# initialization: from (beta, zeta, ||L||) to certified (tau, sigma, ...)
# ---------------------------------------------------------------------------

def eps_bar_value(beta, zeta):
    """Largest admissible margin ``eps_bar = 2 / (1 + sqrt(1 + 16 b^2 z^2))``.

    Conventions at the degenerate corners: 0 when ``beta = inf`` (the
    margin can be taken arbitrarily small), 1 when ``zeta = 0``.
    """
    if beta <= 0 or zeta < 0:
        raise ValueError("need beta > 0 and zeta >= 0")
    if math.isinf(beta):
        return 0.0
    if zeta == 0.0:
        return 1.0
    return 2.0 / (1.0 + math.sqrt(1.0 + 16.0 * beta * beta * zeta * zeta))


def chi_value(beta, zeta):
    """Sup of admissible primal steps: ``chi = 2*beta*eps_bar``.

    Equivalently ``sqrt(1 - eps_bar)/zeta``; the two closed forms agree
    to machine precision, which the tests pin down.  Degenerate
    regimes: ``2*beta`` when ``zeta = 0``, ``1/zeta`` when
    ``beta = inf``, ``inf`` when both degenerate.
    """
    if beta <= 0 or zeta < 0:
        raise ValueError("need beta > 0 and zeta >= 0")
    if math.isinf(beta):
        return math.inf if zeta == 0.0 else 1.0 / zeta
    if zeta == 0.0:
        return 2.0 * beta
    # written as 2*beta*eps_bar so that tau = kappa1*chi lands exactly on
    # the bound 2*beta_tilde*epsilon in the equality case kappa1 == t
    # (both checks then scale the same rounded product)
    return 2.0 * beta * eps_bar_value(beta, zeta)


class InitResult(NamedTuple):
    """Everything :func:`initialize_fpdhf` decided, with provenance."""
    beta: float
    zeta: float
    norm_l: float
    t: float
    kappa1: float
    kappa2: float
    scenario: int
    eps_bar: float
    chi: float
    epsilon: float
    tau: float
    sigma: float
    params: StepParams
    psi: float
    lam: float
    alpha: float
    certificate: Certificate

    def to_dict(self):
        d = self._asdict()
        d["params"] = self.params._asdict()
        d["certificate"] = self.certificate.to_dict()
        return d


def initialize_fpdhf(beta, zeta, norm_l, t=0.999, kappa1=0.5, kappa2=0.5,
                     scenario=2, chosen=1.0, partner=None,
                     skew_monotone=None, tau=None, sigma=None):
    """Pick certified ``(epsilon, tau, sigma, lambda, alpha)`` from constants.

    The procedure: ``epsilon = t * eps_bar`` (with the :data:`EPS_FLOOR`
    convention when ``beta = inf``), ``tau = kappa1 * chi``,
    ``sigma = kappa2 * (1 - tau/chi) / (tau * ||L||^2)``; then the
    relaxation/inertia pair is completed from the resulting ``psi``:

    * ``scenario=1``: ``chosen`` is the inertia ``alpha``; the
      relaxation defaults to the midpoint of ``]0, phi(alpha)*psi[``;
    * ``scenario=2``: ``chosen`` is the relaxation ``lambda`` (must be
      below ``psi``); the inertia defaults to the midpoint of the
      admissible ``[0, alpha_sup[``.

    ``partner`` overrides the midpoint pick; explicit ``tau``/``sigma``
    override the kappa rules (needed e.g. when ``chi`` is infinite).
    Raises :class:`FeasibilityError` naming the violated inequality for
    any combination outside the certified region.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    if tau is None and not 0.0 < kappa1 < 1.0:
        raise ValueError(f"kappa1 must lie in (0, 1), got {kappa1}")
    if sigma is None and not 0.0 <= kappa2 < 1.0:
        raise ValueError(f"kappa2 must lie in [0, 1), got {kappa2}")
    if scenario not in (1, 2):
        raise ValueError("scenario must be 1 or 2")

    eps_bar = eps_bar_value(beta, zeta)
    chi = chi_value(beta, zeta)
    epsilon = t * (eps_bar if eps_bar > 0.0 else EPS_FLOOR)

    tau_from_kappa = tau is None
    if tau is None:
        if math.isinf(chi):
            raise FeasibilityError(
                "tau finite", "chi is infinite; pass tau explicitly")
        tau = kappa1 * chi
    tau = float(tau)
    if tau <= 0:
        raise FeasibilityError("tau > 0", f"tau={tau}")

    if sigma is None:
        if kappa2 == 0.0 or norm_l == 0.0:
            sigma = 0.0
        else:
            room = 1.0 - (0.0 if math.isinf(chi) else tau / chi)
            if room <= 0:
                raise FeasibilityError("tau < chi", f"tau={tau}, chi={chi}")
            sigma = kappa2 * room / (tau * norm_l**2)
    sigma = float(sigma)

    # kappa1 <= t makes tau = kappa1*(2*beta*eps_bar) admissible against
    # the bound 2*beta*(t*eps_bar) in exact arithmetic, but the two
    # products round independently; when no coupling discount is active
    # (sigma = 0, so beta_tilde = beta) snap tau onto the float bound so
    # the boundary request kappa1 == t is accepted for every t
    if (tau_from_kappa and sigma == 0.0 and kappa1 <= t
            and math.isfinite(beta)):
        tau = min(tau, 2.0 * beta * epsilon)

    params = fpdhf_constants(beta, zeta, tau, sigma, norm_l,
                             skew_monotone=skew_monotone)
    params = params.with_epsilon(epsilon)  # raises on steps infeasibility
    psi = params.psi()

    if scenario == 1:
        alpha = float(chosen)
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        lam_max = phi_value(alpha) * psi
        lam = float(partner) if partner is not None else lam_max / 2.0
        if not 0.0 < lam < lam_max:
            raise FeasibilityError("lambda < phi(alpha)*psi",
                                   f"lambda={lam}, sup={lam_max}")
    else:
        lam = float(chosen)
        if not 0.0 < lam < psi:
            raise FeasibilityError("lambda < psi", f"lambda={lam}, psi={psi}")
        asup = alpha_bound(psi, lam).value
        alpha = float(partner) if partner is not None else asup / 2.0
        if not 0.0 <= alpha < asup:
            raise FeasibilityError("alpha < alpha_sup(psi, lambda)",
                                   f"alpha={alpha}, sup={asup}")

    cert = make_certificate(params.zeta_tilde, epsilon, lam, alpha,
                            nu=params.nu)
    if not cert.feasible:
        raise FeasibilityError("lambda < phi(alpha)*psi",
                               f"lambda={lam}, sup={cert.lambda_max}")
    return InitResult(beta=float(beta), zeta=float(zeta),
                      norm_l=float(norm_l), t=float(t), kappa1=float(kappa1),
                      kappa2=float(kappa2), scenario=scenario,
                      eps_bar=eps_bar, chi=chi, epsilon=epsilon, tau=tau,
                      sigma=sigma, params=params, psi=psi, lam=lam,
                      alpha=alpha, certificate=cert)


# ---------------------------------------------------------------------------
# kernel builders
# ---------------------------------------------------------------------------

def _primal_kernel(problem, tau, name):
    res_a = problem.resolvent_a
    coco = problem.smooth_coco
    lip = problem.smooth_lip
    tau = float(tau)

    if lip is not None:
        def warp(y, n):
            dy = lip(y)
            fwd = dy if coco is None else dy + coco(y)
            x = res_a(y - tau * fwd, tau)
            w = x - tau * (lip(x) - dy)
            return x, w
    else:
        def warp(y, n):
            x = res_a(y if coco is None else y - tau * coco(y), tau)
            return x, x

    return MethodKernel(name, problem.dim, warp,
                        meta={"tau": tau, "structure": problem.structure()})


def pd_metric_inner(coupling, tau, sigma, primal_dim):
    """Inner product of the primal-dual iteration metric (flat layout)."""
    n = primal_dim

    def s_inner(a, b):
        ax, au = a[:n], a[n:]
        bx, bu = b[:n], b[n:]
        return (float(ax @ bx)
                - tau * (float(coupling.apply(ax) @ bu)
                         + float(coupling.apply(bx) @ au))
                + (tau / sigma) * float(au @ bu))

    return s_inner


def _check_pd_steps(problem, tau, sigma):
    if tau <= 0:
        raise FeasibilityError("tau > 0", f"tau={tau}")
    if sigma <= 0:
        raise FeasibilityError("sigma > 0", f"sigma={sigma}")
    # also rejects sigma*tau*||L||^2 >= 1 (indefinite metric)
    return fpdhf_constants(problem.beta, problem.zeta, tau, sigma,
                           problem.norm_coupling)


def _primal_dual_kernel(problem, tau, sigma, name, product_route=False):
    params = _check_pd_steps(problem, tau, sigma)
    n = problem.dim
    res_a = problem.resolvent_a
    res_b = problem.resolvent_b_inv
    coco = problem.smooth_coco
    lip = problem.smooth_lip
    coupling = problem.coupling
    tau, sigma = float(tau), float(sigma)

    if not product_route:
        def warp(z, it):
            p, q = z[:n], z[n:]
            dp = lip(p) if lip is not None else None
            fwd = coupling.adjoint(q)
            if dp is not None:
                fwd = fwd + dp
            if coco is not None:
                fwd = fwd + coco(p)
            x = res_a(p - tau * fwd, tau)
            w = x - tau * (lip(x) - dp) if lip is not None else x
            v = res_b(q + sigma * coupling.apply(x + w - p), sigma)
            return (np.concatenate([x, v]), np.concatenate([w, v]))
    else:
        # independent arithmetic route through the product-space warp:
        # evaluate the warp image (r, s), apply the resolvents, then
        # take the correction step through the map T (see
        # product_space_maps); algebraically identical, numerically a
        # distinct path.
        def warp(z, it):
            p, q = z[:n], z[n:]
            dp = lip(p) if lip is not None else None
            r = p / tau - coupling.adjoint(q)
            if dp is not None:
                r = r - dp
            if coco is not None:
                r = r - coco(p)
            s = q / sigma - coupling.apply(p)
            if dp is not None:
                s = s + tau * coupling.apply(dp)
            x = res_a(tau * r, tau)
            arg = s + 2.0 * coupling.apply(x)
            dx = lip(x) if lip is not None else None
            if dx is not None:
                arg = arg - tau * coupling.apply(dx)
            v = res_b(sigma * arg, sigma)
            ty_p = p / tau if dp is None else p / tau - dp
            tx_p = x / tau if dx is None else x / tau - dx
            w_p = p - tau * (ty_p - tx_p)
            w_u = q - tau * (q / tau - v / tau)
            return (np.concatenate([x, v]), np.concatenate([w_p, w_u]))

    meta = {"tau": tau, "sigma": sigma, "structure": problem.structure(),
            "params": params}
    return MethodKernel(name, n + problem.dual_dim, warp,
                        s_inner=pd_metric_inner(coupling, tau, sigma, n),
                        meta=meta)


# ---------------------------------------------------------------------------
# named kernels (structural specializations of the same builders)
# ---------------------------------------------------------------------------

def _require(cond, what):
    if not cond:
        raise ValueError(f"problem structure mismatch: {what}")


def kernel_fb(problem, gamma):
    """Forward-backward: ``x = J_{gamma A}(y - gamma C y)`` (no ``D``/``L``).

    Needs ``gamma < 2*beta`` (any positive step when ``C`` is absent,
    where the method is the proximal point iteration).
    """
    _require(not problem.has_coupling, "kernel_fb takes no coupling")
    _require(not problem.has_lip, "kernel_fb takes no Lipschitz term")
    if gamma <= 0:
        raise FeasibilityError("gamma > 0", f"gamma={gamma}")
    if gamma >= 2.0 * problem.beta:
        raise FeasibilityError("gamma < 2*beta",
                               f"gamma={gamma}, beta={problem.beta}")
    return _primal_kernel(problem, gamma, "fb")


def kernel_fbf(problem, tau):
    """Tseng's forward-backward-forward: ``D`` only (``tau < 1/zeta``)."""
    _require(not problem.has_coupling, "kernel_fbf takes no coupling")
    _require(problem.has_lip, "kernel_fbf needs the Lipschitz term")
    _require(not problem.has_coco, "kernel_fbf takes no cocoercive term")
    if not 0.0 < tau < chi_value(problem.beta, problem.zeta):
        raise FeasibilityError("tau < 1/zeta",
                               f"tau={tau}, zeta={problem.zeta}")
    return _primal_kernel(problem, tau, "fbf")


def kernel_fbhf(problem, tau):
    """Forward-backward-half-forward: ``C`` and ``D`` without coupling.

    Step condition ``tau < chi(beta, zeta)
    = 4*beta / (1 + sqrt(1 + 16*beta^2*zeta^2))``.
    """
    _require(not problem.has_coupling, "kernel_fbhf takes no coupling")
    _require(problem.has_lip, "kernel_fbhf needs the Lipschitz term")
    chi = chi_value(problem.beta, problem.zeta)
    if not 0.0 < tau < chi:
        raise FeasibilityError("tau < chi(beta, zeta)",
                               f"tau={tau}, chi={chi}")
    return _primal_kernel(problem, tau, "fbhf")


def kernel_fpdhf(problem, tau, sigma):
    """The full primal-dual kernel; needs the coupling pair, any C/D."""
    _require(problem.has_coupling, "kernel_fpdhf needs coupling L and B")
    return _primal_dual_kernel(problem, tau, sigma, "fpdhf")


def kernel_condat_vu(problem, tau, sigma):
    """Primal-dual with cocoercive term only (``D`` structurally absent)."""
    _require(problem.has_coupling, "kernel_condat_vu needs coupling")
    _require(problem.has_coco, "kernel_condat_vu needs the cocoercive term")
    _require(not problem.has_lip, "kernel_condat_vu takes no Lipschitz term")
    return _primal_dual_kernel(problem, tau, sigma, "condat-vu")


def kernel_chambolle_pock(problem, tau, sigma):
    """Primal-dual proximal only (``C`` and ``D`` structurally absent)."""
    _require(problem.has_coupling, "kernel_chambolle_pock needs coupling")
    _require(not problem.has_coco, "kernel_chambolle_pock takes no C")
    _require(not problem.has_lip, "kernel_chambolle_pock takes no D")
    return _primal_dual_kernel(problem, tau, sigma, "chambolle-pock")


def kernel_cp_fbf(problem, tau, sigma):
    """Primal-dual with Lipschitz term only (``C`` structurally absent)."""
    _require(problem.has_coupling, "kernel_cp_fbf needs coupling")
    _require(problem.has_lip, "kernel_cp_fbf needs the Lipschitz term")
    _require(not problem.has_coco, "kernel_cp_fbf takes no cocoercive term")
    return _primal_dual_kernel(problem, tau, sigma, "cp-fbf")


def kernel_nfb_product(problem, tau, sigma):
    """Product-space oracle route; same contract as :func:`kernel_fpdhf`."""
    _require(problem.has_coupling, "kernel_nfb_product needs coupling")
    return _primal_dual_kernel(problem, tau, sigma, "nfb-product",
                               product_route=True)


_PD_DISPATCH = {
    (True, True): kernel_fpdhf,
    (True, False): kernel_condat_vu,
    (False, True): kernel_cp_fbf,
    (False, False): kernel_chambolle_pock,
}

#: public name -> (builder, required blocks, takes sigma).  ``blocks`` of
#: None means "coupling plus whatever else the problem has".
KERNELS = {
    "fb": (kernel_fb, frozenset({"C"}), False),
    "fbf": (kernel_fbf, frozenset({"D"}), False),
    "fbhf": (kernel_fbhf, frozenset({"C", "D"}), False),
    "cp": (kernel_chambolle_pock, frozenset({"L"}), True),
    "cv": (kernel_condat_vu, frozenset({"C", "L"}), True),
    "cp-fbf": (kernel_cp_fbf, frozenset({"D", "L"}), True),
    "fpdhf": (kernel_fpdhf, None, True),
    "fpdhf-oracle": (kernel_nfb_product, None, True),
}


def kernel_by_name(name, problem, tau, sigma=None):
    """Build the kernel registered under ``name`` for ``problem``."""
    if name not in KERNELS:
        raise ValueError(f"unknown method {name!r}; "
                         f"choose from {sorted(KERNELS)}")
    builder, _, takes_sigma = KERNELS[name]
    if takes_sigma:
        if sigma is None:
            raise ValueError(f"method {name!r} needs sigma")
        return builder(problem, tau, sigma)
    return builder(problem, tau)


def make_kernel(problem, tau, sigma=None):
    """Dispatch on problem structure to the matching named kernel."""
    if problem.has_coupling:
        if sigma is None:
            raise ValueError("primal-dual problems need sigma")
        fn = _PD_DISPATCH[(problem.has_coco, problem.has_lip)]
        return fn(problem, tau, sigma)
    if problem.has_lip:
        if problem.has_coco:
            return kernel_fbhf(problem, tau)
        return kernel_fbf(problem, tau)
    return kernel_fb(problem, tau)


# ---------------------------------------------------------------------------
# product-space maps (exposed for the oracle cross-checks)
# ---------------------------------------------------------------------------

def product_space_maps(problem, tau, sigma):
    """The single-valued product-space maps behind the primal-dual warp.

    Returns a dict with callables on the stacked ``z = (x, u)``:

    * ``"M"``: the warp,
      ``(x/tau - Dx - L*u, -Lx + tau L Dx + u/sigma)``;
    * ``"S"``: the metric inducer, ``(x - tau L*u, -tau Lx + tau u/sigma)``;
    * ``"T"``: the correction map, ``(x/tau - Dx, u/tau)``;
    * ``"C"``: the cocoercive part, ``(Cx, 0)``.

    The identity ``M = S o T`` holds pointwise (exactly in exact
    arithmetic; to machine rounding here), and
    ``<z, S z> = ||x||^2 - 2 tau <Lx, u> + (tau/sigma)||u||^2 > 0``
    for ``z != 0`` iff ``sigma*tau*||L||^2 < 1``.
    """
    _require(problem.has_coupling, "product-space maps need coupling")
    _check_pd_steps(problem, tau, sigma)
    n = problem.dim
    coupling = problem.coupling
    lip = problem.smooth_lip
    coco = problem.smooth_coco

    def m_map(z):
        x, u = z[:n], z[n:]
        dx = lip(x) if lip is not None else 0.0
        lx = coupling.apply(x)
        top = x / tau - dx - coupling.adjoint(u)
        bot = -lx + u / sigma
        if lip is not None:
            bot = bot + tau * coupling.apply(dx)
        return np.concatenate([top, bot])

    def s_map(z):
        x, u = z[:n], z[n:]
        return np.concatenate([x - tau * coupling.adjoint(u),
                               -tau * coupling.apply(x) + (tau / sigma) * u])

    def t_map(z):
        x, u = z[:n], z[n:]
        dx = lip(x) if lip is not None else 0.0
        return np.concatenate([x / tau - dx, u / tau])

    def c_map(z):
        x = z[:n]
        cx = coco(x) if coco is not None else np.zeros(n)
        return np.concatenate([cx, np.zeros(len(z) - n)])

    return {"M": m_map, "S": s_map, "T": t_map, "C": c_map}
