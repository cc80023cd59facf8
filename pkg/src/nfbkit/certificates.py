r"""Feasibility certificates for inertia/relaxation parameters.

For the warped-resolvent iteration with inertia ``alpha``, relaxation
``lambda`` and nonlinearity level ``zeta`` (Lipschitz constant of the
warp's displacement, scaled into the metric), the admissible parameter
region is governed by three closed forms:

* ``psi(zeta, epsilon, nu) = (2 - epsilon + nu) / (1 + zeta^2 + nu)``
  with ``nu = 0`` for monotone warp displacement and ``nu = 2*zeta``
  otherwise — the sup of admissible relaxations as the inertia goes
  to 0; it lies in ``]1, 2[`` on the feasible domain
  ``0 <= zeta < 1``, ``0 < epsilon < 1 - zeta^2``;
* ``phi(alpha) = (1 - alpha)^2 / (2*alpha^2 - alpha + 1)``, strictly
  decreasing from ``phi(0) = 1``, which discounts the relaxation range
  available at inertia ``alpha``: the pair ``(alpha, lambda)`` is
  admissible iff ``lambda < phi(alpha) * psi``;
* the sup of admissible constant inertia at relaxation ``lambda``,
  ``alpha_bound``, is the positive root of
  ``a*x^2 - (2a+3)*x + (a+1) = 0`` with ``a = psi/lambda - 2``,
  written in the root form ``2(a+1) / (2a+3 + sqrt(8a+9))`` that stays
  stable as ``a -> 0`` (where the root tends to 1/3).

The per-iteration margin is
``delta_n = (1-alpha_n)*rho_n - alpha_{n+1}(1-alpha_{n+1})*rho_{n+1}
- alpha_{n+1}(1+alpha_{n+1})`` with ``rho_n = psi/lambda_n - 1``;
positivity of its liminf is what the convergence theorem consumes, and
it is what :class:`FejerMonitor` checks along an actual run through the
descent of the energy

``H_n = ||z_n - z||_S^2 - alpha_{n-1} ||z_{n-1} - z||_S^2
+ (alpha_n(1-alpha_n) rho_n + alpha_n(1+alpha_n)) ||z_n - z_{n-1}||_S^2``.
"""

import json
import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "FeasibilityError", "psi_value", "phi_value", "lambda_interval",
    "AlphaBound", "alpha_bound", "rho_value", "delta_value",
    "StepParams", "fpdhf_constants", "Certificate", "make_certificate",
    "FejerMonitor", "FejerReport", "fejer_step",
]


class FeasibilityError(ValueError):
    """A parameter choice violates one of the certified inequalities.

    ``condition`` states the violated inequality itself (e.g.
    ``"epsilon < 1 - zeta^2"``) so callers can print actionable
    diagnostics.
    """

    def __init__(self, condition, detail=""):
        self.condition = condition
        msg = f"violated: {condition}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def _check_zeta_epsilon(zeta, epsilon):
    if zeta < 0 or zeta >= 1:
        raise FeasibilityError("0 <= zeta < 1", f"zeta={zeta}")
    if epsilon <= 0:
        raise FeasibilityError("epsilon > 0", f"epsilon={epsilon}")
    if 1.0 - zeta * zeta - epsilon <= 0:
        raise FeasibilityError("epsilon < 1 - zeta^2",
                               f"epsilon={epsilon}, zeta={zeta}")


def psi_value(zeta, epsilon, nu=0.0):
    """Relaxation ceiling ``psi`` at nonlinearity ``zeta`` and margin ``epsilon``.

    ``nu`` must be 0 (monotone warp displacement) or ``2*zeta``.  On the
    feasible domain the value lies in the open interval ``]1, 2[``.
    """
    _check_zeta_epsilon(zeta, epsilon)
    if nu not in (0.0, 2.0 * zeta) and not math.isclose(nu, 2.0 * zeta):
        raise ValueError(f"nu must be 0 or 2*zeta, got {nu}")
    return (2.0 - epsilon + nu) / (1.0 + zeta * zeta + nu)


def phi_value(alpha):
    """Inertia discount ``phi(alpha)``, strictly decreasing on ``[0, 1[``."""
    if alpha < 0 or alpha >= 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    return (1.0 - alpha) ** 2 / (2.0 * alpha * alpha - alpha + 1.0)


def lambda_interval(psi, alpha):
    """Open interval of relaxations admissible at constant inertia ``alpha``."""
    if not 1.0 < psi < 2.0:
        raise ValueError(f"psi must lie in (1, 2), got {psi}")
    return 0.0, phi_value(alpha) * psi


class AlphaBound(NamedTuple):
    value: float
    feasible: bool


def alpha_bound(psi, lam):
    """Sup of admissible constant inertia at relaxation ``lam``.

    Returns ``AlphaBound(value, feasible)``; ``feasible`` is False (and
    the value 0) when ``lam >= psi`` leaves no inertia room at all.  The
    value is the positive root of ``a x^2 - (2a+3) x + (a+1)`` with
    ``a = psi/lam - 2``; it tends to 1/3 as ``a -> 0`` and to 0 as
    ``lam -> psi``.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not 1.0 < psi < 2.0:
        raise ValueError(f"psi must lie in (1, 2), got {psi}")
    if lam >= psi:
        return AlphaBound(0.0, False)
    a = psi / lam - 2.0
    root = 2.0 * (a + 1.0) / (2.0 * a + 3.0 + math.sqrt(8.0 * a + 9.0))
    return AlphaBound(root, True)


def rho_value(psi, lam):
    """Relaxation margin ``rho = psi/lambda - 1`` (nonnegative iff feasible)."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return psi / lam - 1.0


def delta_value(alpha_n, alpha_np1, rho_n, rho_np1):
    """Per-iteration descent margin ``delta_n`` of the inertial energy."""
    return ((1.0 - alpha_n) * rho_n
            - alpha_np1 * (1.0 - alpha_np1) * rho_np1
            - alpha_np1 * (1.0 + alpha_np1))


# ---------------------------------------------------------------------------
# primal-dual step constants
# ---------------------------------------------------------------------------

class StepParams(NamedTuple):
    """Derived constants of a primal-dual step choice ``(tau, sigma)``.

    ``beta_tilde`` is the cocoercivity modulus left after the coupling
    discount, ``zeta_tilde`` the metric-scaled Lipschitz level, ``nu``
    the monotonicity surcharge (0 or ``2*zeta_tilde``), and ``epsilon``
    the chosen margin (None until picked).
    """
    tau: float
    sigma: float
    beta_tilde: float
    zeta_tilde: float
    nu: float
    epsilon: float | None = None

    def with_epsilon(self, epsilon):
        self.check(epsilon)
        return self._replace(epsilon=epsilon)

    def conditions(self, epsilon=None):
        """The certified inequalities as ``(name, satisfied, margin)``."""
        eps = self.epsilon if epsilon is None else epsilon
        out = []
        if eps is not None:
            out.append(("epsilon > 0", eps > 0, eps))
            m0 = 1.0 - self.zeta_tilde**2 - eps
            out.append(("epsilon < 1 - zeta_tilde^2", m0 > 0, m0))
            m1 = (np.inf if np.isinf(self.beta_tilde)
                  else 2.0 * self.beta_tilde * eps - self.tau)
            out.append(("tau <= 2*beta_tilde*epsilon", m1 >= 0, m1))
        return out

    def check(self, epsilon=None):
        """Raise :class:`FeasibilityError` on the first violated inequality."""
        for name, ok, margin in self.conditions(epsilon):
            if not ok:
                raise FeasibilityError(name, f"margin={margin:.3e}")

    def psi(self, epsilon=None):
        eps = self.epsilon if epsilon is None else epsilon
        if eps is None:
            raise ValueError("epsilon not chosen yet")
        return psi_value(self.zeta_tilde, eps, self.nu)


def fpdhf_constants(beta, zeta, tau, sigma, norm_l, skew_monotone=None):
    """Derive :class:`StepParams` for steps ``(tau, sigma)`` and coupling ``L``.

    Parameters
    ----------
    beta : float
        Cocoercivity modulus of ``C`` (``inf`` when absent).
    zeta : float
        Lipschitz constant of ``D`` (0 when absent).
    tau, sigma : float
        Primal and dual steps; ``sigma = 0`` encodes an absent coupling.
    norm_l : float
        Bound on ``||L||`` (0 when absent).
    skew_monotone : bool or None
        Whether the coupled displacement ``(x, u) -> tau*(D x, -tau L D x)``
        is monotone.  ``None`` picks the structurally safe default: it
        is monotone when ``D`` is absent or the coupling is absent,
        and assumed not otherwise (``nu = 2*zeta_tilde``).
    """
    if tau <= 0:
        raise FeasibilityError("tau > 0", f"tau={tau}")
    if sigma < 0:
        raise FeasibilityError("sigma >= 0", f"sigma={sigma}")
    contraction = 1.0 - sigma * tau * norm_l**2
    if contraction <= 0:
        raise FeasibilityError("sigma*tau*||L||^2 < 1",
                               f"sigma*tau*||L||^2={sigma * tau * norm_l**2}")
    beta_tilde = beta * contraction
    zeta_tilde = tau * zeta / math.sqrt(contraction)
    if skew_monotone is None:
        skew_monotone = (zeta == 0.0) or (sigma == 0.0) or (norm_l == 0.0)
    nu = 0.0 if skew_monotone else 2.0 * zeta_tilde
    return StepParams(tau=float(tau), sigma=float(sigma),
                      beta_tilde=float(beta_tilde),
                      zeta_tilde=float(zeta_tilde), nu=nu)


# ---------------------------------------------------------------------------
# full certificate for a chosen (lambda, alpha)
# ---------------------------------------------------------------------------

class Certificate(NamedTuple):
    """Feasibility record for a concrete ``(zeta, epsilon, lambda, alpha)``.

    ``lambda_max`` is the relaxation sup at the chosen inertia,
    ``alpha_sup`` the inertia sup at the chosen relaxation, and
    ``delta_hat`` the asymptotic descent margin for the constant
    schedule.  ``feasible`` is decided by the exact closed form
    ``lambda < phi(alpha) * psi``.
    """
    zeta: float
    epsilon: float
    nu: float
    psi: float
    lam: float
    alpha: float
    lambda_max: float
    alpha_sup: float
    rho: float
    delta_hat: float
    feasible: bool

    def alpha_max(self, lam):
        """Inertia sup at an alternative relaxation ``lam``."""
        return alpha_bound(self.psi, lam).value

    def to_dict(self):
        d = self._asdict()
        d["feasible"] = bool(d["feasible"])
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def make_certificate(zeta, epsilon, lam, alpha, nu=None):
    """Build a :class:`Certificate`; raises only on domain violations.

    An infeasible but well-posed choice (e.g. inertia beyond the sup) is
    returned with ``feasible=False`` rather than raised, so sweeps can
    tabulate the boundary.
    """
    if nu is None:
        nu = 0.0
    psi = psi_value(zeta, epsilon, nu)
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if alpha < 0 or alpha >= 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    lam_max = phi_value(alpha) * psi
    asup = alpha_bound(psi, lam)
    rho = rho_value(psi, lam)
    delta_hat = (1.0 - alpha) ** 2 * rho - alpha * (1.0 + alpha)
    return Certificate(zeta=float(zeta), epsilon=float(epsilon), nu=float(nu),
                       psi=psi, lam=float(lam), alpha=float(alpha),
                       lambda_max=lam_max, alpha_sup=asup.value, rho=rho,
                       delta_hat=delta_hat, feasible=bool(lam < lam_max))


# ---------------------------------------------------------------------------
# run-time Fejer monitoring
# ---------------------------------------------------------------------------

class FejerReport(NamedTuple):
    n: int
    h: float
    delta: float
    dz_sq: float
    flagged: bool


class FejerMonitor:
    """Tracks the inertial energy ``H_n`` against a reference solution.

    The monitor never aborts a run; it records every index at which
    ``H_{n+1}`` exceeded ``H_n`` by more than ``slack`` while the margin
    ``delta_n`` (and ``rho_n``) said it must not.  It also accumulates
    the partial sums of ``||z_{n+1} - z_n||_S^2``, whose convergence is
    the other half of the descent certificate.

    Parameters
    ----------
    reference : array
        A (high accuracy) solution ``z`` of the inclusion, flattened.
    s_norm_sq : callable, optional
        Squared norm of the iteration metric; Euclidean by default.
    slack : float
        Tolerance above which an increase counts as a violation.
    """

    def __init__(self, reference, s_norm_sq=None, slack=1e-10):
        self.reference = np.asarray(reference, dtype=np.float64).ravel()
        self.s_norm_sq = s_norm_sq or (lambda v: float(v @ v))
        self.slack = float(slack)
        self.h_prev = None
        self.dz_sq_sum = 0.0
        self.last_dz_sq = np.nan
        self.violations = []       # (n, increase) pairs, worst offenders kept
        self.max_increase = -np.inf
        self.steps = 0
        # caches to avoid recomputing distances already seen
        self._dist_sq_curr = None
        self._dist_sq_prev = None

    def worst(self, after=0):
        """Largest flagged increase at indices ``>= after`` (or ``-inf``)."""
        vals = [inc for n, inc in self.violations if n >= after]
        return max(vals) if vals else -np.inf


def fejer_step(monitor, n, z_n, z_nm1, z_np1, alpha_n, alpha_np1,
               rho_n, rho_np1):
    """Advance the monitor by one iteration and report.

    The first call seeds ``H_n`` using ``alpha_{n-1} := alpha_n`` (the
    energy at the run's first index is a convention; only differences
    from then on are certified).  A violation is flagged only when the
    schedule promised descent, i.e. ``delta_n > 0`` and ``rho_n >= 0``.
    """
    sq = monitor.s_norm_sq
    ref = monitor.reference

    if monitor.h_prev is None:
        d_nm1 = sq(z_nm1 - ref)
        d_n = sq(z_n - ref)
        step_sq = sq(z_n - z_nm1)
        monitor.h_prev = (d_n - alpha_n * d_nm1
                          + (alpha_n * (1.0 - alpha_n) * rho_n
                             + alpha_n * (1.0 + alpha_n)) * step_sq)
        monitor._dist_sq_prev = d_nm1
        monitor._dist_sq_curr = d_n

    d_np1 = sq(z_np1 - ref)
    dz_sq = sq(z_np1 - z_n)
    h_np1 = (d_np1 - alpha_n * monitor._dist_sq_curr
             + (alpha_np1 * (1.0 - alpha_np1) * rho_np1
                + alpha_np1 * (1.0 + alpha_np1)) * dz_sq)

    delta = delta_value(alpha_n, alpha_np1, rho_n, rho_np1)
    increase = h_np1 - monitor.h_prev
    flagged = bool(delta > 0.0 and rho_n >= 0.0
                   and increase > monitor.slack)
    if flagged:
        monitor.violations.append((n, increase))
        if len(monitor.violations) > 1000:
            del monitor.violations[:-1000]
    if delta > 0.0 and rho_n >= 0.0:
        monitor.max_increase = max(monitor.max_increase, increase)

    monitor.dz_sq_sum += dz_sq
    monitor.last_dz_sq = dz_sq
    monitor.steps += 1
    monitor.h_prev = h_np1
    monitor._dist_sq_prev = monitor._dist_sq_curr
    monitor._dist_sq_curr = d_np1
    return FejerReport(n=n, h=h_np1, delta=delta, dz_sq=dz_sq,
                       flagged=flagged)
