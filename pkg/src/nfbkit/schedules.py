r"""Inertia schedules ``alpha_n`` and their feasibility validation.

Three families are provided (plus custom coefficients):

* ``const:a`` — constant inertia ``alpha_n = a``;
* ``ramp:limit,c0`` — nondecreasing ``alpha_n = limit * n / (n + c0)``;
* ``dec1``/``dec2``/``dec3``/``custom:c0,c1,e`` — decreasing-to-zero
  ``alpha_n = 1 / (c0 + c1 * n * (log n)^e)`` with natural log and the
  log factor set to 0 for ``n <= 1`` (so ``alpha_0 = alpha_1 = 1/c0``).

The named decreasing schedules are::

    dec1:  c0 = 1, c1 = 1e-3, e = 1.001
    dec2:  c0 = 3, c1 = 1e-5, e = 1.00001
    dec3:  c0 = 9, c1 = 1e-5, e = 1.00001

Validation against a :class:`~nfbkit.certificates.Certificate` checks
the descent margins ``delta_n`` over a horizon.  For constant schedules
the accept/reject decision is taken from the exact closed form
``lambda < phi(alpha) * psi`` (identical, not merely equivalent, to the
certificate's own rule); varying schedules are scanned numerically and
judged by the liminf surrogate ``min`` of ``delta_n`` over the second
half of the horizon.
"""

import numpy as np

from .certificates import (FeasibilityError, phi_value, rho_value)

__all__ = ["ScheduleSpec", "parse_schedule", "alpha_at", "delta_series",
           "FeasibilityReport", "validate_schedule", "NAMED_SCHEDULES"]

NAMED_SCHEDULES = {
    "dec1": (1.0, 1e-3, 1.001),
    "dec2": (3.0, 1e-5, 1.00001),
    "dec3": (9.0, 1e-5, 1.00001),
}


class ScheduleSpec:
    """An inertia schedule plus its relaxation.

    Parameters
    ----------
    kind : {"constant", "ramp", "decreasing"}
    params : dict
        ``constant``: ``{"alpha": a}``; ``ramp``: ``{"limit": l, "c0": c}``;
        ``decreasing``: ``{"c0": ., "c1": ., "e": .}``.
    lam : float or callable
        Relaxation ``lambda_n``; a scalar (the usual case) or a handle
        ``n -> lambda_n``.
    name : str
        Parseable label (see :func:`parse_schedule`).
    """

    def __init__(self, kind, params, lam=1.0, name=""):
        if kind not in ("constant", "ramp", "decreasing"):
            raise ValueError(f"unknown schedule kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self.lam = lam
        self.name = name or kind
        if kind == "constant" and not 0.0 <= self.params["alpha"] < 1.0:
            raise ValueError("constant alpha must lie in [0, 1)")
        if kind == "ramp" and not 0.0 <= self.params["limit"] < 1.0:
            raise ValueError("ramp limit must lie in [0, 1)")
        if kind == "decreasing" and self.params["c0"] < 1.0:
            raise ValueError("decreasing c0 must be >= 1 so alpha_n <= 1")

    def alpha(self, n):
        """Inertia at iteration ``n`` (scalar)."""
        return float(self.alpha_array(np.asarray([n]))[0])

    def alpha_array(self, ns):
        """Vectorized inertia over an integer array ``ns``."""
        ns = np.asarray(ns, dtype=np.float64)
        if self.kind == "constant":
            return np.full(ns.shape, self.params["alpha"])
        if self.kind == "ramp":
            return self.params["limit"] * ns / (ns + self.params["c0"])
        c0, c1, e = (self.params["c0"], self.params["c1"], self.params["e"])
        logf = np.where(ns > 1.0, np.log(np.maximum(ns, 2.0)) ** e, 0.0)
        return 1.0 / (c0 + c1 * ns * logf)

    def lam_at(self, n):
        """Relaxation at iteration ``n``."""
        return float(self.lam(n)) if callable(self.lam) else float(self.lam)

    def limit(self):
        """The limit of ``alpha_n`` (constant value, ramp limit, or 0)."""
        if self.kind == "constant":
            return self.params["alpha"]
        if self.kind == "ramp":
            return self.params["limit"]
        return 0.0

    def describe(self):
        return f"{self.name} (lambda={'<fn>' if callable(self.lam) else self.lam})"


def parse_schedule(name, lam=1.0):
    """Build a :class:`ScheduleSpec` from a label.

    Accepted labels: ``const:A``, ``ramp:LIMIT,C0``, ``dec1``, ``dec2``,
    ``dec3``, ``custom:C0,C1,E``.
    """
    valid = "const:A, ramp:LIMIT[,C0], dec1, dec2, dec3, custom:C0,C1,E"
    label = name.strip()
    if label in NAMED_SCHEDULES:
        c0, c1, e = NAMED_SCHEDULES[label]
        return ScheduleSpec("decreasing", {"c0": c0, "c1": c1, "e": e},
                            lam=lam, name=label)
    if label.startswith("const:"):
        return ScheduleSpec("constant", {"alpha": float(label[6:])},
                            lam=lam, name=label)
    if label.startswith("ramp:"):
        bits = label[5:].split(",")
        limit = float(bits[0])
        c0 = float(bits[1]) if len(bits) > 1 else 10.0
        return ScheduleSpec("ramp", {"limit": limit, "c0": c0},
                            lam=lam, name=label)
    if label.startswith("custom:"):
        c0, c1, e = (float(v) for v in label[7:].split(","))
        return ScheduleSpec("decreasing", {"c0": c0, "c1": c1, "e": e},
                            lam=lam, name=label)
    raise ValueError(f"unknown schedule {name!r}; valid: {valid}")


def alpha_at(spec, n):
    """Function form of :meth:`ScheduleSpec.alpha` (accepts arrays)."""
    if np.ndim(n) == 0:
        return spec.alpha(n)
    return spec.alpha_array(np.asarray(n))


def delta_series(spec, psi, horizon):
    """Arrays ``(alpha_n, rho_n, delta_n)`` for ``n = 0 .. horizon``.

    ``delta`` has length ``horizon`` (its index ``n`` consumes
    ``alpha_{n+1}``), the other two ``horizon + 1``.
    """
    ns = np.arange(horizon + 1)
    alpha = spec.alpha_array(ns)
    if callable(spec.lam):
        lam = np.asarray([spec.lam_at(int(n)) for n in ns])
    else:
        lam = np.full(ns.shape, float(spec.lam))
    if np.any(lam <= 0):
        raise ValueError("lambda must stay positive")
    rho = psi / lam - 1.0
    a_n, a_n1 = alpha[:-1], alpha[1:]
    delta = ((1.0 - a_n) * rho[:-1]
             - a_n1 * (1.0 - a_n1) * rho[1:]
             - a_n1 * (1.0 + a_n1))
    return alpha, rho, delta


class FeasibilityReport:
    """Outcome of :func:`validate_schedule` (never raises by itself)."""

    def __init__(self, feasible, first_violation, delta_tail_min,
                 validated_from, horizon, details=None):
        self.feasible = bool(feasible)
        self.first_violation = first_violation
        self.delta_tail_min = delta_tail_min
        self.validated_from = validated_from
        self.horizon = horizon
        self.details = details or {}

    def raise_if_infeasible(self):
        if not self.feasible:
            raise FeasibilityError(self.first_violation or "schedule feasible")

    def __repr__(self):
        status = "feasible" if self.feasible else \
            f"infeasible ({self.first_violation})"
        return (f"FeasibilityReport({status}, delta_tail_min="
                f"{self.delta_tail_min:.3e}, validated_from="
                f"{self.validated_from})")


def validate_schedule(spec, cert, horizon=100000):
    """Check a schedule against a certificate's ``psi``.

    Constant schedules are decided by the exact closed form
    ``lambda < phi(alpha) * psi``.  Varying schedules are scanned over
    ``n <= horizon``: all ``rho_n`` must be nonnegative and the liminf
    surrogate ``min(delta_n, n in [horizon/2, horizon))`` must be
    positive.  ``validated_from`` is the first index from which
    ``delta_n > 0`` holds through the horizon (descent of the energy is
    only promised from there on).
    """
    psi = cert.psi if hasattr(cert, "psi") else float(cert)
    horizon = int(horizon)
    if horizon < 4:
        raise ValueError("horizon too short to say anything")

    if spec.kind == "constant" and not callable(spec.lam):
        alpha = spec.params["alpha"]
        lam = float(spec.lam)
        rho = rho_value(psi, lam)
        delta_hat = (1.0 - alpha) ** 2 * rho - alpha * (1.0 + alpha)
        feasible = lam < phi_value(alpha) * psi
        first = None if feasible else "lambda < phi(alpha)*psi"
        return FeasibilityReport(feasible, first, delta_hat,
                                 0 if feasible else None, horizon,
                                 details={"delta_hat": delta_hat,
                                          "rho": rho})

    alpha, rho, delta = delta_series(spec, psi, horizon)
    half = horizon // 2
    tail_min = float(np.min(delta[half:]))
    rho_ok = bool(np.all(rho >= 0.0))
    feasible = rho_ok and tail_min > 0.0

    first = None
    if not rho_ok:
        bad = int(np.argmax(rho < 0.0))
        first = f"rho_n >= 0 (lambda_n <= psi), first failure at n={bad}"
    elif tail_min <= 0.0:
        first = "liminf delta_n > 0"

    # earliest index from which delta stays positive through the horizon
    pos = delta > 0.0
    if pos.all():
        validated_from = 0
    elif pos[-1]:
        validated_from = int(len(pos) - np.argmin(pos[::-1]))
    else:
        validated_from = None

    details = {"tail_window": (half, horizon),
               "alpha_end": float(alpha[-1])}
    if spec.kind == "decreasing":
        details["nonincreasing"] = bool(np.all(np.diff(alpha) <= 1e-15))
        details["tail_exponent_ok"] = bool(spec.params["e"] > 1.0)
    return FeasibilityReport(feasible, first, tail_min, validated_from,
                             horizon, details)
