r"""The iteration engine shared by every method kernel.

One loop implements the inertial-relaxed warped-resolvent recursion

    y_n     = z_n + alpha_n (z_n - z_{n-1})
    (x, w)  = kernel.warp(y_n, n)
    z_{n+1} = lambda_n w + (1 - lambda_n) y_n

A :class:`MethodKernel` packages the warp step (forward evaluations,
resolvents and the correction step of a specific method) together with
the inner product of the iteration metric, so the engine itself never
needs to know which method it is running.  Stopping is by relative
error ``||z_{n+1} - z_n|| / max(||z_n||, 1)`` or an iteration cap;
non-finite iterates terminate the run with the last finite point.
"""

import time

import numpy as np

from .certificates import fejer_step
from .schedules import validate_schedule

__all__ = ["MethodKernel", "RunConfig", "IterateTrace", "relative_error",
           "run_nfb"]


def relative_error(z_new, z_old):
    """``||z_new - z_old|| / max(||z_old||, 1)`` on flat vectors."""
    return float(np.linalg.norm(z_new - z_old)
                 / max(np.linalg.norm(z_old), 1.0))


class MethodKernel:
    """A method's warp step plus its iteration metric.

    Parameters
    ----------
    name : str
    dim : int
        Length of the flat iterate.
    warp : callable
        ``warp(y, n) -> (x, w)``: the backward point ``x`` and the
        corrected point ``w`` whose relaxation produces ``z_{n+1}``.
    s_inner : callable or None
        Inner product of the iteration metric (Euclidean when None).
        Used for the Fejer monitor and the ``dz_sq`` trace column.
    meta : dict, optional
        Free-form parameters (steps, structure) recorded into outputs.
    """

    def __init__(self, name, dim, warp, s_inner=None, meta=None):
        self.name = name
        self.dim = int(dim)
        self._warp = warp
        self._s_inner = s_inner
        self.meta = dict(meta or {})

    def warp(self, y, n):
        return self._warp(y, n)

    def s_inner(self, a, b):
        if self._s_inner is None:
            return float(a @ b)
        return float(self._s_inner(a, b))

    def s_norm_sq(self, a):
        return self.s_inner(a, a)


class RunConfig:
    """Engine options.

    Parameters
    ----------
    schedule : ScheduleSpec
    max_iters : int
    rel_tol : float
        Relative-error stopping threshold.
    certificate : Certificate or None
        Needed to validate the schedule and to feed the monitor's
        ``rho_n``; may be omitted only with ``skip_validation``.
    skip_validation : bool
        Run an unvalidated schedule (explicitly opting out).
    monitor : FejerMonitor or None
    trace_every : int or None
        None keeps the default sampling: every iteration up to 100,
        then every 100th (the final iteration is always recorded).
    validation_horizon : int
    """

    def __init__(self, schedule, max_iters=100000, rel_tol=1e-6,
                 certificate=None, skip_validation=False, monitor=None,
                 trace_every=None, validation_horizon=100000):
        self.schedule = schedule
        self.max_iters = int(max_iters)
        self.rel_tol = float(rel_tol)
        self.certificate = certificate
        self.skip_validation = bool(skip_validation)
        self.monitor = monitor
        self.trace_every = trace_every
        self.validation_horizon = int(validation_horizon)
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be nonnegative")


class IterateTrace:
    """Sampled per-iteration records plus end-of-run summary fields."""

    columns = ("n", "rel_err", "dz_sq", "h", "elapsed_s")

    def __init__(self, kernel_name="", schedule_name=""):
        self.kernel_name = kernel_name
        self.schedule_name = schedule_name
        self.rows = []
        self.status = "running"
        self.iterations = 0
        self.final_rel_err = np.nan
        self.dz_sq_sum = 0.0
        self.last_dz_sq = np.nan
        self.elapsed_s = 0.0

    @property
    def converged(self):
        return self.status == "converged"

    def record(self, n, rel_err, dz_sq, h):
        self.rows.append((n, rel_err, dz_sq, h, self.elapsed_s))

    def summary(self):
        return {
            "kernel": self.kernel_name,
            "schedule": self.schedule_name,
            "status": self.status,
            "iterations": self.iterations,
            "final_rel_err": self.final_rel_err,
            "dz_sq_sum": self.dz_sq_sum,
            "last_dz_sq": self.last_dz_sq,
            "elapsed_s": self.elapsed_s,
        }

    def to_csv(self, path, metadata=None):
        """Write the sampled rows as CSV with ``# key=value`` header lines."""
        with open(path, "w") as f:
            for key, val in (metadata or {}).items():
                f.write(f"# {key}={val}\n")
            f.write(",".join(self.columns) + "\n")
            for row in self.rows:
                f.write(",".join(f"{v:.12g}" if isinstance(v, float)
                                 else str(v) for v in row) + "\n")


def run_nfb(kernel, z0, z_minus1, config):
    """Run the inertial-relaxed iteration; returns ``(z, trace)``.

    ``z0`` and ``z_minus1`` seed the inertia (pass the same point for a
    cold start).  The schedule is validated against the certificate
    before the first step unless the config explicitly opts out.
    """
    z = np.array(z0, dtype=np.float64).ravel()
    z_prev = np.array(z_minus1, dtype=np.float64).ravel()
    if z.shape != (kernel.dim,) or z_prev.shape != (kernel.dim,):
        raise ValueError(
            f"start points must have length {kernel.dim}, got "
            f"{z.shape} and {z_prev.shape}")

    sched = config.schedule
    cert = config.certificate
    if not config.skip_validation:
        if cert is None:
            raise ValueError(
                "no certificate given; pass one or set skip_validation")
        validate_schedule(sched, cert,
                          config.validation_horizon).raise_if_infeasible()

    monitor = config.monitor
    if monitor is not None and cert is None:
        raise ValueError("the Fejer monitor needs a certificate (for psi)")
    psi = cert.psi if cert is not None else np.nan

    # fast paths for the common constant-parameter case
    const_alpha = sched.params["alpha"] if sched.kind == "constant" else None
    const_lam = None if callable(sched.lam) else float(sched.lam)

    trace = IterateTrace(kernel.name, getattr(sched, "name", ""))
    every = config.trace_every
    t0 = time.perf_counter()
    trace.status = "max_iters"
    last_row = None

    for n in range(config.max_iters):
        a_n = const_alpha if const_alpha is not None else sched.alpha(n)
        lam_n = const_lam if const_lam is not None else sched.lam_at(n)

        y = z + a_n * (z - z_prev) if a_n != 0.0 else z
        x, w = kernel.warp(y, n)
        z_next = lam_n * w + (1.0 - lam_n) * y if lam_n != 1.0 else w

        if not np.all(np.isfinite(z_next)):
            trace.status = "diverged"
            trace.iterations = n + 1
            trace.elapsed_s = time.perf_counter() - t0
            trace.record(n, np.inf, np.nan, np.nan)
            return z, trace

        rel = relative_error(z_next, z)
        dz_sq = kernel.s_norm_sq(z_next - z)
        trace.dz_sq_sum += dz_sq
        trace.last_dz_sq = dz_sq

        h = np.nan
        if monitor is not None:
            a_n1 = (const_alpha if const_alpha is not None
                    else sched.alpha(n + 1))
            lam_n1 = const_lam if const_lam is not None \
                else sched.lam_at(n + 1)
            rep = fejer_step(monitor, n, z, z_prev, z_next,
                             a_n, a_n1, psi / lam_n - 1.0,
                             psi / lam_n1 - 1.0)
            h = rep.h

        trace.iterations = n + 1
        trace.final_rel_err = rel
        trace.elapsed_s = time.perf_counter() - t0
        sampled = (n % every == 0) if every else (n <= 100 or n % 100 == 0)
        last_row = (n, rel, dz_sq, h)
        if sampled:
            trace.record(*last_row)
            last_row = None

        z_prev = z
        z = z_next
        if rel < config.rel_tol:
            trace.status = "converged"
            break

    if last_row is not None:  # make sure the final step is in the trace
        trace.record(*last_row)
    trace.elapsed_s = time.perf_counter() - t0
    return z, trace
