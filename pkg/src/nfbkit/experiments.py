r"""Benchmark problems: constrained least squares and image restoration.

Two reproducible problem generators plus the glue that turns them into
:class:`~nfbkit.operators.SplitProblem` instances and benchmark runs.

**Constrained least squares.**  ``min 0.5*||M x - b||^2`` over the box
``[0, 1]^n`` intersected with ``R x <= 0``.  Adjoining the multiplier
``u`` of the inequality block gives a monotone inclusion on the stacked
``(x, u)`` whose cocoercive part is the least-squares gradient and
whose Lipschitz part is the skew constraint coupling — the natural
forward-backward-half-forward testbed.  The generator draws ``M, R``
standard normal and ``b = M x* + noise`` with ``x*`` uniform in the
box; the noise is scaled relative to the per-entry signal level and is
large enough by default to keep the unconstrained fit infeasible, which
pins the minimizer to a unique vertex-adjacent face (many active
bounds).  Uniqueness is what makes cross-method solution agreement a
meaningful test; :func:`reference_solution` certifies it per instance
by an active-set polish.

**Image restoration.**  ``min 0.5*||T x - z||^2 + mu1*||grad x||_1 +
mu2*Huber_delta(W x)`` over images in ``[0, 1]``, with ``T`` a
normalized blur (``||T|| = 1``), ``grad`` the forward-difference
gradient and ``W`` an orthonormal Haar transform.  The observation is
``z = T x_true + noise``.  The smooth-but-only-Lipschitz wavelet term
(constant ``mu2/delta``) is what rules out plain primal-dual splittings
and exercises the four-block kernel.
"""

import math
import time
from typing import NamedTuple

import numpy as np

from .certificates import FeasibilityError
from .engine import RunConfig, run_nfb
from .linalg import (as_image, averaging_kernel, blur_apply, blur_operator,
                     gaussian3_kernel, gradient_operator, haar_operator,
                     matrix_operator)
from .methods import KERNELS, initialize_fpdhf, kernel_by_name, make_kernel
from .operators import (Resolvent, SmoothMap, SplitProblem, box_resolvent,
                        inverse_resolvent, l1_resolvent,
                        least_squares_gradient, project_box, project_nonneg,
                        skew_constraint_map)
from .schedules import ScheduleSpec, parse_schedule

__all__ = [
    "QpConfig", "QpInstance", "gen_qp", "qp_problem", "qp_objective",
    "kkt_residual", "reference_solution", "resolve_alpha_label",
    "qp_variant_run", "run_qp_bench",
    "RestoreConfig", "RestoreInstance", "synthetic_image", "gen_restore",
    "restore_problem", "restore_objective", "psnr", "run_restore",
    "BLUR_KERNELS", "random_problem", "run_equivalence",
]


# ---------------------------------------------------------------------------
# constrained least squares
# ---------------------------------------------------------------------------

class QpConfig(NamedTuple):
    """Instance dimensions and sampling knobs (``n >= m >= 1``)."""
    n: int = 200
    m: int = 100
    p: int = 20
    seed: int = 0
    noise_rel: float = 0.5   # noise std relative to the fit's per-entry std
    rank_tol: float = 1e-8   # resample when min singular value dips below
                             # rank_tol * max singular value


class QpInstance(NamedTuple):
    m_mat: np.ndarray
    r_mat: np.ndarray
    b: np.ndarray
    x_star: np.ndarray
    norm_m: float
    norm_r: float
    meta: dict

    @property
    def beta(self):
        return 1.0 / self.norm_m**2

    @property
    def zeta(self):
        return self.norm_r


def gen_qp(cfg):
    """Sample a constrained least-squares instance (deterministic in seed).

    ``M`` is redrawn (with a derived seed, recorded in the metadata)
    whenever it is rank deficient, so the data term always has full row
    rank.
    """
    n, m, p = cfg.n, cfg.m, cfg.p
    if not (n >= m >= 1 and p >= 1):
        raise ValueError(f"need n >= m >= 1 and p >= 1, got {(n, m, p)}")
    seed = cfg.seed
    resamples = 0
    while True:
        rng = np.random.default_rng(seed)
        m_mat = rng.standard_normal((m, n))
        r_mat = rng.standard_normal((p, n))
        x_star = rng.uniform(0.0, 1.0, n)
        svals = np.linalg.svd(m_mat, compute_uv=False)
        if svals[-1] > cfg.rank_tol * svals[0]:
            break
        seed += 1_000_003  # deterministic resample stream
        resamples += 1
    fit = m_mat @ x_star
    noise_std = cfg.noise_rel * float(np.std(fit))
    b = fit + noise_std * rng.standard_normal(m)
    meta = {"config": cfg._asdict(), "seed_used": seed,
            "resamples": resamples, "noise_std": noise_std,
            "norm_m": float(svals[0]),
            "norm_r": float(np.linalg.norm(r_mat, 2))}
    return QpInstance(m_mat=m_mat, r_mat=r_mat, b=b, x_star=x_star,
                      norm_m=meta["norm_m"], norm_r=meta["norm_r"],
                      meta=meta)


def qp_problem(inst):
    """Stacked-variable :class:`SplitProblem` for an instance.

    The flat iterate is ``[x (n), u (p)]``; ``A`` is the product of the
    box and nonnegative-orthant normal cones, ``C`` the least-squares
    gradient acting on the ``x`` block, ``D`` the skew constraint
    coupling.
    """
    n = inst.m_mat.shape[1]
    p = inst.r_mat.shape[0]
    ls = least_squares_gradient(inst.m_mat, inst.b, norm_m=inst.norm_m)

    def res_a(z, s):
        return np.concatenate([project_box(z[:n], 0.0, 1.0),
                               project_nonneg(z[n:])])

    def coco(z):
        return np.concatenate([ls(z[:n]), np.zeros(p)])

    return SplitProblem(
        n + p,
        Resolvent(res_a, name="box x nonneg"),
        smooth_coco=SmoothMap(coco, inst.beta, "cocoercive",
                              name="least-squares"),
        smooth_lip=skew_constraint_map(inst.r_mat, norm_r=inst.norm_r),
        name="constrained-least-squares")


def qp_objective(inst, x):
    r = inst.m_mat @ x - inst.b
    return 0.5 * float(r @ r)


def kkt_residual(inst, x, u, step=1.0):
    """Natural residual of the stacked inclusion at step ``step`` (inf-norm).

    ``max(||x - P_box(x - step*g)||, ||u - P_+(u + step*R x)||)`` with
    ``g = M^T(M x - b) + R^T u``; zero exactly at solutions, for every
    positive step.
    """
    g = inst.m_mat.T @ (inst.m_mat @ x - inst.b) + inst.r_mat.T @ u
    rx = float(np.abs(x - project_box(x - step * g, 0.0, 1.0)).max())
    ru = float(np.abs(u - project_nonneg(u + step * (inst.r_mat @ x))).max())
    return max(rx, ru)


def reference_solution(inst, run_tol=1e-8, max_iters=200000,
                       residual_tol=1e-9):
    """High-accuracy ``(x, u)`` via splitting run + active-set polish.

    A plain (no inertia) run identifies the active sets; the
    equality-constrained least-squares KKT system on the free variables
    is then solved directly and the result verified: stationarity,
    feasibility, multiplier signs and strict complementarity margins
    all have to pass, otherwise the run is refined and the polish
    retried.  Returns ``(x, u, info)`` where ``info`` records the KKT
    residual of the polished point and whether the instance's solution
    is certified unique (injectivity of the data block on the free
    face).
    """
    n = inst.m_mat.shape[1]
    z, trace = qp_variant_run(inst, "const:0", rel_tol=run_tol,
                              max_iters=max_iters)
    for attempt in range(3):
        x, u = z[:n], z[n:]
        out = _polish_qp(inst, x, u)
        if out is not None and out[2]["kkt_residual"] <= residual_tol:
            return out
        # refine: keep iterating from where we stopped, 10x tighter
        run_tol *= 0.1
        z, trace = qp_variant_run(inst, "const:0", rel_tol=run_tol,
                                  max_iters=max_iters, z0=z)
    x, u = z[:n], z[n:]
    info = {"polished": False, "unique": False,
            "kkt_residual": kkt_residual(inst, x, u)}
    return x, u, info


def _polish_qp(inst, x, u, act_tol=1e-5, mult_tol=1e-7, max_passes=50):
    m_mat, r_mat, b = inst.m_mat, inst.r_mat, inst.b
    act0 = x < act_tol
    act1 = x > 1.0 - act_tol
    act_r = u > mult_tol          # rows with strictly positive multiplier
    swap_tol = 1e-10              # active-set update threshold

    for _ in range(max_passes):
        out = _solve_qp_face(inst, act0, act1, act_r)
        if out is None:
            return None
        x_hat, u_hat, g = out
        free = ~(act0 | act1)
        # wrong-sign multipliers leave the active set, violated
        # constraints enter; repeat until the face is stationary
        drop0 = act0 & (g < -swap_tol)
        drop1 = act1 & (g > swap_tol)
        add0 = free & (x_hat < -swap_tol)
        add1 = free & (x_hat > 1.0 + swap_tol)
        drop_r = act_r & (u_hat < -swap_tol)
        add_r = ~act_r & (r_mat @ x_hat > swap_tol)
        if not (drop0.any() or drop1.any() or add0.any() or add1.any()
                or drop_r.any() or add_r.any()):
            break
        act0 = (act0 & ~drop0) | add0
        act1 = (act1 & ~drop1) | add1
        act_r = (act_r & ~drop_r) | add_r
    else:
        return None

    # verify the polished point actually is the solution
    free = ~(act0 | act1)
    nf, na = int(free.sum()), int(act_r.sum())
    checks = (
        x_hat[free].min() >= -1e-9 if nf else True,
        x_hat[free].max() <= 1.0 + 1e-9 if nf else True,
        (r_mat @ x_hat).max() <= 1e-8,
        u_hat.min() >= -1e-9,
        np.all(g[act0] >= -1e-9),
        np.all(g[act1] <= 1e-9),
        np.all(np.abs(g[free]) <= 1e-9) if nf else True,
    )
    if not all(checks):
        return None
    res = kkt_residual(inst, np.clip(x_hat, 0.0, 1.0),
                       np.maximum(u_hat, 0.0))
    stacked = (np.vstack([m_mat[:, free], r_mat[act_r][:, free]])
               if na else m_mat[:, free])
    unique = nf == 0 or np.linalg.matrix_rank(stacked) == nf
    info = {"polished": True, "unique": bool(unique),
            "kkt_residual": res, "n_free": nf,
            "n_active_rows": na,
            "n_active_bounds": int(act0.sum() + act1.sum())}
    return np.clip(x_hat, 0.0, 1.0), np.maximum(u_hat, 0.0), info


def _solve_qp_face(inst, act0, act1, act_r):
    """Equality-constrained solve on a candidate active face.

    Fixes ``x`` at its active bounds, forces the selected rows of ``R``
    to be tight, and solves the stationarity system for the free block
    and multipliers.  Returns ``(x, u, gradient-of-Lagrangian-x-part)``
    or None when the face system is singular.
    """
    m_mat, r_mat, b = inst.m_mat, inst.r_mat, inst.b
    free = ~(act0 | act1)
    x_fix = np.where(act1, 1.0, 0.0)
    mf = m_mat[:, free]
    raf = r_mat[act_r][:, free]
    nf, na = int(free.sum()), int(act_r.sum())
    kkt = np.block([[mf.T @ mf, raf.T],
                    [raf, np.zeros((na, na))]])
    rhs = np.concatenate([mf.T @ (b - m_mat @ x_fix),
                          -(r_mat[act_r] @ x_fix)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    if np.linalg.norm(kkt @ sol - rhs) > 1e-8 * max(np.linalg.norm(rhs), 1.0):
        return None
    x_hat = x_fix.copy()
    x_hat[free] = sol[:nf]
    u_hat = np.zeros(r_mat.shape[0])
    u_hat[act_r] = sol[nf:]
    g = m_mat.T @ (m_mat @ x_hat - b) + r_mat.T @ u_hat
    return x_hat, u_hat, g


def resolve_alpha_label(label, cert, lam=1.0):
    """Turn a schedule label into a :class:`ScheduleSpec`.

    Besides the labels of :func:`~nfbkit.schedules.parse_schedule`, the
    form ``opt:F`` is accepted: constant inertia at the fraction ``F``
    of the certificate's inertia sup at its relaxation.
    """
    if label.startswith("opt:"):
        frac = float(label[4:])
        if not 0.0 <= frac < 1.0:
            raise ValueError("opt fraction must lie in [0, 1)")
        return ScheduleSpec("constant",
                            {"alpha": frac * cert.alpha_sup},
                            lam=cert.lam, name=label)
    return parse_schedule(label, lam=lam)


def qp_variant_run(inst, schedule_label, lam=1.0, t=0.5, kappa1=0.5,
                   rel_tol=1e-6, max_iters=100000, z0=None, monitor=None,
                   trace_every=None, crossing=1e-6):
    """Run one half-forward variant on an instance.

    The step is initialized from the instance constants (``tau =
    kappa1 * chi``, ``epsilon = t * eps_bar``); the inertia schedule
    comes from ``schedule_label`` (see :func:`resolve_alpha_label`).
    Returns ``(z, trace)``; the trace's summary gains a
    ``crossing_iteration`` entry with the first index at which the
    relative error dropped below ``crossing``.
    """
    problem = qp_problem(inst)
    init = initialize_fpdhf(problem.beta, problem.zeta, 0.0, t=t,
                            kappa1=kappa1, kappa2=0.0, scenario=2,
                            chosen=lam, partner=0.0)
    sched = resolve_alpha_label(schedule_label, init.certificate, lam=lam)
    kernel = make_kernel(problem, init.tau)
    if z0 is None:
        z0 = np.zeros(kernel.dim)
    cfg = RunConfig(sched, max_iters=max_iters, rel_tol=rel_tol,
                    certificate=init.certificate, monitor=monitor,
                    trace_every=trace_every)
    z, trace = run_nfb(kernel, z0, z0, cfg)
    trace.crossing_iteration = _crossing_index(trace, crossing)
    trace.init = init
    return z, trace


def _crossing_index(trace, level):
    for row in trace.rows:
        if row[1] < level:
            return row[0]
    return None


def run_qp_bench(cfg, schedules=("const:0", "opt:0.99", "dec2"),
                 seeds=(1, 2, 3, 4, 5), lam=1.0, t=0.5, kappa1=0.5,
                 rel_tol=1e-6, max_iters=100000):
    """Benchmark grid: schedules x seeds on fresh instances.

    Returns a list of row dicts (one per run) and an aggregate dict
    keyed by schedule with mean iterations/time over converged runs and
    the failure count.  Runs are executed in a deterministic order and
    are independent, so any execution order yields the same rows.
    """
    rows = []
    for seed in sorted(seeds):
        inst = gen_qp(cfg._replace(seed=seed))
        for label in schedules:
            start = time.perf_counter()
            z, trace = qp_variant_run(inst, label, lam=lam, t=t,
                                      kappa1=kappa1, rel_tol=rel_tol,
                                      max_iters=max_iters)
            elapsed = time.perf_counter() - start
            n = inst.m_mat.shape[1]
            rows.append({
                "method": "fbhf", "schedule": label, "seed": seed,
                "lambda": lam, "t": t, "kappa1": kappa1,
                "status": trace.status,
                "iterations": trace.iterations,
                "rel_err": trace.final_rel_err,
                "kkt_residual": kkt_residual(inst, z[:n], z[n:]),
                "objective": qp_objective(inst, z[:n]),
                "time_s": elapsed,
            })
    agg = {}
    for label in schedules:
        sub = [r for r in rows if r["schedule"] == label]
        conv = [r for r in sub if r["status"] == "converged"]
        agg[label] = {
            "runs": len(sub),
            "converged": len(conv),
            "failures": len(sub) - len(conv),
            "mean_iterations_converged":
                float(np.mean([r["iterations"] for r in conv]))
                if conv else math.nan,
            "mean_time_s_converged":
                float(np.mean([r["time_s"] for r in conv]))
                if conv else math.nan,
            "mean_iterations_all":
                float(np.mean([r["iterations"] for r in sub])),
        }
    return rows, agg


# ---------------------------------------------------------------------------
# method-equivalence harness
# ---------------------------------------------------------------------------

def random_problem(primal_dim, dual_dim, blocks=frozenset({"C", "D", "L"}),
                   seed=0):
    """Random monotone problem with the requested structural blocks.

    ``A`` is the box ``[-1, 1]`` normal cone; ``C`` a random
    least-squares gradient; ``D`` a random skew (hence monotone) linear
    map; ``L`` a random coupling with ``B`` the l1 norm on the dual.
    Dimensions are kept small by the callers; this exists to compare
    method routes on shared data, not as a benchmark.
    """
    bad = set(blocks) - {"C", "D", "L"}
    if bad:
        raise ValueError(f"unknown blocks {sorted(bad)}")
    rng = np.random.default_rng(seed)
    coco = lip = coupling = res_b = None
    if "C" in blocks:
        m = rng.standard_normal((primal_dim, primal_dim)) / math.sqrt(
            primal_dim)
        coco = least_squares_gradient(m, rng.standard_normal(primal_dim))
    if "D" in blocks:
        g = rng.standard_normal((primal_dim, primal_dim)) / math.sqrt(
            primal_dim)
        s = 0.5 * (g - g.T)
        lip = SmoothMap(lambda x, s=s: s @ x,
                        float(np.linalg.norm(s, 2)), "lipschitz",
                        name="random-skew")
    if "L" in blocks:
        lmat = rng.standard_normal((dual_dim, primal_dim)) / math.sqrt(
            primal_dim)
        coupling = matrix_operator(lmat, name="random-coupling",
                                   norm_bound=float(np.linalg.norm(lmat, 2)))
        res_b = inverse_resolvent(l1_resolvent(1.0))
    return SplitProblem(primal_dim, box_resolvent(-1.0, 1.0),
                        smooth_coco=coco, smooth_lip=lip, coupling=coupling,
                        resolvent_b_inv=res_b,
                        name="random-" + "+".join(sorted(blocks)))


def _pad_zero_coupling(problem, dual_dim):
    """Attach an all-zero coupling block (plus an inert ``B``).

    A general primal-dual kernel on the padded problem reproduces the
    primal-only dynamics coordinate by coordinate, which is what the
    structural-collapse checks compare.
    """
    zero = matrix_operator(np.zeros((dual_dim, problem.dim)),
                           name="zero-coupling", norm_bound=0.0)
    return SplitProblem(problem.dim, problem.resolvent_a,
                        smooth_coco=problem.smooth_coco,
                        smooth_lip=problem.smooth_lip,
                        coupling=zero,
                        resolvent_b_inv=inverse_resolvent(l1_resolvent(1.0)),
                        name=problem.name + "+zero-coupling")


def run_equivalence(pair=("fpdhf", "fpdhf-oracle"), primal_dim=20,
                    dual_dim=8, seeds=range(10), iters=200, t=0.9,
                    kappa1=0.5, kappa2=0.5, lam=0.9, alpha=0.1):
    """Trajectory deviation between two method routes on shared data.

    The problem structure is the union of what the two methods require;
    a specialized method whose structure does not match raises (the two
    methods would not be solving the same inclusion).  General
    primal-dual methods run on a zero-coupling padding when the base
    problem has no coupling; only the primal block is compared in that
    case.  Returns a dict with per-seed final-iterate deviations (inf
    norm) and their max.
    """
    name_a, name_b = pair
    for nm in pair:
        if nm not in KERNELS:
            raise ValueError(f"unknown method {nm!r}; "
                             f"choose from {sorted(KERNELS)}")
    req = [KERNELS[nm][1] for nm in pair]
    base = (set(req[0]) if req[0] is not None else set()) | \
           (set(req[1]) if req[1] is not None else set())
    if not base:
        base = {"C", "D", "L"}
    for nm, r in zip(pair, req):
        if r is not None and set(r) != base:
            raise ValueError(
                f"{name_a} and {name_b} need incompatible problem "
                f"structure ({sorted(base)} vs {sorted(r)})")
    has_l = "L" in base
    devs = []
    for seed in seeds:
        problem = random_problem(primal_dim, dual_dim if has_l else 0,
                                 base, seed)
        explicit = {}
        if not problem.has_coco and not problem.has_lip:
            # chi is infinite for a purely proximal problem; any step
            # with sigma*tau*||L||^2 < 1 works
            step = 0.5 / max(problem.norm_coupling, 1.0)
            explicit = {"tau": step, "sigma": step}
        init = initialize_fpdhf(problem.beta, problem.zeta,
                                problem.norm_coupling, t=t, kappa1=kappa1,
                                kappa2=kappa2 if has_l else 0.0,
                                scenario=2, chosen=lam, partner=alpha,
                                **explicit)
        padded = None if has_l else _pad_zero_coupling(problem, dual_dim)
        rng = np.random.default_rng(seed + 7591)
        x0 = rng.standard_normal(primal_dim)
        u0 = (rng.standard_normal(problem.dual_dim) if has_l
              else np.zeros(dual_dim))
        sched = ScheduleSpec("constant", {"alpha": alpha}, lam=lam,
                             name=f"const:{alpha:g}")
        finals = []
        for nm in pair:
            takes_sigma = KERNELS[nm][2]
            prob_nm = problem
            sigma = init.sigma
            if takes_sigma and not has_l:
                prob_nm = padded
                sigma = 1.0   # inert: the coupling block is zero
            kern = kernel_by_name(nm, prob_nm, init.tau,
                                  sigma if takes_sigma else None)
            z0 = (np.concatenate([x0, u0]) if kern.dim > primal_dim
                  else x0.copy())
            cfg = RunConfig(sched, max_iters=iters, rel_tol=0.0,
                            certificate=init.certificate)
            z, _ = run_nfb(kern, z0, z0, cfg)
            finals.append(z)
        za, zb = finals
        dev = float(np.abs(za[:primal_dim] - zb[:primal_dim]).max())
        if za.shape == zb.shape and za.shape[0] > primal_dim:
            dev = float(np.abs(za - zb).max())
        devs.append(dev)
    return {"pair": tuple(pair), "blocks": "+".join(sorted(base)),
            "iterations": iters, "primal_dim": primal_dim,
            "dual_dim": dual_dim if has_l else 0,
            "deviations": devs, "max_deviation": max(devs)}


# ---------------------------------------------------------------------------
# image restoration
# ---------------------------------------------------------------------------

BLUR_KERNELS = {
    "avg3": lambda: averaging_kernel(3),
    "avg9": lambda: averaging_kernel(9),
    "gauss3": lambda: gaussian3_kernel(0.5),
}


class RestoreConfig(NamedTuple):
    n: int = 64
    kernel: str = "avg3"
    noise_std: float = 1e-3
    mu1: float = 1e-2      # total-variation weight
    mu2: float = 1e-3      # wavelet Huber weight
    delta: float = 1e-2    # Huber threshold; zeta = mu2/delta
    haar_level: int = 3
    seed: int = 0


class RestoreInstance(NamedTuple):
    x_true: np.ndarray
    observed: np.ndarray
    kernel: np.ndarray
    meta: dict


def synthetic_image(n):
    """Deterministic piecewise phantom in ``[0, 1]`` with edges and texture."""
    t = np.linspace(0.0, 1.0, n)
    xx, yy = np.meshgrid(t, t)
    img = 0.25 + 0.4 * xx
    img[(yy > 0.12) & (yy < 0.45) & (xx > 0.08) & (xx < 0.42)] = 0.95
    img[((yy - 0.72) ** 2 + (xx - 0.28) ** 2) < 0.18 ** 2] = 0.05
    stripes = (yy > 0.55) & (xx > 0.55)
    img[stripes] = 0.5 + 0.45 * np.sign(np.sin((xx[stripes] + yy[stripes])
                                               * n * np.pi / 3.0))
    img[(yy < 0.08)] = 0.9
    return np.clip(img, 0.0, 1.0)


def gen_restore(cfg):
    """Blur + noise observation of the synthetic phantom."""
    if cfg.kernel not in BLUR_KERNELS:
        raise ValueError(f"unknown kernel {cfg.kernel!r}; "
                         f"choose from {sorted(BLUR_KERNELS)}")
    if cfg.n % (2 ** cfg.haar_level):
        raise ValueError("image size must be divisible by 2**haar_level")
    x_true = synthetic_image(cfg.n)
    k = BLUR_KERNELS[cfg.kernel]()
    rng = np.random.default_rng(cfg.seed)
    observed = blur_apply(x_true, k) + cfg.noise_std * rng.standard_normal(
        (cfg.n, cfg.n))
    meta = {"config": cfg._asdict()}
    return RestoreInstance(x_true=x_true, observed=observed, kernel=k,
                           meta=meta)


def restore_problem(inst, cfg):
    """Four-block :class:`SplitProblem` on the flat image vector.

    ``A``: box constraint prox; ``B``: l1 on the gradient pair field
    (entering through the resolvent of ``sigma*B^{-1}``, i.e. the
    conjugate route); ``C``: data-term gradient through the blur
    (``beta = 1`` since ``||T|| = 1``); ``D``: Huber-smoothed wavelet
    penalty gradient (``zeta = mu2/delta``); ``L``: discrete gradient.
    """
    n = cfg.n
    nn = n * n
    blur = blur_operator((n, n), inst.kernel, norm_bound=1.0)
    grad = gradient_operator((n, n))
    haar = haar_operator((n, n), cfg.haar_level)
    zobs = inst.observed.ravel()

    def data_grad(x):
        return blur.adjoint(blur.apply(x) - zobs)

    coco = SmoothMap(data_grad, 1.0, "cocoercive", name="blur-data")

    def huber_grad_w(x):
        from .operators import huber_gradient
        return cfg.mu2 * haar.adjoint(huber_gradient(haar.apply(x),
                                                     cfg.delta))

    lip = SmoothMap(huber_grad_w, cfg.mu2 / cfg.delta, "lipschitz",
                    name="wavelet-huber")
    return SplitProblem(
        nn,
        box_resolvent(0.0, 1.0),
        smooth_coco=coco,
        smooth_lip=lip,
        coupling=grad,
        resolvent_b_inv=inverse_resolvent(l1_resolvent(cfg.mu1)),
        name="tv-wavelet-restoration")


def restore_objective(inst, cfg, x_img):
    """The variational objective at an image (flat or 2-D input)."""
    from .linalg import discrete_gradient, haar_transform
    from .operators import huber_value
    x = as_image(np.reshape(x_img, inst.x_true.shape))
    resid = blur_apply(x, inst.kernel) - inst.observed
    tv = float(np.abs(discrete_gradient(x)).sum())
    hub = huber_value(haar_transform(x, cfg.haar_level).ravel(), cfg.delta)
    return 0.5 * float(np.sum(resid * resid)) + cfg.mu1 * tv + cfg.mu2 * hub


def psnr(x, ref):
    """Peak signal-to-noise ratio in dB for ``[0, 1]`` images.

    Returns ``inf`` for an exact match.
    """
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError("shape mismatch")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def run_restore(cfg, t=0.999, kappa1=0.17, kappa2=0.99, lam=1.0,
                alpha=None, rel_tol=1e-6, max_iters=50000, monitor=None,
                trace_every=None):
    """Restore the synthetic observation with the four-block kernel.

    ``alpha=None`` takes the scenario-2 midpoint.  Returns a dict with
    the restored image, PSNR bookkeeping and the run trace.
    """
    inst = gen_restore(cfg)
    problem = restore_problem(inst, cfg)
    init = initialize_fpdhf(problem.beta, problem.zeta,
                            problem.norm_coupling, t=t, kappa1=kappa1,
                            kappa2=kappa2, scenario=2, chosen=lam,
                            partner=alpha)
    kernel = make_kernel(problem, init.tau, init.sigma)
    nn = cfg.n * cfg.n
    x0 = inst.observed.ravel()
    z0 = np.concatenate([x0, np.zeros(2 * nn)])
    run_cfg = RunConfig(ScheduleSpec("constant", {"alpha": init.alpha},
                                     lam=init.lam, name=f"const:{init.alpha:.4g}"),
                        max_iters=max_iters, rel_tol=rel_tol,
                        certificate=init.certificate, monitor=monitor,
                        trace_every=trace_every)
    start = time.perf_counter()
    z, trace = run_nfb(kernel, z0, z0, run_cfg)
    elapsed = time.perf_counter() - start
    restored = np.clip(z[:nn].reshape(cfg.n, cfg.n), 0.0, 1.0)
    return {
        "instance": inst,
        "init": init,
        "restored": restored,
        "trace": trace,
        "psnr_observed": psnr(np.clip(inst.observed, 0.0, 1.0), inst.x_true),
        "psnr_restored": psnr(restored, inst.x_true),
        "objective_observed": restore_objective(
            inst, cfg, np.clip(inst.observed, 0.0, 1.0)),
        "objective_restored": restore_objective(inst, cfg, restored),
        "time_s": elapsed,
    }
