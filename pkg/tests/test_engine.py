"""The shared iteration loop: recursion, stopping, tracing, monitoring."""

import numpy as np
import pytest

from nfbkit.certificates import (FeasibilityError, FejerMonitor,
                                 make_certificate)
from nfbkit.engine import (IterateTrace, MethodKernel, RunConfig,
                           relative_error, run_nfb)
from nfbkit.schedules import ScheduleSpec, parse_schedule


def _kernel(factor=0.5, dim=1, name="halve"):
    """Toy warp w = factor * y: the iteration contracts to 0."""
    return MethodKernel(name, dim, lambda y, n: (factor * y, factor * y))


def _config(alpha=0.3, lam=0.8, **kw):
    cert = make_certificate(0.0, 0.5, lam, alpha)
    assert cert.feasible
    sched = ScheduleSpec("constant", {"alpha": alpha}, lam=lam)
    return RunConfig(sched, certificate=cert, **kw)


def test_relative_error_frozen():
    assert relative_error(np.array([3.0, 4.0]), np.array([0.0, 0.0])) == 5.0
    assert relative_error(np.array([4.0]), np.array([2.0])) == 1.0
    assert relative_error(np.array([0.0]), np.array([-10.0])) == 1.0


def test_recursion_matches_hand_loop():
    """The engine must realize exactly y = z + a dz, z+ = lam w + (1-lam) y."""
    factor, alpha, lam = 0.5, 0.3, 0.8
    kernel = _kernel(factor)
    z, trace = run_nfb(kernel, [1.0], [1.0],
                       _config(alpha, lam, max_iters=40, rel_tol=0.0))
    zc, zp = 1.0, 1.0
    for _ in range(40):
        y = zc + alpha * (zc - zp)
        w = factor * y
        zn = lam * w + (1.0 - lam) * y
        zp, zc = zc, zn
    assert abs(z[0] - zc) < 1e-15 * max(1.0, abs(zc))
    assert trace.status == "max_iters" and trace.iterations == 40


def test_fixed_point_absorbed_bitwise():
    """A warp pinned at z* with lam = 1 must hold z* exactly."""
    zstar = np.array([0.8414709848078965])   # nothing special, just ugly
    kernel = MethodKernel("pin", 1, lambda y, n: (zstar, zstar))
    sched = ScheduleSpec("constant", {"alpha": 0.2}, lam=1.0)
    cert = make_certificate(0.0, 0.5, 1.0, 0.2)
    z, trace = run_nfb(kernel, zstar, zstar,
                       RunConfig(sched, certificate=cert, max_iters=50,
                                 rel_tol=0.0))
    assert z[0] == zstar[0]   # bitwise: lam = 1 short-circuits the blend
    assert trace.dz_sq_sum == 0.0


def test_unit_relaxation_returns_w_exactly():
    # with alpha = 0 and lam = 1 the iterate is w_n, so z_n = 0.7^n
    kernel = _kernel(0.7)
    sched = ScheduleSpec("constant", {"alpha": 0.0}, lam=1.0)
    cert = make_certificate(0.0, 0.5, 1.0, 0.0)
    z, _ = run_nfb(kernel, [1.0], [1.0],
                   RunConfig(sched, certificate=cert, max_iters=10,
                             rel_tol=0.0))
    want = 1.0
    for _ in range(10):
        want = 0.7 * want
    assert z[0] == want


def test_statuses():
    z, t = run_nfb(_kernel(0.5), [1.0], [1.0],
                   _config(max_iters=1000, rel_tol=1e-10))
    assert t.status == "converged" and t.converged
    assert t.final_rel_err < 1e-10
    assert t.iterations < 1000

    z, t = run_nfb(_kernel(0.5), [1.0], [1.0],
                   _config(max_iters=5, rel_tol=0.0))
    assert t.status == "max_iters" and t.iterations == 5

    blow = MethodKernel("blow", 1,
                        lambda y, n: (y, np.full_like(y, np.inf)
                                      if n > 2 else y * 2))
    z, t = run_nfb(blow, [1.0], [1.0], _config(max_iters=100, rel_tol=0.0))
    assert t.status == "diverged"
    assert np.all(np.isfinite(z))          # last finite iterate returned
    assert t.rows[-1][1] == np.inf         # rel_err column flags the blowup


def test_trace_sampling_default_and_override():
    _, t = run_nfb(_kernel(0.999), [1.0], [1.0],
                   _config(max_iters=350, rel_tol=0.0))
    ns = [r[0] for r in t.rows]
    assert ns[:101] == list(range(101))         # dense head
    assert ns[101:] == [200, 300, 349]          # sparse tail + final
    _, t = run_nfb(_kernel(0.999), [1.0], [1.0],
                   _config(max_iters=350, rel_tol=0.0, trace_every=50))
    assert [r[0] for r in t.rows] == [0, 50, 100, 150, 200, 250, 300, 349]
    # a final row that lands on the sampling grid is not duplicated
    _, t = run_nfb(_kernel(0.999), [1.0], [1.0],
                   _config(max_iters=301, rel_tol=0.0, trace_every=50))
    assert [r[0] for r in t.rows] == [0, 50, 100, 150, 200, 250, 300]


def test_trace_csv_roundtrip(tmp_path):
    _, t = run_nfb(_kernel(0.5), [1.0], [1.0],
                   _config(max_iters=30, rel_tol=0.0))
    path = tmp_path / "trace.csv"
    t.to_csv(path, metadata={"kernel": t.kernel_name, "seed": 7})
    lines = path.read_text().splitlines()
    assert lines[0] == "# kernel=halve"
    assert lines[1] == "# seed=7"
    assert lines[2] == "n,rel_err,dz_sq,h,elapsed_s"
    assert len(lines) == 3 + len(t.rows)
    first = lines[3].split(",")
    assert first[0] == "0" and float(first[1]) > 0


def test_summary_fields():
    _, t = run_nfb(_kernel(0.5), [1.0], [1.0],
                   _config(max_iters=25, rel_tol=0.0))
    s = t.summary()
    assert s["kernel"] == "halve" and s["iterations"] == 25
    assert s["status"] == "max_iters"
    assert s["dz_sq_sum"] == pytest.approx(t.dz_sq_sum)
    assert set(s) == {"kernel", "schedule", "status", "iterations",
                      "final_rel_err", "dz_sq_sum", "last_dz_sq",
                      "elapsed_s"}


def test_validation_is_mandatory_unless_opted_out():
    sched = ScheduleSpec("constant", {"alpha": 0.3}, lam=0.8)
    with pytest.raises(ValueError):
        run_nfb(_kernel(), [1.0], [1.0], RunConfig(sched))
    # explicit opt-out runs fine
    z, t = run_nfb(_kernel(), [1.0], [1.0],
                   RunConfig(sched, skip_validation=True, max_iters=10,
                             rel_tol=0.0))
    assert t.iterations == 10


def test_infeasible_schedule_raises_before_iterating():
    cert = make_certificate(0.0, 0.5, 1.0, 0.0)
    bad = ScheduleSpec("constant", {"alpha": cert.alpha_sup + 0.05}, lam=1.0)
    with pytest.raises(FeasibilityError):
        run_nfb(_kernel(), [1.0], [1.0], RunConfig(bad, certificate=cert))


def test_monitor_needs_certificate():
    sched = ScheduleSpec("constant", {"alpha": 0.0}, lam=1.0)
    mon = FejerMonitor(np.zeros(1))
    with pytest.raises(ValueError):
        run_nfb(_kernel(), [1.0], [1.0],
                RunConfig(sched, skip_validation=True, monitor=mon))


def test_monitor_integration_populates_h_column():
    mon = FejerMonitor(np.zeros(1))
    _, t = run_nfb(_kernel(0.5), [1.0], [1.0],
                   _config(max_iters=60, rel_tol=0.0, monitor=mon))
    h = np.array([r[3] for r in t.rows])
    assert np.all(np.isfinite(h))
    assert np.all(np.diff(h) <= 1e-12)   # contraction: energy descends
    assert mon.steps == 60 and mon.violations == []
    assert mon.dz_sq_sum == pytest.approx(t.dz_sq_sum)


def test_bad_start_shapes():
    with pytest.raises(ValueError):
        run_nfb(_kernel(dim=3), [1.0], [1.0, 2.0, 3.0], _config())
    with pytest.raises(ValueError):
        run_nfb(_kernel(dim=3), np.ones((3, 1)), np.ones(4), _config())


def test_runconfig_validation():
    sched = parse_schedule("const:0.0")
    with pytest.raises(ValueError):
        RunConfig(sched, max_iters=0)
    with pytest.raises(ValueError):
        RunConfig(sched, rel_tol=-1.0)


def test_iterate_trace_is_plain():
    t = IterateTrace("k", "s")
    t.custom_field = 42   # runners hang extra context off the trace
    assert t.columns == ("n", "rel_err", "dz_sq", "h", "elapsed_s")
    assert t.status == "running" and not t.converged
