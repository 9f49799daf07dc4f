"""Time integration of the semi-discrete system dg/dt = Ag + f(g).

The default scheme treats the diagonal diffusion implicitly (backward Euler,
one SPD Helmholtz solve per diffusive component per step) and the reaction
explicitly; components with zero diffusion reduce exactly to explicit Euler,
so the same marcher covers the full, partly diffusive, and ODE systems. A
classical RK4 marcher over the full right-hand side serves as the explicit
reference integrator. Marching happens in jitted chunks between monitor
samples; a run is sequential in time and bit-reproducible for fixed inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, analysis
from .grid import Domain, Field
from .model import HRParameters, State

MONITOR_COLUMNS = (
    "t",
    "L2u", "L2v", "L2w",
    "L4u", "L4v", "L4w",
    "L6u", "L6v", "L6w",
    "H1u", "H1v", "H1w",
    "Linfu", "Linfv", "Linfw",
    "weighted", "envelope", "gamma", "gamma_residual",
)

SCHEMES = ("imex_euler", "rk4")


class SolverError(RuntimeError):
    """The implicit solve failed to reach the requested residual."""


class BlowUpError(RuntimeError):
    """A state component left the representable range (NaN or infinity)."""

    def __init__(self, component: str, t: float):
        super().__init__(
            f"solution blew up: component {component!r} became non-finite at t={t:g} "
            "(a convergent run should stay bounded; reduce dt)"
        )
        self.component = component
        self.t = t


@dataclass
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "imex_euler"
    linear_tol: float = 1e-10
    monitor_every: int = 100
    snapshot_every: int | None = None
    probe: int | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.linear_tol <= 0:
            raise ValueError("linear_tol must be positive")
        if self.monitor_every < 1:
            raise ValueError("monitor_every must be at least 1")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")


@dataclass
class Trajectory:
    """Sampled norms (one row per monitor time), optional snapshots and probe."""

    domain: Domain
    times: np.ndarray
    monitor: np.ndarray  # shape (nsamples, len(MONITOR_COLUMNS))
    snapshot_times: np.ndarray | None = None
    snapshot_values: np.ndarray | None = None  # shape (nsnap, 3, *counts)
    probe: np.ndarray | None = None  # rows of (t, u, v, w) at the probe cell
    blowup: tuple[str, float] | None = None

    def column(self, name: str) -> np.ndarray:
        return self.monitor[:, MONITOR_COLUMNS.index(name)]

    @property
    def samples(self):
        return [analysis.MonitorSample(*row) for row in self.monitor]

    def snapshot_state(self, i: int) -> State:
        vals = self.snapshot_values[i]
        return State(*(Field(self.domain, vals[k].copy()) for k in range(3)))

    def write_monitor_csv(self, path):
        _write_csv(path, MONITOR_COLUMNS, self.monitor)

    def write_probe_csv(self, path):
        if self.probe is None:
            raise ValueError("trajectory carries no probe series")
        _write_csv(path, ("t", "u", "v", "w"), self.probe)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _cg_iteration_cap(dom: Domain) -> int:
    return max(16, int(math.ceil(10.0 * dom.ncells ** (1.0 / dom.dim))))


def _inv_diag(dom: Domain, kappa: float) -> np.ndarray:
    """Inverse diagonal of (I - kappa*lap) on the mirror-ghost stencil."""
    shape3 = dom.shape3()
    ih = dom.inv_h2()
    diag = np.ones(shape3)
    for ax in range(3):
        n = shape3[ax]
        c = np.full(n, 2.0)
        c[0] -= 1.0
        c[-1] -= 1.0
        view = c.reshape([-1 if a == ax else 1 for a in range(3)])
        diag = diag + kappa * ih[ax] * view
    return 1.0 / diag


def solve_helmholtz_neumann(dom: Domain, kappa: float, b: Field, tol: float = 1e-10) -> Field:
    """Solve (I - kappa*lap) x = b to a relative residual below tol.

    kappa = 0 returns b unchanged (identity system).
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if b.domain != dom:
        raise ValueError("right-hand side does not live on the given domain")
    if kappa == 0.0:
        return b.copy()
    shape3 = dom.shape3()
    bvals = b.values.reshape(shape3)
    x = bvals.copy()
    scratch = [np.empty(shape3) for _ in range(3)]
    ih0, ih1, ih2 = dom.inv_h2()
    invd = _inv_diag(dom, kappa)
    cap = _cg_iteration_cap(dom)
    bnorm = float(np.sqrt((bvals * bvals).sum()))
    iters = _kernels.cg_helmholtz(x, kappa, ih0, ih1, ih2, tol, cap, invd, *scratch)[0]
    # the CG recursion can report convergence while the true residual stalls
    # near machine precision, so verify and refine against the real operator
    for _ in range(3):
        _kernels.lap3(x, ih0, ih1, ih2, scratch[0])
        res = bvals - (x - kappa * scratch[0])
        relres = float(np.sqrt((res * res).sum()))
        if bnorm > 0:
            relres /= bnorm
        if relres <= tol:
            return Field(dom, x.reshape(dom.counts))
        e = res.copy()
        iters += _kernels.cg_helmholtz(e, kappa, ih0, ih1, ih2, tol, cap, invd, *scratch)[0]
        x += e
    raise SolverError(
        f"Helmholtz solve stalled after {iters} iterations at relative residual "
        f"{relres:.3e} (kappa={kappa:g}, tol={tol:g}); check conditioning or tolerance"
    )


class _Marcher:
    """State buffers plus prebuilt kernel argument tuples for one run."""

    def __init__(self, dom: Domain, p: HRParameters, cfg: SolverConfig, g0: State):
        shape3 = dom.shape3()
        self.dom = dom
        self.cfg = cfg
        self.state = [
            np.ascontiguousarray(f.values.reshape(shape3), dtype=np.float64).copy()
            for f in (g0.u, g0.v, g0.w)
        ]
        scratch = [np.empty(shape3) for _ in range(3)]
        jarr = np.ascontiguousarray(p.j_array(dom).reshape(shape3), dtype=np.float64)
        ih0, ih1, ih2 = dom.inv_h2()
        common = (jarr, p.a, p.b, p.alpha, p.beta, p.q, p.r, p.c,
                  p.d1, p.d2, p.d3, cfg.dt, ih0, ih1, ih2)
        if cfg.scheme == "imex_euler":
            ones = np.ones(shape3)
            invd = [
                _inv_diag(dom, cfg.dt * d) if d > 0 else ones
                for d in (p.d1, p.d2, p.d3)
            ]
            cg = [np.empty(shape3) for _ in range(3)]
            self.args = (*self.state, *scratch, *common,
                         cfg.linear_tol, _cg_iteration_cap(dom), *invd, *cg)
            self.kernel = _kernels.imex_march
        else:
            rk = [np.empty(shape3) for _ in range(10)]
            self.args = (*self.state, *scratch, *common, *rk)
            self.kernel = _kernels.rk4_march

    def march(self, ksteps: int):
        """Advance ksteps; returns (ok, gamma_increment_total, steps_done)."""
        if self.cfg.scheme == "imex_euler":
            _, ok, dF, done = self.kernel(*self.args, ksteps)
        else:
            dF, done = self.kernel(*self.args, ksteps)
            ok = True
        return ok, dF, done


def step_imex(dom: Domain, p: HRParameters, g: State, dt: float, tol: float = 1e-10) -> State:
    """One IMEX Euler step as a standalone operation."""
    cfg = SolverConfig(dt=dt, t_end=dt, linear_tol=tol)
    m = _Marcher(dom, p, cfg, g)
    ok, dF, _ = m.march(1)
    if not math.isfinite(dF):
        _raise_blowup(m.state, dt)
    if not ok:
        raise SolverError(f"implicit diffusion solve did not converge (tol={tol:g})")
    return _state_from_buffers(dom, m.state)


def step_rk4(dom: Domain, p: HRParameters, g: State, dt: float) -> State:
    """One classical RK4 step of the full right-hand side."""
    _rk4_stability_warning(dom, p, dt)
    cfg = SolverConfig(dt=dt, t_end=dt, scheme="rk4")
    m = _Marcher(dom, p, cfg, g)
    _, dF, _ = m.march(1)
    if not math.isfinite(dF):
        _raise_blowup(m.state, dt)
    return _state_from_buffers(dom, m.state)


def _state_from_buffers(dom, bufs) -> State:
    return State(*(Field(dom, arr.reshape(dom.counts).copy()) for arr in bufs))


def _first_bad_component(bufs) -> str:
    for comp, arr in zip("uvw", bufs):
        if not np.isfinite(arr).all():
            return comp
    return "u"


def _raise_blowup(bufs, t):
    raise BlowUpError(_first_bad_component(bufs), t)


def _rk4_stability_warning(dom: Domain, p: HRParameters, dt: float):
    dmax = max(p.d1, p.d2, p.d3)
    if dmax > 0:
        hmin = min(dom.spacing)
        limit = hmin * hmin / (2.0 * dom.dim * dmax)
        if dt > limit:
            warnings.warn(
                f"dt={dt:g} exceeds the explicit diffusion limit {limit:g}; "
                "expect RK4 instability", stacklevel=3,
            )


def _component_norms(arr, dom: Domain):
    vol = dom.cell_volume
    f = arr.reshape(dom.counts)
    f2 = f * f
    f4 = f2 * f2
    L2 = math.sqrt(f2.sum() * vol)
    L4 = (f4.sum() * vol) ** 0.25
    L6 = ((f4 * f2).sum() * vol) ** (1.0 / 6.0)
    Linf = float(np.abs(f).max())
    h1sq = 0.0
    for ax in range(dom.dim):
        d = np.diff(f, axis=ax) / dom.spacing[ax]
        h1sq += float((d * d).sum())
    H1 = math.sqrt(h1sq * vol)
    return L2, L4, L6, H1, Linf


def run(dom: Domain, p: HRParameters, cfg: SolverConfig, g0: State) -> Trajectory:
    """March the system to t_end, sampling the monitor every monitor_every steps.

    Deterministic for fixed inputs. Implicit-solve stalls raise SolverError;
    if a component leaves the representable range the partial trajectory is
    returned with its blowup field set.
    """
    if g0.domain != dom:
        raise ValueError("initial state does not live on the given domain")
    if cfg.scheme == "rk4":
        _rk4_stability_warning(dom, p, cfg.dt)
    nsteps = int(round(cfg.t_end / cfg.dt))
    if abs(nsteps * cfg.dt - cfg.t_end) > 1e-9 * max(cfg.dt, cfg.t_end):
        warnings.warn(
            f"t_end={cfg.t_end:g} is not a multiple of dt={cfg.dt:g}; "
            f"marching to {nsteps * cfg.dt:g}", stacklevel=2,
        )
    marcher = _Marcher(dom, p, cfg, g0)
    cur = marcher.state
    vol = dom.cell_volume

    try:
        rep = analysis.compute_constants(p, dom.volume)
    except ValueError:
        rep = None
    C1 = (p.beta**2 + 4.0) / p.b if p.b > 0 else math.nan

    if cfg.probe is not None and not 0 <= cfg.probe < dom.ncells:
        raise ValueError(f"probe index {cfg.probe} outside 0..{dom.ncells - 1}")
    nsamples = nsteps // cfg.monitor_every + 1
    if nsteps % cfg.monitor_every:
        nsamples += 1
    monitor = np.empty((nsamples, len(MONITOR_COLUMNS)))
    probe_rows = np.empty((nsamples, 4)) if cfg.probe is not None else None

    snap_times: list[float] = []
    snap_vals: list[np.ndarray] = []

    Fint = 0.0
    weighted0 = math.nan
    prev_t = 0.0
    prev_gamma = 0.0
    prev_state = [a.copy() for a in cur]
    nrec = 0
    blowup = None

    def record(t):
        nonlocal nrec, weighted0, prev_t, prev_gamma
        per = [_component_norms(a, dom) for a in cur]
        (L2u, L4u, L6u, H1u, Lfu), (L2v, L4v, L6v, H1v, Lfv), (L2w, L4w, L6w, H1w, Lfw) = per
        weighted = C1 * L2u**2 + L2v**2 + L2w**2
        if t == 0.0:
            weighted0 = weighted
        env = analysis.gronwall_envelope(rep, weighted0, t) if rep is not None else math.nan
        grad = 0.0
        for d, h1 in zip((p.d1, p.d2, p.d3), (H1u, H1v, H1w)):
            if d > 0:
                grad += 0.5 * d * h1 * h1
        gamma = -(grad + Fint)
        if t == 0.0:
            resid = 0.0
        else:
            dts = t - prev_t
            gtsq = sum(float(((a - b_) ** 2).sum()) for a, b_ in zip(cur, prev_state)) * vol / dts**2
            resid = (gamma - prev_gamma) / dts + gtsq
        monitor[nrec] = (
            t, L2u, L2v, L2w, L4u, L4v, L4w, L6u, L6v, L6w,
            H1u, H1v, H1w, Lfu, Lfv, Lfw, weighted, float(env), gamma, resid,
        )
        if probe_rows is not None:
            probe_rows[nrec] = (t, cur[0].ravel()[cfg.probe], cur[1].ravel()[cfg.probe],
                                cur[2].ravel()[cfg.probe])
        nrec += 1
        prev_t = t
        prev_gamma = gamma
        for a, b_ in zip(cur, prev_state):
            b_[...] = a

    def snapshot(t):
        snap_times.append(t)
        snap_vals.append(np.stack([a.reshape(dom.counts).copy() for a in cur]))

    record(0.0)
    if cfg.snapshot_every is not None:
        snapshot(0.0)

    n = 0
    while n < nsteps:
        chunk = min(cfg.monitor_every - n % cfg.monitor_every, nsteps - n)
        if cfg.snapshot_every is not None:
            chunk = min(chunk, cfg.snapshot_every - n % cfg.snapshot_every)
        ok, dF, done = marcher.march(chunk)
        n += done
        t = n * cfg.dt
        if done < chunk or not ok or not math.isfinite(dF):
            bad = next((c for c, a in zip("uvw", cur) if not np.isfinite(a).all()), None)
            if bad is None:
                raise SolverError(
                    f"implicit diffusion solve did not converge at t={t:g} "
                    f"(tol={cfg.linear_tol:g})"
                )
            blowup = (bad, t)
            break
        Fint += dF * vol
        if n % cfg.monitor_every == 0 or n == nsteps:
            record(t)
        if cfg.snapshot_every is not None and n % cfg.snapshot_every == 0:
            snapshot(t)

    monitor = monitor[:nrec]
    return Trajectory(
        domain=dom,
        times=monitor[:, 0].copy(),
        monitor=monitor,
        snapshot_times=np.array(snap_times) if snap_times else None,
        snapshot_values=np.stack(snap_vals) if snap_vals else None,
        probe=probe_rows[:nrec] if probe_rows is not None else None,
        blowup=blowup,
    )


def estimate_convergence_order(errors) -> float:
    """Least-squares slope of log(error) against log(step size).

    Expects at least 3 (step, error) pairs on a roughly geometric ladder;
    a zero error short-circuits to +inf (exact match sentinel).
    """
    pairs = [(float(h), float(e)) for h, e in errors]
    if len(pairs) < 3:
        raise ValueError("order estimate needs at least 3 (step, error) samples")
    hs = np.array([h for h, _ in pairs])
    es = np.array([e for _, e in pairs])
    if np.any(hs <= 0):
        raise ValueError("step sizes must be positive")
    if np.any(es == 0):
        return math.inf
    ratios = hs[:-1] / hs[1:]
    if np.any(ratios <= 1.0):
        raise ValueError("step sizes must decrease")
    return float(np.polyfit(np.log(hs), np.log(es), 1)[0])
