"""Verification surface: explicit dissipativity constants, Gronwall envelope
checks, Lyapunov bookkeeping, steady states, compactness and bursting
diagnostics.

The constants chain is fully determined by the model coefficients:

    C1 = (beta^2 + 4) / b
    C2 = (C1*a)^4 + C1*J^2 + [C1^2*(2 + 1/r) + C1]^2 + 2*alpha^2
         + q^2*c^2/r + q^4/r^2
    r1 = min(1, r) / 2
    M  = (2*C2 + C1^2/32) / r1
    K1 = M*|Omega| / min(C1, 1) + 1

and the decaying envelope exp(-r1*t) * (C1*|u0|^2 + |v0|^2 + |w0|^2) + M*|Omega|
bounds the weighted squared L2 norm along every trajectory. Higher-order
bounds (L4/L6, H1, Linf) involve embedding constants that have no closed
form, so those are monitored empirically through tail trends instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grid import Domain, Field, h1_seminorm, make_grid, norm_lp, shift_field
from .model import HRParameters, constant_state, reaction, reaction_jacobian_point


class MonitorSample(NamedTuple):
    """One row of the per-run monitor series (field order matches the CSV)."""

    t: float
    L2u: float
    L2v: float
    L2w: float
    L4u: float
    L4v: float
    L4w: float
    L6u: float
    L6v: float
    L6w: float
    H1u: float
    H1v: float
    H1w: float
    Linfu: float
    Linfv: float
    Linfw: float
    weighted: float
    envelope: float
    gamma: float
    gamma_residual: float


@dataclass(frozen=True)
class ConstantsReport:
    """The computable constants chain for one parameter set and domain volume."""

    C1: float
    C2: float
    r1: float
    M: float
    K1: float
    volume: float

    def to_text(self) -> str:
        lines = [f"{k}={getattr(self, k)!r}" for k in ("C1", "C2", "r1", "M", "K1", "volume")]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "ConstantsReport":
        kv = {}
        for line in text.strip().splitlines():
            k, _, v = line.partition("=")
            kv[k.strip()] = float(v)
        return ConstantsReport(**kv)


def compute_constants(p: HRParameters, volume: float) -> ConstantsReport:
    """Evaluate the constants chain exactly; raises if the formulas degenerate.

    A field-valued injected current collapses to its max-norm bound, which
    keeps the envelope valid (conservatively) for spatially varying J.
    """
    for name in ("a", "b", "alpha", "beta", "q", "r"):
        if getattr(p, name) <= 0:
            raise ValueError(f"the explicit constants require {name} > 0")
    if volume <= 0:
        raise ValueError("domain volume must be positive")
    a, b, al, be, q, r, c = p.a, p.b, p.alpha, p.beta, p.q, p.r, p.c
    J = p.j_bound()
    C1 = (be * be + 4.0) / b
    C2 = (
        (C1 * a) ** 4
        + C1 * J * J
        + (C1 * C1 * (2.0 + 1.0 / r) + C1) ** 2
        + 2.0 * al * al
        + q * q * c * c / r
        + q ** 4 / r ** 2
    )
    r1 = 0.5 * min(1.0, r)
    M = (2.0 * C2 + C1 * C1 / 32.0) / r1
    K1 = M * volume / min(C1, 1.0) + 1.0
    rep = ConstantsReport(C1=C1, C2=C2, r1=r1, M=M, K1=K1, volume=float(volume))
    for k in ("C1", "C2", "r1", "M", "K1"):
        val = getattr(rep, k)
        if not math.isfinite(val) or val <= 0:
            raise ValueError(f"constant {k} overflowed or degenerated: {val}")
    return rep


def absorbing_time(rep: ConstantsReport, R: float) -> float:
    """Entry time of the radius-R ball into the absorbing set.

    May be negative for tiny R; callers clamp at zero for scheduling.
    """
    if R <= 0:
        raise ValueError("ball radius must be positive")
    return math.log(R * R * max(rep.C1, 1.0)) / rep.r1


def gronwall_envelope(rep: ConstantsReport, initial_weighted: float, t) -> float:
    """Decaying upper bound on C1*|u|^2 + |v|^2 + |w|^2 at time t."""
    if initial_weighted < 0:
        raise ValueError("initial weighted norm must be nonnegative")
    if np.any(np.asarray(t) < 0):
        raise ValueError("envelope is defined for t >= 0")
    return np.exp(-rep.r1 * np.asarray(t, dtype=float)) * initial_weighted + rep.M * rep.volume


@dataclass
class DissipativityReport:
    times: np.ndarray
    weighted: np.ndarray
    envelope: np.ndarray
    ok: np.ndarray
    passed: bool
    first_violation: float | None
    ball_radius: float
    absorbing_t: float
    ball_ok: bool
    slack: float

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,weighted,envelope,pass\n")
            for t, wv, ev, okv in zip(self.times, self.weighted, self.envelope, self.ok):
                fh.write(f"{t!r},{wv!r},{ev!r},{int(okv)}\n")


def verify_dissipativity(rep: ConstantsReport, traj, slack: float = 0.05) -> DissipativityReport:
    """Check every sample against the envelope and the absorbing ball.

    Each sample must satisfy weighted <= (1+slack)*envelope(t); for times past
    the absorbing time of the initial ball, |g(t)|^2 must stay below K1.
    """
    times = np.asarray(traj.times, dtype=float)
    if times.size == 0:
        raise ValueError("trajectory has no samples")
    weighted = traj.column("weighted")
    if not np.isfinite(weighted).all():
        raise ValueError("trajectory has no finite weighted-norm samples")
    env = gronwall_envelope(rep, float(weighted[0]), times)
    ok = weighted <= (1.0 + slack) * env
    normsq = traj.column("L2u") ** 2 + traj.column("L2v") ** 2 + traj.column("L2w") ** 2
    R = math.sqrt(float(normsq[0])) if normsq[0] > 0 else 1e-30
    t0 = max(0.0, absorbing_time(rep, R))
    inside = normsq[times >= t0] < rep.K1
    ball_ok = bool(inside.all())
    passed = bool(ok.all()) and ball_ok
    first = None if ok.all() else float(times[np.argmin(ok)])
    return DissipativityReport(
        times=times, weighted=weighted, envelope=env, ok=ok, passed=passed,
        first_violation=first, ball_radius=R, absorbing_t=t0, ball_ok=ball_ok,
        slack=slack,
    )


@dataclass
class LyapunovSeries:
    """Per-sample Lyapunov functional, dissipation rate, and identity residual.

    gamma(t) = -( (1/2) * sum_i d_i * |grad g_i|^2  +  integral of F )
    where F accumulates the reaction along the computed path by the midpoint
    rule. dissipation = -|g_t|^2, and residual = d(gamma)/dt - dissipation
    measures how far the computed trajectory is from the exact identity
    d(gamma)/dt = -|g_t|^2 (zero for a steady state, O(dt^2) in the ODE case).
    The first row carries zeros for the two difference quantities.
    """

    t: np.ndarray
    gamma: np.ndarray
    dissipation: np.ndarray
    residual: np.ndarray


def lyapunov_series(traj, p: HRParameters, dom: Domain) -> LyapunovSeries:
    if traj.snapshot_values is None or len(traj.snapshot_times) < 2:
        raise ValueError("lyapunov_series needs at least 2 stored states")
    t = np.asarray(traj.snapshot_times, dtype=float)
    m = t.size
    vol = dom.cell_volume
    g = traj.snapshot_values.reshape(m, 3, dom.ncells)
    jflat = p.j_array(dom).ravel()
    mid = 0.5 * (g[1:] + g[:-1])
    dg = g[1:] - g[:-1]
    mu, mv, mw = mid[:, 0], mid[:, 1], mid[:, 2]
    fu = p.a * mu**2 - p.b * mu**3 + mv - mw + jflat
    fv = p.alpha - p.beta * mu**2 - mv
    fw = p.q * (mu - p.c) - p.r * mw
    dF = (fu * dg[:, 0] + fv * dg[:, 1] + fw * dg[:, 2]).sum(axis=1) * vol
    F = np.concatenate([[0.0], np.cumsum(dF)])
    grad = np.zeros(m)
    for comp, d in enumerate((p.d1, p.d2, p.d3)):
        if d > 0:
            for k in range(m):
                f = Field(dom, g[k, comp].reshape(dom.counts))
                grad[k] += 0.5 * d * h1_seminorm(dom, f) ** 2
    gamma = -(grad + F)
    dt = np.diff(t)
    gtsq = (dg**2).sum(axis=(1, 2)) * vol / dt**2
    dissipation = np.concatenate([[0.0], -gtsq])
    residual = np.concatenate([[0.0], np.diff(gamma) / dt - dissipation[1:]])
    return LyapunovSeries(t=t, gamma=gamma, dissipation=dissipation, residual=residual)


@dataclass
class Equilibrium:
    u: float
    v: float
    w: float
    eigenvalues: np.ndarray
    stability: str
    residual: float


@dataclass
class EquilibriumSet:
    equilibria: list

    def __iter__(self):
        return iter(self.equilibria)

    def __len__(self):
        return len(self.equilibria)


def _cubic_coeffs(p: HRParameters):
    # eliminating v = psi(u) and w = (q/r)(u - c) from the zero-reaction system
    if isinstance(p.J, Field):
        raise ValueError("steady-state reduction needs a constant injected current")
    return (-p.b, p.a - p.beta, -p.q / p.r, p.alpha + float(p.J) + p.q * p.c / p.r)


def _eval_cubic(coeffs, u):
    c3, c2, c1, c0 = coeffs
    return ((c3 * u + c2) * u + c1) * u + c0


def homogeneous_equilibria(p: HRParameters) -> EquilibriumSet:
    """All spatially homogeneous steady states with eigenvalues and stability tags.

    Real roots of the reduced cubic are located by a sign-change scan plus
    bisection, then polished by Newton; Newton is also started from three
    spread seeds to catch near-multiple roots the scan might straddle.
    """
    if p.r <= 0:
        raise ValueError("steady-state reduction requires r > 0")
    coeffs = _cubic_coeffs(p)
    lo = -10.0 - (p.a / p.b if p.b > 0 else 0.0)
    hi = 10.0 + (p.a / p.b if p.b > 0 else 0.0)
    c3, c2, c1, c0 = coeffs

    def deriv(u):
        return (3.0 * c3 * u + 2.0 * c2) * u + c1

    def newton(u):
        for _ in range(100):
            fv = _eval_cubic(coeffs, u)
            dv = deriv(u)
            if dv == 0:
                return None
            step = fv / dv
            u -= step
            if abs(step) < 1e-14 * max(1.0, abs(u)):
                return u
        return None

    roots = []
    grid = np.linspace(lo, hi, 2049)
    vals = _eval_cubic(coeffs, grid)
    for i in range(len(grid) - 1):
        va, vb = vals[i], vals[i + 1]
        if va == 0.0:
            roots.append(float(grid[i]))
            continue
        if va * vb < 0:
            a_, b_ = grid[i], grid[i + 1]
            fa = va
            for _ in range(200):
                mid_ = 0.5 * (a_ + b_)
                fm = _eval_cubic(coeffs, mid_)
                if fm == 0 or (b_ - a_) < 1e-15 * max(1.0, abs(mid_)):
                    break
                if fa * fm < 0:
                    b_ = mid_
                else:
                    a_, fa = mid_, fm
            roots.append(0.5 * (a_ + b_))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    for seed in (lo, 0.0, hi):
        r_ = newton(seed)
        if r_ is not None and lo - 1.0 <= r_ <= hi + 1.0:
            roots.append(r_)
    polished = []
    for r_ in roots:
        nr = newton(r_)
        polished.append(nr if nr is not None else r_)
    polished.sort()
    unique = []
    for r_ in polished:
        if not unique or abs(r_ - unique[-1]) > 1e-8:
            unique.append(r_)

    eqs = []
    dom = None
    for us in unique:
        vs = p.alpha - p.beta * us * us
        ws = (p.q / p.r) * (us - p.c)
        eig = np.linalg.eigvals(reaction_jacobian_point(p, (us, vs, ws)))
        mre = float(eig.real.max())
        if mre < -1e-10:
            tag = "stable"
        elif mre > 1e-10:
            tag = "unstable"
        else:
            tag = "marginal"
        if dom is None:
            dom = make_grid(1, [1.0], [2])
        res_state = constant_state(dom, (us, vs, ws))
        res = reaction(p, res_state)
        residual = max(
            float(np.abs(res.u.values).max()),
            float(np.abs(res.v.values).max()),
            float(np.abs(res.w.values).max()),
        )
        eqs.append(Equilibrium(u=us, v=vs, w=ws, eigenvalues=eig, stability=tag,
                               residual=residual))
    return EquilibriumSet(eqs)


def translation_modulus(dom: Domain, f: Field, y, p) -> float:
    """L^p size of f(x+y) - f(x) with zero extension outside the box."""
    shifted = shift_field(dom, f, y)
    return norm_lp(dom, Field(dom, shifted.values - f.values), p)


@dataclass
class SpikeTrainMetrics:
    spike_times: np.ndarray
    spike_count: int
    isi: np.ndarray
    isi_mean: float
    isi_std: float
    isi_cv: float
    burst_count: int
    threshold: float


def spike_train_metrics(times, u, threshold: float) -> SpikeTrainMetrics:
    """Upward threshold crossings, interspike-interval statistics, burst count.

    Crossings are located by linear interpolation where u passes from at or
    below the threshold to strictly above it. An interspike gap larger than
    three times the median interval starts a new burst.
    """
    times = np.asarray(times, dtype=float)
    u = np.asarray(u, dtype=float)
    if times.ndim != 1 or times.shape != u.shape:
        raise ValueError("times and values must be 1D arrays of equal length")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    below = u[:-1] <= threshold
    above = u[1:] > threshold
    idx = np.where(below & above)[0]
    frac = (threshold - u[idx]) / (u[idx + 1] - u[idx])
    spike_times = times[idx] + frac * (times[idx + 1] - times[idx])
    isi = np.diff(spike_times)
    n = spike_times.size
    if isi.size:
        m = float(isi.mean())
        s = float(isi.std())
        cv = s / m if m > 0 else 0.0
        bursts = 1 + int((isi > 3.0 * np.median(isi)).sum())
    else:
        m = s = cv = 0.0
        bursts = 1 if n else 0
    return SpikeTrainMetrics(
        spike_times=spike_times, spike_count=int(n), isi=isi,
        isi_mean=m, isi_std=s, isi_cv=cv, burst_count=bursts,
        threshold=float(threshold),
    )


def tail_slope(times, values, tail_frac: float = 0.5) -> float:
    """Least-squares slope of a series over the trailing fraction of its span.

    The boundedness theorems are checked empirically: a settled monitor series
    must show no upward trend, so its tail slope stays at or below a small
    tolerance.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t0 = times[0] + (1.0 - tail_frac) * (times[-1] - times[0])
    sel = times >= t0
    tt, vv = times[sel], values[sel]
    if tt.size < 2:
        raise ValueError("tail window has fewer than 2 samples")
    return float(np.polyfit(tt, vv, 1)[0])
