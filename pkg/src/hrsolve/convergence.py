"""Order-of-accuracy ladders: temporal refinement against dt/100 references
and a spatial ladder on the Neumann-compatible manufactured diffusion solution
cos(pi*x/L) * exp(-d*(pi/L)^2*t), which the cell-centered mirror-ghost stencil
reproduces up to an O(h^2) eigenvalue defect.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import make_grid, norm_lp, Field
from .integrate import SolverConfig, estimate_convergence_order, run
from .model import HRParameters, State, typical_parameters


def _final_values(dom, p, scheme, dt, t_end, g0):
    nsteps = int(round(t_end / dt))
    cfg = SolverConfig(dt=dt, t_end=t_end, scheme=scheme, monitor_every=max(1, nsteps),
                       snapshot_every=max(1, nsteps))
    traj = run(dom, p, cfg, g0)
    if traj.blowup is not None:
        raise RuntimeError(f"ladder run blew up: {traj.blowup}")
    return traj.snapshot_values[-1]


def _state_error(dom, a, b):
    diff = a - b
    vol = dom.cell_volume
    return math.sqrt(float((diff * diff).sum()) * vol)


def _smooth_state(dom, center, amp=0.5):
    axes = [np.cos(np.pi * (np.arange(n) + 0.5) * h / L)
            for n, h, L in zip(dom.counts, dom.spacing, dom.lengths)]
    mode = axes[0]
    for ax in axes[1:]:
        mode = np.multiply.outer(mode, ax)
    return State(*(Field(dom, c + amp * mode) for c in center))


def temporal_order_imex(dts=(0.04, 0.02, 0.01, 0.005)):
    """IMEX Euler self-refinement slope on a smooth diffusive problem."""
    dom = make_grid(2, [1.0, 1.0], [16, 16])
    p = typical_parameters(d1=0.1, d2=0.1, d3=0.1)
    g0 = _smooth_state(dom, (-0.684, -1.34, 3.66))
    t_end = 1.0
    errors = []
    for dt in dts:
        coarse = _final_values(dom, p, "imex_euler", dt, t_end, g0)
        ref = _final_values(dom, p, "imex_euler", dt / 100.0, t_end, g0)
        errors.append((dt, _state_error(dom, coarse, ref)))
    return estimate_convergence_order(errors), errors


def temporal_order_rk4(dts=(0.02, 0.01, 0.005)):
    """RK4 self-refinement slope in ODE mode (no diffusion)."""
    dom = make_grid(1, [1.0], [2])
    p = typical_parameters()
    g0 = _smooth_state(dom, (1.0, 0.0, 0.0), amp=0.0)
    t_end = 10.0
    errors = []
    for dt in dts:
        coarse = _final_values(dom, p, "rk4", dt, t_end, g0)
        ref = _final_values(dom, p, "rk4", dt / 100.0, t_end, g0)
        errors.append((dt, _state_error(dom, coarse, ref)))
    return estimate_convergence_order(errors), errors


def spatial_order(counts=(16, 32, 64, 128), d=0.1, t_end=0.1, dt=1e-4):
    """L2 error slope against h for the manufactured pure-diffusion solution.

    The reaction is switched off entirely, so each component obeys the heat
    equation; RK4 in time keeps the temporal error far below the spatial one.
    """
    p = HRParameters(d1=d, d2=d, d3=d, a=0, b=0, alpha=0, beta=0, q=0, r=0, J=0.0, c=0.0)
    errors = []
    for n in counts:
        dom = make_grid(1, [1.0], [n])
        x = (np.arange(n) + 0.5) * dom.spacing[0]
        ic = np.cos(np.pi * x)
        # v and w start at zero and stay there, so u obeys the pure heat equation
        g0 = State(Field(dom, ic.copy()), Field(dom, np.zeros(n)), Field(dom, np.zeros(n)))
        final = _final_values(dom, p, "rk4", dt, t_end, g0)
        exact = np.cos(np.pi * x) * math.exp(-d * math.pi**2 * t_end)
        err = norm_lp(dom, Field(dom, final[0].reshape(dom.counts) - exact), 2)
        errors.append((dom.spacing[0], err))
    return estimate_convergence_order(errors), errors


ORDER_BANDS = {
    "imex_temporal": (0.9, 1.1),
    "rk4_temporal": (3.8, 4.2),
    "spatial": (1.8, 2.2),
}


def order_study():
    """All three ladders; returns {name: (slope, errors, in_band)}."""
    results = {}
    for name, fn in (("imex_temporal", temporal_order_imex),
                     ("rk4_temporal", temporal_order_rk4),
                     ("spatial", spatial_order)):
        slope, errors = fn()
        lo, hi = ORDER_BANDS[name]
        results[name] = (slope, errors, lo <= slope <= hi)
    return results
