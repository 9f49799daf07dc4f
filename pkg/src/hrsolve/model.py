"""Hindmarsh-Rose model coefficients, nonlinearities, and the reaction field.

The three-component reaction sends (u, v, w) to

    ( phi(u) + v - w + J,  psi(u) - v,  q*(u - c) - r*w )

with phi(u) = a*u^2 - b*u^3 and psi(u) = alpha - beta*u^2. Which components
also diffuse is selected by zeroing diffusion coefficients: d2 = d3 = 0 keeps
only the membrane potential diffusive, d3 = 0 keeps the bursting variable
non-diffusive, and d1 = d2 = d3 = 0 reduces to the point-neuron ODE. One code
path serves all four variants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import Domain, Field

JLike = Union[float, Field]


@dataclass
class HRParameters:
    """Model coefficients; the injected current J may be a constant or a Field."""

    d1: float = 0.0
    d2: float = 0.0
    d3: float = 0.0
    a: float = 3.0
    b: float = 1.0
    alpha: float = 1.0
    beta: float = 5.0
    q: float = 0.0084
    r: float = 0.0021
    J: JLike = 3.281
    c: float = -1.6

    def __post_init__(self):
        if min(self.d1, self.d2, self.d3) < 0:
            raise ValueError("diffusion coefficients must be nonnegative")
        # zeros are tolerated here so reduced/linear test systems can be built;
        # operations that rely on strict positivity (the explicit constants,
        # the steady-state reduction) enforce it themselves
        for name in ("a", "b", "alpha", "beta", "q", "r"):
            if getattr(self, name) < 0:
                raise ValueError(f"parameter {name} must be nonnegative")

    @property
    def variant(self) -> str:
        """Which named system the diffusion coefficients select."""
        if self.d1 > 0 and self.d2 > 0 and self.d3 > 0:
            return "full"
        if self.d1 > 0 and self.d2 > 0 and self.d3 == 0:
            return "qhr"
        if self.d1 > 0 and self.d2 == 0 and self.d3 == 0:
            return "phr"
        if self.d1 == self.d2 == self.d3 == 0:
            return "ode"
        return "custom"

    def j_array(self, dom: Domain) -> np.ndarray:
        """J expanded onto the grid (constant J is broadcast on demand)."""
        if isinstance(self.J, Field):
            if self.J.domain != dom:
                raise ValueError("field-valued J lives on a different domain")
            return self.J.values
        return np.full(dom.counts, float(self.J))

    def j_bound(self) -> float:
        """Conservative scalar bound |J|_inf, used by the explicit constants."""
        if isinstance(self.J, Field):
            return float(np.abs(self.J.values).max())
        return abs(float(self.J))


def typical_parameters(d1: float = 0.0, d2: float = 0.0, d3: float = 0.0) -> HRParameters:
    """The standard bursting parameter set (J = 3.281, r = 0.0021, q = r*S with S = 4)."""
    return HRParameters(d1=d1, d2=d2, d3=d3, a=3.0, b=1.0, alpha=1.0, beta=5.0,
                        q=0.0084, r=0.0021, J=3.281, c=-1.6)


def phi(p: HRParameters, u):
    return p.a * u**2 - p.b * u**3


def psi(p: HRParameters, u):
    return p.alpha - p.beta * u**2


@dataclass
class State:
    """The solution triple (u, v, w) on one shared domain."""

    u: Field
    v: Field
    w: Field

    def __post_init__(self):
        if not (self.u.domain == self.v.domain == self.w.domain):
            raise ValueError("state components live on different domains")

    @property
    def domain(self) -> Domain:
        return self.u.domain

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy(), self.w.copy())


def constant_state(dom: Domain, triple) -> State:
    u0, v0, w0 = (float(x) for x in triple)
    return State(
        Field(dom, np.full(dom.counts, u0)),
        Field(dom, np.full(dom.counts, v0)),
        Field(dom, np.full(dom.counts, w0)),
    )


def reaction(p: HRParameters, g: State) -> State:
    """Pointwise reaction vector field, returned as a State-shaped increment."""
    dom = g.domain
    u, v, w = g.u.values, g.v.values, g.w.values
    jv = p.j_array(dom)
    fu = phi(p, u) + v - w + jv
    fv = psi(p, u) - v
    fw = p.q * (u - p.c) - p.r * w
    return State(Field(dom, fu), Field(dom, fv), Field(dom, fw))


def reaction_jacobian_point(p: HRParameters, uvw) -> np.ndarray:
    """Jacobian of the reaction at one point (u, v, w)."""
    u = float(uvw[0])
    return np.array(
        [
            [2.0 * p.a * u - 3.0 * p.b * u * u, 1.0, -1.0],
            [-2.0 * p.beta * u, -1.0, 0.0],
            [p.q, 0.0, -p.r],
        ]
    )
