"""Symbol families p(x, xi), characteristic-curve contact order, quantization.

A symbol is evaluated on grids via broadcastable callables; families that are
graphs xi1 = a(x, xi2) also expose closed-form xi2-derivatives so contact
order between two characteristic curves can be read off exactly.  When a
closed form is not available (Newton branches, flow pullbacks) the detection
falls back to centered finite differences with Richardson extrapolation.

Left quantization p(x, hD) acts as a spectral multiplier for x-independent
symbols and as the direct oscillatory quadrature

    (2 pi h)^{-1} sum_xi e^{i<x,xi>/h} p(x, xi) FT[u](xi) dxi^2

for x-dependent ones (O(N^4), guarded to N <= 128 unless forced).  The two
paths agree exactly when p does not depend on x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Field2D, GridSpec, SpectralField2D, semiclassical_fft, semiclassical_ifft

__all__ = [
    "GraphFn",
    "GraphBranch",
    "NewtonBranch",
    "graph_circle",
    "graph_parabola",
    "graph_flat",
    "graph_shear",
    "graph_tilted_circle",
    "graph_monomial",
    "graph_sum",
    "SymbolSpec",
    "ContactReport",
    "ContactError",
    "CostGuardError",
    "circle_minus_one",
    "contact_perturbed_circle",
    "flat_contact",
    "graph_symbol",
    "custom_symbol",
    "multiplier_symbol",
    "xi1_symbol",
    "xi2_power_symbol",
    "graph_catalog",
    "contact_order",
    "apply_left_quantization",
    "graph_of",
]

CIRCLE_SEAM = 0.95  # |xi2| beyond which sqrt(1 - xi2^2) is Taylor-continued


class ContactError(ValueError):
    """Curves do not intersect where a contact order was requested."""


class CostGuardError(RuntimeError):
    """Refused O(N^4) quantization; pass force=True to override."""


# ---------------------------------------------------------------------------
# sqrt(1 - t^2) with a C^2 quadratic continuation outside |t| <= CIRCLE_SEAM,
# so circle graphs stay finite (and curved) on the whole frequency lattice.
# ---------------------------------------------------------------------------

def _circle_sqrt(t, order: int = 0):
    t = np.asarray(t, dtype=float)
    u = np.abs(t)
    s = np.sign(t)
    inside = u <= CIRCLE_SEAM
    uc = np.where(inside, u, CIRCLE_SEAM)
    w = 1.0 - uc * uc
    r = np.sqrt(w)
    d = u - CIRCLE_SEAM  # >= 0 only where outside
    # value and |t|-derivatives at the clamp point
    v0, v1, v2 = r, -uc / r, -w ** -1.5
    if order == 0:
        out = np.where(inside, r, v0 + v1 * d + 0.5 * v2 * d * d)
    elif order == 1:
        out = s * np.where(inside, -uc / r, v1 + v2 * d)
    elif order == 2:
        out = np.where(inside, -w ** -1.5, v2)
    elif order == 3:
        out = s * np.where(inside, -3.0 * uc * w ** -2.5, 0.0)
    elif order == 4:
        out = np.where(inside, -3.0 * (1.0 + 4.0 * uc * uc) * w ** -3.5, 0.0)
    else:
        raise ValueError(f"_circle_sqrt derivatives available to order 4, got {order}")
    return out if out.ndim else float(out)


_CIRCLE_MAX_ORDER = 4


# ---------------------------------------------------------------------------
# graph functions a(x1, x2, xi2) with the partials the flow integrator needs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphFn:
    """Graph a(x1, x2, xi2) of a characteristic branch xi1 = a.

    ``xi2_derivative(x1, x2, xi2, order)`` returns the closed-form derivative
    or None when only finite differences are possible at that order.
    """

    name: str
    value: Callable
    d_xi2: Callable
    d_x2: Callable
    d2_xi2_xi2: Callable
    d2_x2_xi2: Callable
    d2_x2_x2: Callable
    x_dependent: bool
    xi2_derivative: Callable  # (x1, x2, xi2, order) -> value or None

    def __call__(self, x1, x2, xi2):
        return self.value(x1, x2, xi2)


def graph_circle() -> GraphFn:
    """Upper unit-circle branch a(xi2) = sqrt(1 - xi2^2), continued past 0.95."""

    def deriv(x1, x2, xi2, order):
        return _circle_sqrt(xi2, order) if order <= _CIRCLE_MAX_ORDER else None

    zero = lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape)
    return GraphFn(
        name="circle",
        value=lambda x1, x2, xi2: _circle_sqrt(xi2, 0) + 0.0 * np.asarray(x2),
        d_xi2=lambda x1, x2, xi2: _circle_sqrt(xi2, 1) + 0.0 * np.asarray(x2),
        d_x2=zero,
        d2_xi2_xi2=lambda x1, x2, xi2: _circle_sqrt(xi2, 2) + 0.0 * np.asarray(x2),
        d2_x2_xi2=zero,
        d2_x2_x2=zero,
        x_dependent=False,
        xi2_derivative=deriv,
    )


def graph_parabola(coeff: float = 1.0) -> GraphFn:
    """a(xi2) = coeff * xi2^2: the canonical curved branch, constant curvature."""

    def deriv(x1, x2, xi2, order):
        if order == 0:
            return coeff * np.asarray(xi2) ** 2
        if order == 1:
            return 2.0 * coeff * np.asarray(xi2)
        if order == 2:
            return 2.0 * coeff * np.ones_like(np.asarray(xi2, dtype=float))
        return np.zeros_like(np.asarray(xi2, dtype=float))

    return GraphFn(
        name="parabola",
        value=lambda x1, x2, xi2: coeff * np.asarray(xi2) ** 2 + 0.0 * np.asarray(x2),
        d_xi2=lambda x1, x2, xi2: 2.0 * coeff * np.asarray(xi2) + 0.0 * np.asarray(x2),
        d_x2=lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape),
        d2_xi2_xi2=lambda x1, x2, xi2: 2.0 * coeff + 0.0 * np.asarray(xi2 + x2),
        d2_x2_xi2=lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape),
        d2_x2_x2=lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape),
        x_dependent=False,
        xi2_derivative=deriv,
    )


def graph_flat() -> GraphFn:
    """a = 0: the straightened branch xi1 = 0."""

    def deriv(x1, x2, xi2, order):
        if order == 0:
            return np.zeros_like(np.asarray(xi2, dtype=float))
        return np.zeros_like(np.asarray(xi2, dtype=float))

    zero = lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape)
    return GraphFn("flat", zero, zero, zero, zero, zero, zero, False, deriv)


def graph_monomial(k: int, c: float) -> GraphFn:
    """a(xi2) = c * xi2^(k+1) (the flat-contact normal form graph)."""
    if c == 0:
        raise ValueError("monomial graph requires c != 0")
    m = k + 1

    def dpoly(t, order):
        t = np.asarray(t, dtype=float)
        if order > m:
            return np.zeros_like(t)
        fac = c * math.factorial(m) / math.factorial(m - order)
        return fac * t ** (m - order)

    def deriv(x1, x2, xi2, order):
        return dpoly(xi2, order)

    zero = lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape)
    return GraphFn(
        name=f"monomial(k={k}, c={c})",
        value=lambda x1, x2, xi2: dpoly(xi2, 0) + 0.0 * np.asarray(x2),
        d_xi2=lambda x1, x2, xi2: dpoly(xi2, 1) + 0.0 * np.asarray(x2),
        d_x2=zero,
        d2_xi2_xi2=lambda x1, x2, xi2: dpoly(xi2, 2) + 0.0 * np.asarray(x2),
        d2_x2_xi2=zero,
        d2_x2_x2=zero,
        x_dependent=False,
        xi2_derivative=deriv,
    )


def graph_shear() -> GraphFn:
    """a(x, xi2) = x2 * xi2: linear flow with exact exponential characteristics."""

    def deriv(x1, x2, xi2, order):
        x2a = np.asarray(x2, dtype=float)
        xi2a = np.asarray(xi2, dtype=float)
        if order == 0:
            return x2a * xi2a
        if order == 1:
            return x2a + 0.0 * xi2a
        return np.zeros(np.broadcast(x2a, xi2a).shape)

    zero = lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape)
    one = lambda x1, x2, xi2: np.ones(np.broadcast(x1, x2, xi2).shape)
    return GraphFn(
        name="shear",
        value=lambda x1, x2, xi2: np.asarray(x2) * np.asarray(xi2),
        d_xi2=lambda x1, x2, xi2: np.asarray(x2) + 0.0 * np.asarray(xi2),
        d_x2=lambda x1, x2, xi2: np.asarray(xi2) + 0.0 * np.asarray(x2),
        d2_xi2_xi2=zero,
        d2_x2_xi2=one,
        d2_x2_x2=zero,
        x_dependent=True,
        xi2_derivative=deriv,
    )


def graph_tilted_circle(tilt: float = 0.1) -> GraphFn:
    """a = sqrt(1 - xi2^2) + tilt * x2 * xi2^2: curved branch with x-dependence."""

    def deriv(x1, x2, xi2, order):
        if order > _CIRCLE_MAX_ORDER:
            return None
        x2a = np.asarray(x2, dtype=float)
        base = _circle_sqrt(xi2, order)
        if order == 0:
            return base + tilt * x2a * np.asarray(xi2) ** 2
        if order == 1:
            return base + 2.0 * tilt * x2a * np.asarray(xi2)
        if order == 2:
            return base + 2.0 * tilt * x2a
        return base

    zero = lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape)
    return GraphFn(
        name="tilted_circle",
        value=lambda x1, x2, xi2: _circle_sqrt(xi2, 0) + tilt * np.asarray(x2) * np.asarray(xi2) ** 2,
        d_xi2=lambda x1, x2, xi2: _circle_sqrt(xi2, 1) + 2.0 * tilt * np.asarray(x2) * np.asarray(xi2),
        d_x2=lambda x1, x2, xi2: tilt * np.asarray(xi2) ** 2 + 0.0 * np.asarray(x2),
        d2_xi2_xi2=lambda x1, x2, xi2: _circle_sqrt(xi2, 2) + 2.0 * tilt * np.asarray(x2) + 0.0 * np.asarray(xi2),
        d2_x2_xi2=lambda x1, x2, xi2: 2.0 * tilt * np.asarray(xi2) + 0.0 * np.asarray(x2),
        d2_x2_x2=zero,
        x_dependent=True,
        xi2_derivative=deriv,
    )


def graph_sum(g1: GraphFn, g2: GraphFn) -> GraphFn:
    """Pointwise sum of two graphs (e.g. a curved branch plus a contact bump)."""

    def deriv(x1, x2, xi2, order):
        d1 = g1.xi2_derivative(x1, x2, xi2, order)
        d2 = g2.xi2_derivative(x1, x2, xi2, order)
        if d1 is None or d2 is None:
            return None
        return d1 + d2

    pair = lambda f1, f2: (lambda x1, x2, xi2: f1(x1, x2, xi2) + f2(x1, x2, xi2))
    return GraphFn(
        name=f"{g1.name}+{g2.name}",
        value=pair(g1.value, g2.value),
        d_xi2=pair(g1.d_xi2, g2.d_xi2),
        d_x2=pair(g1.d_x2, g2.d_x2),
        d2_xi2_xi2=pair(g1.d2_xi2_xi2, g2.d2_xi2_xi2),
        d2_x2_xi2=pair(g1.d2_x2_xi2, g2.d2_x2_xi2),
        d2_x2_x2=pair(g1.d2_x2_x2, g2.d2_x2_x2),
        x_dependent=g1.x_dependent or g2.x_dependent,
        xi2_derivative=deriv,
    )


_GRAPH_BUILDERS = {
    "circle": graph_circle,
    "parabola": graph_parabola,
    "flat": graph_flat,
    "shear": graph_shear,
    "tilted_circle": graph_tilted_circle,
    "monomial": graph_monomial,
}


def graph_catalog(name: str, **params) -> GraphFn:
    """Named graph lookup used by config files and the CLI."""
    try:
        builder = _GRAPH_BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown graph '{name}'; have {sorted(_GRAPH_BUILDERS)}") from None
    return builder(**params)


# ---------------------------------------------------------------------------
# graph branches: callables xi2 -> xi1 with optional closed-form derivatives
# ---------------------------------------------------------------------------

class GraphBranch:
    """Branch of {p = 0} as xi1 = g(xi2) at a fixed base point x."""

    def __init__(self, fn: Callable, deriv: Callable | None = None, label: str = "graph"):
        self._fn = fn
        self._deriv = deriv
        self.label = label

    def __call__(self, xi2):
        return self._fn(xi2)

    def derivative(self, xi2, order: int):
        """Closed-form d^order g / dxi2^order, or None when unavailable."""
        if order == 0:
            return self._fn(xi2)
        if self._deriv is None:
            return None
        return self._deriv(xi2, order)


class NewtonBranch(GraphBranch):
    """Numeric branch solved by Newton iteration with residual <= tol."""

    def __init__(self, sym: "SymbolSpec", x=(0.0, 0.0), xi1_start: float = 0.0,
                 tol: float = 1e-12, max_iter: int = 80):
        self.sym = sym
        self.x = x
        self.xi1_start = xi1_start
        self.tol = tol
        self.max_iter = max_iter
        super().__init__(self._solve, None, label=f"newton[{sym.label}]")

    def _solve(self, xi2):
        xi2 = np.asarray(xi2, dtype=float)
        scalar = xi2.ndim == 0
        xi2 = np.atleast_1d(xi2)
        x1, x2 = self.x
        xi1 = np.full(xi2.shape, float(self.xi1_start))
        for _ in range(self.max_iter):
            r = np.asarray(self.sym.value(x1, x2, xi1, xi2), dtype=complex).real
            if np.max(np.abs(r)) <= self.tol:
                break
            dp = np.asarray(self.sym.xi1_partial(x1, x2, xi1, xi2), dtype=complex).real
            if np.any(np.abs(dp) < 1e-14):
                raise ValueError("Newton branch: vanishing d p / d xi1 (no graph here)")
            xi1 = xi1 - r / dp
        else:
            raise ValueError("Newton branch did not converge")
        return float(xi1[0]) if scalar else xi1


@dataclass(frozen=True)
class SymbolSpec:
    """Named, parameterized symbol with evaluators.

    value / xi1_partial / xi2_partial take broadcastable (x1, x2, xi1, xi2).
    ``graph`` returns the branch of {p = 0} through a requested point.
    """

    family: str
    label: str
    params: dict = field(default_factory=dict)
    x_dependent: bool = False
    value: Callable = None
    xi1_partial: Callable = None
    xi2_partial: Callable = None
    _graph: Callable = None  # (x, xi0) -> GraphBranch

    def xi_gradient(self, x1, x2, xi1, xi2):
        return self.xi1_partial(x1, x2, xi1, xi2), self.xi2_partial(x1, x2, xi1, xi2)

    def graph(self, x=(0.0, 0.0), xi0=None) -> GraphBranch:
        if self._graph is None:
            raise ValueError(f"symbol '{self.label}' has no graph representation")
        return self._graph(x, xi0)


# ---------------------------------------------------------------------------
# symbol factories
# ---------------------------------------------------------------------------

def circle_minus_one() -> SymbolSpec:
    """p(xi) = |xi|^2 - 1."""

    def graph(x, xi0):
        sign = 1.0 if xi0 is None or xi0[0] >= 0 else -1.0
        return GraphBranch(
            lambda t: sign * _circle_sqrt(t, 0),
            lambda t, r: sign * _circle_sqrt(t, r) if r <= _CIRCLE_MAX_ORDER else None,
            label="circle_branch",
        )

    return SymbolSpec(
        family="circle_minus_one",
        label="circle_minus_one",
        x_dependent=False,
        value=lambda x1, x2, xi1, xi2: np.asarray(xi1) ** 2 + np.asarray(xi2) ** 2 - 1.0,
        xi1_partial=lambda x1, x2, xi1, xi2: 2.0 * np.asarray(xi1) + 0.0 * np.asarray(xi2),
        xi2_partial=lambda x1, x2, xi1, xi2: 2.0 * np.asarray(xi2) + 0.0 * np.asarray(xi1),
        _graph=graph,
    )


def contact_perturbed_circle(k: int, c: float) -> SymbolSpec:
    """p(xi) = xi1 - sqrt(1 - xi2^2) - c * xi2^(k+1), touching the circle at (1, 0)."""
    if c == 0:
        raise ValueError("contact_perturbed_circle requires c != 0")
    if k < 1:
        raise ValueError("contact order parameter k must be >= 1")
    m = k + 1

    def gval(t):
        return _circle_sqrt(t, 0) + c * np.asarray(t) ** m

    def gder(t, r):
        circ = _circle_sqrt(t, r) if r <= _CIRCLE_MAX_ORDER else None
        if circ is None:
            return None
        poly = 0.0 if r > m else c * math.factorial(m) / math.factorial(m - r) * np.asarray(t) ** (m - r)
        return circ + poly

    return SymbolSpec(
        family="contact_perturbed_circle",
        label=f"contact_circle(k={k}, c={c})",
        params={"k": k, "c": c},
        x_dependent=False,
        value=lambda x1, x2, xi1, xi2: np.asarray(xi1) - gval(xi2),
        xi1_partial=lambda x1, x2, xi1, xi2: np.ones(np.broadcast(xi1, xi2).shape),
        xi2_partial=lambda x1, x2, xi1, xi2: -(gder(xi2, 1)) + 0.0 * np.asarray(xi1),
        _graph=lambda x, xi0: GraphBranch(gval, gder, label="perturbed_circle_branch"),
    )


def flat_contact(k: int, c: float) -> SymbolSpec:
    """p(xi) = xi1 - c * xi2^(k+1): local normal form of kth-order contact."""
    g = graph_monomial(k, c)
    return SymbolSpec(
        family="flat_contact",
        label=f"flat_contact(k={k}, c={c})",
        params={"k": k, "c": c},
        x_dependent=False,
        value=lambda x1, x2, xi1, xi2: np.asarray(xi1) - g.value(x1, x2, xi2),
        xi1_partial=lambda x1, x2, xi1, xi2: np.ones(np.broadcast(xi1, xi2).shape),
        xi2_partial=lambda x1, x2, xi1, xi2: -g.d_xi2(x1, x2, xi2) + 0.0 * np.asarray(xi1),
        _graph=lambda x, xi0: GraphBranch(
            lambda t: g.value(0.0, 0.0, t),
            lambda t, r: g.xi2_derivative(0.0, 0.0, t, r),
            label="flat_contact_branch",
        ),
    )


def graph_symbol(graph_fn: GraphFn) -> SymbolSpec:
    """p(x, xi) = xi1 - a(x, xi2) for a catalog graph a."""
    return SymbolSpec(
        family="graph",
        label=f"graph[{graph_fn.name}]",
        params={"graph": graph_fn.name},
        x_dependent=graph_fn.x_dependent,
        value=lambda x1, x2, xi1, xi2: np.asarray(xi1) - graph_fn.value(x1, x2, xi2),
        xi1_partial=lambda x1, x2, xi1, xi2: np.ones(np.broadcast(xi1, xi2).shape),
        xi2_partial=lambda x1, x2, xi1, xi2: -graph_fn.d_xi2(x1, x2, xi2) + 0.0 * np.asarray(xi1),
        _graph=lambda x, xi0: GraphBranch(
            lambda t: graph_fn.value(x[0], x[1], t),
            lambda t, r: graph_fn.xi2_derivative(x[0], x[1], t, r),
            label=f"graph[{graph_fn.name}]",
        ),
    )


def custom_symbol(value, label="custom", x_dependent=False, xi1_partial=None,
                  xi2_partial=None, graph=None) -> SymbolSpec:
    """Symbol from plain callables; graph defaults to a Newton solve."""

    def default_graph(x, xi0):
        start = 0.0 if xi0 is None else float(xi0[0])
        return NewtonBranch(spec, x=x, xi1_start=start)

    def fd_xi1(x1, x2, xi1, xi2, eta=1e-6):
        return (np.asarray(value(x1, x2, xi1 + eta, xi2)) - np.asarray(value(x1, x2, xi1 - eta, xi2))) / (2 * eta)

    spec = SymbolSpec(
        family="custom",
        label=label,
        x_dependent=x_dependent,
        value=value,
        xi1_partial=xi1_partial or fd_xi1,
        xi2_partial=xi2_partial,
        _graph=graph or default_graph,
    )
    return spec


def multiplier_symbol(fn_of_xi, label) -> SymbolSpec:
    """x-independent symbol p(xi1, xi2) given as a plain function of xi."""
    return SymbolSpec(
        family="multiplier",
        label=label,
        x_dependent=False,
        value=lambda x1, x2, xi1, xi2: fn_of_xi(np.asarray(xi1), np.asarray(xi2)),
    )


def xi1_symbol() -> SymbolSpec:
    """p = xi1, i.e. the operator h D_{x1}."""
    return multiplier_symbol(lambda a, b: a + 0.0 * b, "xi1")


def xi2_power_symbol(m: int) -> SymbolSpec:
    """p = xi2^m, i.e. the operator (h D_{x2})^m = h^m D_{x2}^m."""
    return multiplier_symbol(lambda a, b: b ** m + 0.0 * a, f"xi2^{m}")


# ---------------------------------------------------------------------------
# contact order
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactReport:
    """Result of contact detection between two characteristic graphs."""

    xi0: tuple[float, float]
    order: float  # integer k, or math.inf when no derivative separates
    first_nonzero_derivative: float
    derivative_table: tuple[float, ...]  # d^r (g1 - g2), r = 1 .. len
    curvature: float  # |g1''(xi0)|, second-fundamental-form proxy
    inconclusive: bool = False


_FD_STEPS = (1e-2, 5e-3)


def _fd_derivative(fn, t0: float, order: int, step: float) -> float:
    """Centered finite difference of given order, O(step^2)."""
    acc = 0.0
    for i in range(order + 1):
        offset = order / 2.0 - i
        acc += (-1.0) ** i * math.comb(order, i) * float(fn(t0 + offset * step))
    return acc / step ** order


def _richardson_derivative(fn, t0: float, order: int, step: float = _FD_STEPS[0]) -> float:
    d1 = _fd_derivative(fn, t0, order, step)
    d2 = _fd_derivative(fn, t0, order, step / 2.0)
    return (4.0 * d2 - d1) / 3.0


def contact_order(a_sym: SymbolSpec, q_sym: SymbolSpec, xi0, max_order: int,
                  x=(0.0, 0.0), tol: float = 1e-8) -> ContactReport:
    """Order of contact of the two characteristic graphs at xi0.

    k = (order of the first non-vanishing xi2-derivative of g1 - g2) - 1.
    Derivatives within [tol_r/10, tol_r] of the vanishing threshold flag the
    report inconclusive rather than silently classifying.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    g1 = a_sym.graph(x=x, xi0=xi0)
    g2 = q_sym.graph(x=x, xi0=xi0)
    t0 = float(xi0[1])

    gap = abs(float(g1(t0)) - float(g2(t0)))
    scale0 = 1.0 + abs(float(g1(t0)))
    if gap > tol * scale0:
        raise ContactError(
            f"graphs of {a_sym.label} and {q_sym.label} do not intersect at {tuple(xi0)} "
            f"(|g1 - g2| = {gap:.3e})"
        )

    def diff(t):
        return float(g1(t)) - float(g2(t))

    table = []
    scales = [abs(float(g1(t0)))]
    inconclusive = False
    order_found = None
    first_nonzero = 0.0
    for r in range(1, max_order + 2):
        d1r = g1.derivative(t0, r)
        d2r = g2.derivative(t0, r)
        if d1r is not None and d2r is not None:
            dr = float(d1r) - float(d2r)
            scales.append(abs(float(d1r)))
        else:
            dr = _richardson_derivative(diff, t0, r)
            s1 = g1.derivative(t0, r)
            scales.append(abs(float(s1)) if s1 is not None
                          else abs(_richardson_derivative(lambda t: float(g1(t)), t0, r)))
        table.append(dr)
        tol_r = tol * (1.0 + max(scales))
        if abs(dr) > tol_r:
            order_found = r - 1
            first_nonzero = dr
            break
        if tol_r / 10.0 <= abs(dr) <= tol_r:
            inconclusive = True

    curv = g1.derivative(t0, 2)
    if curv is None:
        curv = _richardson_derivative(lambda t: float(g1(t)), t0, 2)
    return ContactReport(
        xi0=(float(xi0[0]), float(xi0[1])),
        order=math.inf if order_found is None else order_found,
        first_nonzero_derivative=first_nonzero,
        derivative_table=tuple(table),
        curvature=abs(float(curv)),
        inconclusive=inconclusive,
    )


def graph_of(sym: SymbolSpec, x=(0.0, 0.0), xi0=None) -> GraphBranch:
    """The branch of {p(x, .) = 0} as a callable xi2 -> xi1."""
    return sym.graph(x=x, xi0=xi0)


# ---------------------------------------------------------------------------
# left quantization
# ---------------------------------------------------------------------------

QUANTIZATION_N_GUARD = 128
_X2_CHUNK = 16


def apply_left_quantization(sym: SymbolSpec, u: Field2D, force: bool = False) -> Field2D:
    """Apply p(x, hD) to a field.

    x-independent symbols act as spectral multipliers.  x-dependent symbols
    use the direct O(N^4) quadrature and are refused for N > 128 unless
    ``force`` is set.
    """
    g = u.grid
    spec = semiclassical_fft(u)
    if not sym.x_dependent:
        xi1, xi2 = g.xi_mesh()
        mult = np.asarray(sym.value(0.0, 0.0, xi1, xi2), dtype=np.complex128)
        return semiclassical_ifft(SpectralField2D(g, spec.values * mult))
    if g.points_per_axis > QUANTIZATION_N_GUARD and not force:
        raise CostGuardError(
            f"x-dependent quantization at N = {g.points_per_axis} exceeds the "
            f"N <= {QUANTIZATION_N_GUARD} cost guard (force=True to override)"
        )
    n = g.points_per_axis
    x = g.x_coords
    xi = g.xi_coords
    E = np.exp(1j * np.outer(x, xi) / g.h)  # shared by both axes
    scale = g.dxi ** 2 / (2.0 * np.pi * g.h)
    out = np.empty((n, n), dtype=np.complex128)
    for i1 in range(n):
        w = (E[i1, :, None] * spec.values) * scale  # (n_xi1, n_xi2)
        for j0 in range(0, n, _X2_CHUNK):
            j1 = min(j0 + _X2_CHUNK, n)
            p_block = np.asarray(
                sym.value(x[i1], x[j0:j1][:, None, None],
                          xi[None, :, None], xi[None, None, :]),
                dtype=np.complex128,
            )
            out[i1, j0:j1] = np.einsum("xmn,mn,xn->x", p_block, w, E[j0:j1])
    return Field2D(g, out)
