"""WKB propagator for the straightening operator W(x1).

W(x1) intertwines hD_{x1} with the graph generator a(x, hD_{x2}):
hD_{x1} W = -W a(x, hD_{x2}).  Its kernel is realized as

    W g(x2)  = (2 pi h)^{-1} Int e^{ i (phi(x1, x2, xi2) - y2 xi2) / h }
               b(x1, x2, xi2) g(y2) dy2 dxi2

with the phase solving the eikonal problem

    d_{x1} phi + a(x1, y2, d_{y2} phi) = 0,   phi(0, y2, xi2) = y2 xi2,

and b = 1 at leading order (optionally corrected by the half-density
Jacobian factor).  For x-independent generators phi = y2 xi2 - x1 a(xi2)
exactly and W reduces to the unitary multiplier e^{-i x1 a(xi2)/h}; the
oscillatory-quadrature path reproduces that multiplier to rounding, which is
regression-tested.  The adjoint W* is the exact discrete adjoint, so
<W g, u> = <g, W* u> holds at quadrature level.

Phases for x-dependent generators are tabulated by the method of
characteristics: Hamiltonian trajectories (RK4, fixed step, with the 2x2
variational system for the Jacobian) carry the action, and each saved x1
slice is interpolated back to the rectangular (y2, xi2) grid by a cubic
spline in the launch point.  Caustics (|dy/dy0| < 0.1) shorten the usable
horizon rather than being crossed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import Field2D, GridSpec, isfft1d, sfft1d
from .symbols import GraphFn, SymbolSpec, custom_symbol

__all__ = [
    "HamiltonianFlow",
    "PhaseTable",
    "CausticError",
    "integrate_flow",
    "build_phase",
    "analytic_phase_table",
    "eikonal_residual",
    "apply_w",
    "apply_w_star",
    "conjugated_symbol",
    "quasimode_pushforward",
]

CAUSTIC_THRESHOLD = 0.1


class CausticError(RuntimeError):
    """Requested propagation time lies beyond the caustic-free horizon."""


# ---------------------------------------------------------------------------
# Hamiltonian flow with variational system and action
# ---------------------------------------------------------------------------

def _flow_rhs(graph: GraphFn, t: float, y: np.ndarray, xi: np.ndarray,
              jac: np.ndarray):
    """Time derivatives of (y, xi, J, S) for the generator a."""
    a = np.asarray(graph.value(t, y, xi), dtype=float)
    a_xi = np.asarray(graph.d_xi2(t, y, xi), dtype=float)
    a_y = np.asarray(graph.d_x2(t, y, xi), dtype=float)
    a_yxi = np.asarray(graph.d2_x2_xi2(t, y, xi), dtype=float)
    a_xixi = np.asarray(graph.d2_xi2_xi2(t, y, xi), dtype=float)
    a_yy = np.asarray(graph.d2_x2_x2(t, y, xi), dtype=float)
    dy = a_xi
    dxi = -a_y
    # tangent system dJ/dt = A J with A = [[a_yxi, a_xixi], [-a_yy, -a_yxi]]
    djac = np.empty_like(jac)
    djac[..., 0, 0] = a_yxi * jac[..., 0, 0] + a_xixi * jac[..., 1, 0]
    djac[..., 0, 1] = a_yxi * jac[..., 0, 1] + a_xixi * jac[..., 1, 1]
    djac[..., 1, 0] = -a_yy * jac[..., 0, 0] - a_yxi * jac[..., 1, 0]
    djac[..., 1, 1] = -a_yy * jac[..., 0, 1] - a_yxi * jac[..., 1, 1]
    ds = xi * a_xi - a
    return dy, dxi, djac, ds


def _rk4_march(graph: GraphFn, y, xi, jac, action, t0: float, dt: float, steps: int):
    """Advance the joint state in place-free RK4 for a number of steps."""
    for s in range(steps):
        t = t0 + s * dt
        k1 = _flow_rhs(graph, t, y, xi, jac)
        k2 = _flow_rhs(graph, t + dt / 2, y + dt / 2 * k1[0], xi + dt / 2 * k1[1], jac + dt / 2 * k1[2])
        k3 = _flow_rhs(graph, t + dt / 2, y + dt / 2 * k2[0], xi + dt / 2 * k2[1], jac + dt / 2 * k2[2])
        k4 = _flow_rhs(graph, t + dt, y + dt * k3[0], xi + dt * k3[1], jac + dt * k3[2])
        y = y + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        xi = xi + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        jac = jac + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        action = action + dt / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    return y, xi, jac, action


@dataclass(frozen=True)
class HamiltonianFlow:
    """Trajectories of dy/dt = a_xi, dxi/dt = -a_y from a grid of initial data.

    Snapshots at the saved x1 values carry positions, momenta, the 2x2
    variational Jacobian and the accumulated action Int (xi a_xi - a) dt.
    """

    graph: GraphFn
    y_init: np.ndarray
    xi_init: np.ndarray
    dt: float
    x1_values: np.ndarray
    y_of: np.ndarray       # (n_save, ny, nxi)
    xi_of: np.ndarray
    jac: np.ndarray        # (n_save, ny, nxi, 2, 2)
    action: np.ndarray     # (n_save, ny, nxi)
    box_half_width: float | None = None
    exited_box: np.ndarray | None = None
    energy_drift: float = 0.0

    def evaluate(self, y0, xi0, x1: float):
        """Flow arbitrary initial data to time x1 by re-integration."""
        y0 = np.asarray(y0, dtype=float)
        xi0 = np.asarray(xi0, dtype=float)
        y0b, xi0b = np.broadcast_arrays(y0, xi0)
        shape = y0b.shape
        jac = np.zeros(shape + (2, 2))
        jac[..., 0, 0] = 1.0
        jac[..., 1, 1] = 1.0
        steps = max(1, int(round(x1 / self.dt)))
        dt = x1 / steps
        y, xi, _, _ = _rk4_march(self.graph, y0b.astype(float), xi0b.astype(float),
                                 jac, np.zeros(shape), 0.0, dt, steps)
        return y, xi


def integrate_flow(a_graph: GraphFn, y_init: np.ndarray, xi_init: np.ndarray,
                   x1_max: float, dt: float | None = None,
                   save_at: np.ndarray | None = None,
                   box_half_width: float | None = None) -> HamiltonianFlow:
    """RK4 integration of the classical system over the initial-data mesh.

    dt defaults to min(1e-3, x1_max/100) and is rounded so saved times land
    exactly on steps.  Trajectories that leave the box are flagged, not
    clipped; the conservation of a along the flow (for autonomous a) is
    recorded as energy_drift.
    """
    if x1_max <= 0:
        raise ValueError("x1_max must be positive")
    y_init = np.asarray(y_init, dtype=float)
    xi_init = np.asarray(xi_init, dtype=float)
    if dt is None:
        dt = min(1e-3, x1_max / 100.0)
    n_steps = max(1, int(math.ceil((x1_max / dt) * (1.0 - 1e-12))))
    dt = x1_max / n_steps
    if save_at is None:
        save_at = np.array([0.0, x1_max])
    save_steps = sorted({int(round(t / dt)) for t in np.asarray(save_at, dtype=float)} | {0})
    if save_steps[-1] > n_steps:
        raise ValueError("save_at contains times beyond x1_max")

    y = np.repeat(y_init[:, None], len(xi_init), axis=1)
    xi = np.repeat(xi_init[None, :], len(y_init), axis=0)
    jac = np.zeros(y.shape + (2, 2))
    jac[..., 0, 0] = 1.0
    jac[..., 1, 1] = 1.0
    action = np.zeros_like(y)
    a0 = np.asarray(a_graph.value(0.0, y, xi), dtype=float)

    snaps_y, snaps_xi, snaps_jac, snaps_action, times = [], [], [], [], []
    prev = 0
    for s in save_steps:
        y, xi, jac, action = _rk4_march(a_graph, y, xi, jac, action,
                                        prev * dt, dt, s - prev)
        prev = s
        times.append(s * dt)
        snaps_y.append(y.copy())
        snaps_xi.append(xi.copy())
        snaps_jac.append(jac.copy())
        snaps_action.append(action.copy())

    a_end = np.asarray(a_graph.value(times[-1], y, xi), dtype=float)
    drift = float(np.max(np.abs(a_end - a0)))
    exited = None
    if box_half_width is not None:
        exited = np.abs(snaps_y[-1]) > box_half_width
        if exited.any():
            warnings.warn(
                f"{int(exited.sum())} trajectories left the box [-{box_half_width}, "
                f"{box_half_width}] by x1 = {times[-1]:.3g}", stacklevel=2)
    return HamiltonianFlow(
        graph=a_graph, y_init=y_init, xi_init=xi_init, dt=dt,
        x1_values=np.asarray(times), y_of=np.stack(snaps_y),
        xi_of=np.stack(snaps_xi), jac=np.stack(snaps_jac),
        action=np.stack(snaps_action), box_half_width=box_half_width,
        exited_box=exited, energy_drift=drift,
    )


# ---------------------------------------------------------------------------
# phase tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseTable:
    """Eikonal phase phi(x1, y, xi) and leading amplitude on a slice grid.

    Analytic tables (x-independent generators) evaluate the closed form
    phi = y xi - x1 a(xi) at any x1; tabulated ones carry interpolated slices
    at the saved x1 values up to the caustic-safe horizon.
    """

    graph: GraphFn
    h: float
    y_grid: np.ndarray
    xi_grid: np.ndarray
    x1_values: np.ndarray
    analytic: bool
    phi: np.ndarray | None = None   # (n_x1, ny, nxi) when not analytic
    amp: np.ndarray | None = None   # half-density correction, None means b = 1
    x1_max: float = math.inf
    caustic_limited: bool = False
    coverage_gaps: int = 0

    def slice_index(self, x1: float) -> int:
        i = int(np.argmin(np.abs(self.x1_values - x1)))
        if abs(self.x1_values[i] - x1) > 1e-9:
            raise ValueError(
                f"x1 = {x1} is not a stored slice (have {np.round(self.x1_values, 6)})")
        return i

    def phi_at(self, x1: float, y, xi):
        """Phase values, broadcasting y against xi."""
        self._check_horizon(x1)
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.analytic:
            return y * xi - x1 * np.asarray(self.graph.value(x1, 0.0, xi), dtype=float)
        i = self.slice_index(x1)
        table = self.phi[i]
        yb, xib = np.broadcast_arrays(y, xi)
        out = np.empty(yb.shape)
        # cubic interpolation along y for each required xi column
        cols = {}
        xi_idx = np.searchsorted(self.xi_grid, xib.ravel())
        for flat_i, (yy, col) in enumerate(zip(yb.ravel(), np.clip(xi_idx, 0, len(self.xi_grid) - 1))):
            if abs(self.xi_grid[col] - xib.ravel()[flat_i]) > 1e-9:
                raise ValueError("tabulated phase queried off the xi grid")
            if col not in cols:
                cols[col] = CubicSpline(self.y_grid, table[:, col])
            out.ravel()[flat_i] = cols[col](yy)
        return out

    def amp_at(self, x1: float, y, xi):
        if self.amp is None:
            return np.ones(np.broadcast(np.asarray(y), np.asarray(xi)).shape)
        i = self.slice_index(x1)
        yb, xib = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(xi, dtype=float))
        out = np.empty(yb.shape)
        for m, xiv in enumerate(self.xi_grid):
            mask = np.abs(xib - xiv) < 1e-12
            if mask.any():
                out[mask] = np.interp(yb[mask], self.y_grid, self.amp[i][:, m])
        return out

    def _check_horizon(self, x1: float) -> None:
        if abs(x1) > self.x1_max + 1e-12:
            raise CausticError(
                f"x1 = {x1} beyond the caustic-free horizon {self.x1_max:.4g}")

    def slice_arrays(self, x1: float):
        """(phi, amp) on the full (y, xi) grid at one stored slice."""
        self._check_horizon(x1)
        if self.analytic:
            a_vals = np.asarray(self.graph.value(x1, 0.0, self.xi_grid), dtype=float)
            phi = self.y_grid[:, None] * self.xi_grid[None, :] - x1 * a_vals[None, :]
            return phi, np.ones_like(phi)
        i = self.slice_index(x1)
        amp = np.ones_like(self.phi[i]) if self.amp is None else self.amp[i]
        return self.phi[i], amp


def analytic_phase_table(a_graph: GraphFn, grid: GridSpec) -> PhaseTable:
    """Closed-form table for x-independent generators (no caustics)."""
    if a_graph.x_dependent:
        raise ValueError("analytic phase tables need an x-independent generator")
    return PhaseTable(
        graph=a_graph, h=grid.h, y_grid=grid.x_coords, xi_grid=grid.xi_coords,
        x1_values=np.array([0.0]), analytic=True,
    )


def build_phase(flow: HamiltonianFlow, grid: GridSpec,
                transport_correction: bool = False,
                y_out: np.ndarray | None = None) -> PhaseTable:
    """Assemble phi on the rectangular (y, xi) grid from characteristics.

    phi(x1, y(t; y0, xi), xi) = y0 xi + action(t; y0, xi); each slice is
    pulled back from the launch points to the output y grid (default: the
    launch grid itself) by a cubic spline.  A slice whose Jacobian dy/dy0
    dips below the caustic threshold truncates the horizon (reported, never
    crossed).  b = 1 unless the half-density correction |dy/dy0|^{-1/2} is
    requested.
    """
    if not flow.graph.x_dependent:
        table = analytic_phase_table(flow.graph, grid)
        if not np.array_equal(flow.xi_init, grid.xi_coords):
            warnings.warn("flow xi grid differs from the lattice; analytic table "
                          "uses the closed form anyway", stacklevel=2)
        return table
    y_grid = flow.y_init if y_out is None else np.asarray(y_out, dtype=float)
    xi_grid = flow.xi_init
    launch = flow.y_init
    n_save = len(flow.x1_values)
    phi = np.empty((n_save, len(y_grid), len(xi_grid)))
    amp = np.empty_like(phi) if transport_correction else None
    horizon = flow.x1_values[-1]
    caustic_limited = False
    gaps = 0
    usable = n_save
    for s in range(n_save):
        j11 = flow.jac[s][..., 0, 0]
        if np.min(j11) < CAUSTIC_THRESHOLD:
            horizon = flow.x1_values[s - 1] if s > 0 else 0.0
            caustic_limited = True
            usable = s
            warnings.warn(
                f"caustic (|dy/dy0| < {CAUSTIC_THRESHOLD}) at x1 = "
                f"{flow.x1_values[s]:.4g}; horizon shortened to {horizon:.4g}",
                stacklevel=2)
            break
        for m, xiv in enumerate(xi_grid):
            y_t = flow.y_of[s][:, m]
            if np.any(np.diff(y_t) <= 0):
                raise CausticError("trajectory fan folded despite Jacobian check")
            phi_traj = launch * xiv + flow.action[s][:, m]
            spline = CubicSpline(y_t, phi_traj)
            phi[s, :, m] = spline(y_grid)
            gaps += int(np.count_nonzero((y_grid < y_t[0]) | (y_grid > y_t[-1])))
            if transport_correction:
                amp[s, :, m] = np.interp(y_grid, y_t, j11[:, m]) ** -0.5
    if flow.x1_values[0] == 0.0:
        phi[0] = y_grid[:, None] * xi_grid[None, :]  # exact initial condition
        if transport_correction:
            amp[0] = 1.0
    return PhaseTable(
        graph=flow.graph, h=grid.h, y_grid=y_grid, xi_grid=xi_grid,
        x1_values=flow.x1_values[:usable], analytic=False,
        phi=phi[:usable], amp=None if amp is None else amp[:usable],
        x1_max=float(horizon), caustic_limited=caustic_limited,
        coverage_gaps=gaps,
    )


def eikonal_residual(table: PhaseTable, x1_index: int | None = None) -> float:
    """Max interior residual |d_{x1} phi + a(x1, y, d_y phi)| by centered FD.

    Needs at least three uniformly spaced stored slices (analytic tables are
    sampled on the stored x1 values the same way, which makes the FD
    truncation error visible for convergence tests).
    """
    t = table.x1_values
    if len(t) < 3:
        raise ValueError("need >= 3 slices for the residual check")
    slices = [table.slice_arrays(x1)[0] for x1 in t]
    phi = np.stack(slices)
    dy = table.y_grid[1] - table.y_grid[0]
    idx = range(1, len(t) - 1) if x1_index is None else [x1_index]
    worst = None
    for s in idx:
        left, right = t[s] - t[s - 1], t[s + 1] - t[s]
        if abs(left - right) > 1e-9 * max(left, right):
            continue  # slice without symmetric neighbors (e.g. next to t = 0)
        dphi_dt = (phi[s + 1] - phi[s - 1]) / (left + right)
        dphi_dy = (phi[s][2:, :] - phi[s][:-2, :]) / (2 * dy)
        y_int = table.y_grid[1:-1]
        a_vals = np.asarray(table.graph.value(t[s], y_int[:, None], dphi_dy), dtype=float)
        res = np.abs(dphi_dt[1:-1, :] + a_vals)
        worst = res.max() if worst is None else max(worst, float(res.max()))
    if worst is None:
        raise ValueError("no slice has symmetric neighbors for the centered difference")
    return float(worst)


# ---------------------------------------------------------------------------
# applying W and its adjoint
# ---------------------------------------------------------------------------

def _w_matrix(table: PhaseTable, x1: float, grid: GridSpec) -> np.ndarray:
    phi, amp = table.slice_arrays(x1)
    if phi.shape != (grid.points_per_axis, grid.points_per_axis):
        raise ValueError("phase table grids do not match the field lattice")
    return np.exp(1j * phi / grid.h) * amp


def apply_w(table: PhaseTable, g: np.ndarray, x1: float, grid: GridSpec,
            path: str = "auto") -> np.ndarray:
    """W(x1) applied to a 1-D field on the x2 lattice.

    path="multiplier" uses e^{-i x1 a(xi)/h} (x-independent generators only);
    "quadrature" evaluates the oscillatory kernel; "auto" picks the
    multiplier when available.  At x1 = 0 both paths are the identity.
    """
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != (grid.points_per_axis,):
        raise ValueError("apply_w expects a 1-D field on the grid")
    table._check_horizon(x1)
    if path == "auto":
        path = "multiplier" if table.analytic else "quadrature"
    ghat = sfft1d(g, grid)
    if path == "multiplier":
        if not table.analytic:
            raise ValueError("multiplier path requires an x-independent generator")
        a_vals = np.asarray(table.graph.value(x1, 0.0, grid.xi_coords), dtype=float)
        return isfft1d(np.exp(-1j * x1 * a_vals / grid.h) * ghat, grid)
    kernel = _w_matrix(table, x1, grid)  # (n_y=x2_out, n_xi)
    coef = grid.dxi / math.sqrt(2.0 * math.pi * grid.h)
    return coef * (kernel @ ghat)


def apply_w_star(table: PhaseTable, g: np.ndarray, x1: float, grid: GridSpec,
                 path: str = "auto") -> np.ndarray:
    """Exact discrete adjoint of :func:`apply_w` at the same slice."""
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != (grid.points_per_axis,):
        raise ValueError("apply_w_star expects a 1-D field on the grid")
    table._check_horizon(x1)
    if path == "auto":
        path = "multiplier" if table.analytic else "quadrature"
    if path == "multiplier":
        if not table.analytic:
            raise ValueError("multiplier path requires an x-independent generator")
        a_vals = np.asarray(table.graph.value(x1, 0.0, grid.xi_coords), dtype=float)
        return isfft1d(np.exp(1j * x1 * a_vals / grid.h) * sfft1d(g, grid), grid)
    kernel = _w_matrix(table, x1, grid)
    coef = grid.dx / math.sqrt(2.0 * math.pi * grid.h)
    ghat = coef * (kernel.conj().T @ g)
    return isfft1d(ghat, grid)


# ---------------------------------------------------------------------------
# Egorov pullback and the quasimode pushforward
# ---------------------------------------------------------------------------

def _as_graph_fn(sym) -> GraphFn:
    if isinstance(sym, GraphFn):
        return sym
    raise TypeError("conjugated_symbol needs GraphFn generators "
                    "(use graph_catalog / graph_* factories)")


def _pullback_graph_symbol(fn, label: str) -> SymbolSpec:
    """Wrap a numeric pullback a~(x2, xi2) as the graph symbol xi1 - a~."""

    def value(x1v, x2v, xi1v, xi2v):
        x2b, xi1b, xi2b = np.broadcast_arrays(np.asarray(x2v, dtype=float),
                                              np.asarray(xi1v, dtype=float),
                                              np.asarray(xi2v, dtype=float))
        return xi1b - fn(x2b, xi2b)

    def graph(x, xi0):
        from .symbols import GraphBranch
        x2f = x[1]
        return GraphBranch(lambda t: fn(x2f, np.asarray(t, dtype=float)), None,
                           label=label)

    return custom_symbol(
        value, label=label, x_dependent=True,
        xi1_partial=lambda x1v, x2v, xi1v, xi2v: np.ones(
            np.broadcast(np.asarray(xi1v), np.asarray(xi2v)).shape),
        graph=graph,
    )


def conjugated_symbol(a_graph: GraphFn, q_graph: GraphFn, flow: HamiltonianFlow,
                      x1: float):
    """Pull a and q back along the flow at time x1.

    Returns (a_tilde, q_tilde, p2_tilde) as symbols: the tilde graphs
    evaluate s(x1, y(x1; x2, xi2), xi(x1; x2, xi2)) at the frozen conjugation
    time, and p2_tilde = xi1 + a_tilde - q_tilde carries the graph branch
    xi1 = q_tilde - a_tilde for finite-difference contact checks.
    """
    a_graph = _as_graph_fn(a_graph)
    q_graph = _as_graph_fn(q_graph)
    if x1 < 0 or x1 > flow.x1_values[-1] + 1e-12:
        raise ValueError(f"x1 = {x1} outside the integrated range")

    def pullback(fn):
        def evaluate(x2, xi2):
            y, xi = flow.evaluate(x2, xi2, x1)
            return np.asarray(fn.value(x1, y, xi), dtype=float)
        return evaluate

    a_tilde = pullback(a_graph)
    q_tilde = pullback(q_graph)
    a_sym = _pullback_graph_symbol(a_tilde, f"pullback[{a_graph.name}; x1={x1:g}]")
    q_sym = _pullback_graph_symbol(q_tilde, f"pullback[{q_graph.name}; x1={x1:g}]")

    def p2_value(x1v, x2v, xi1v, xi2v):
        x2b, xi1b, xi2b = np.broadcast_arrays(np.asarray(x2v, dtype=float),
                                              np.asarray(xi1v, dtype=float),
                                              np.asarray(xi2v, dtype=float))
        return xi1b + a_tilde(x2b, xi2b) - q_tilde(x2b, xi2b)

    def p2_graph(x, xi0):
        from .symbols import GraphBranch
        x2f = x[1]
        return GraphBranch(
            lambda t: q_tilde(x2f, np.asarray(t, dtype=float)) - a_tilde(x2f, np.asarray(t, dtype=float)),
            None,
            label="conjugated_branch",
        )

    p2 = custom_symbol(
        p2_value,
        label=f"conjugated[{a_graph.name} vs {q_graph.name}; x1={x1:g}]",
        x_dependent=True,
        xi1_partial=lambda x1v, x2v, xi1v, xi2v: np.ones(
            np.broadcast(np.asarray(xi1v), np.asarray(xi2v)).shape),
        graph=p2_graph,
    )
    return a_sym, q_sym, p2


def quasimode_pushforward(table: PhaseTable, u: Field2D,
                          localization_tol: float = 1e-6,
                          localization_radius: float | None = None) -> Field2D:
    """v(x1, .) = W(x1) u(x1, .) for every grid row x1.

    Requires an O(1)-localized input (checked) and, for x-dependent
    generators, a table containing every needed row slice; the shipped
    experiments use x-independent generators where the multiplier form is
    exact for all rows.
    """
    from .quasimodes import localization_check

    g = u.grid
    if u.l2_norm() == 0.0:
        return Field2D(g, np.zeros_like(u.values))
    radius = localization_radius if localization_radius is not None else g.half_width / 2.0
    frac = localization_check(u, radius, side="x")
    if frac > localization_tol:
        raise ValueError(
            f"input is not localized: {frac:.3e} of its mass lies outside "
            f"radius {radius:g} (tolerance {localization_tol:g})")
    if table.analytic:
        a_vals = np.asarray(table.graph.value(0.0, 0.0, g.xi_coords), dtype=float)
        uhat_rows = sfft1d(u.values, g, axis=1)
        phases = np.exp(-1j * g.x_coords[:, None] * a_vals[None, :] / g.h)
        return Field2D(g, isfft1d(phases * uhat_rows, g, axis=1))
    vals = np.empty_like(u.values)
    for i, x1 in enumerate(g.x_coords):
        vals[i] = apply_w(table, u.values[i], x1, g)
    return Field2D(g, vals)
