"""Uniform periodic 2-D grids, complex fields and the h-scaled Fourier transform.

Everything downstream computes on a square box [-L, L]^2 sampled at N points
per axis.  The conjugate frequency lattice is xi_m = pi*h*m/L for
m = -N/2 .. N/2-1, so the transform pair

    FT[u](xi)  = (2 pi h)^{-1} * sum_x u(x) exp(-i <x, xi>/h) dx^2
    IFT[U](x)  = (2 pi h)^{-1} * sum_xi U(xi) exp(+i <x, xi>/h) dxi^2

is exactly unitary at the discrete level (dx * dxi * N = 2 pi h per axis).
All operations are pure functions; fields are immutable after construction
and norms use numpy's fixed-order pairwise summation, so results are
bit-reproducible run to run.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "GridSpec",
    "Field2D",
    "SpectralField2D",
    "semiclassical_fft",
    "semiclassical_ifft",
    "sfft1d",
    "isfft1d",
    "lp_norm",
    "restrict_norm",
    "write_field",
    "read_field",
    "export_modulus_csv",
    "random_field",
]

MAGIC_FIELD = b"QML1"


class GridError(ValueError):
    """Invalid grid or field construction."""


def _alternating_signs(n: int) -> np.ndarray:
    # (-1)^m for centered indices m = -n/2 .. n/2-1
    m = np.arange(-n // 2, n // 2)
    return np.where(m % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class GridSpec:
    """Square periodic grid on [-L, L]^2 carrying the small parameter h.

    Attributes
    ----------
    half_width : box is [-half_width, half_width]^2
    points_per_axis : even N >= 16; samples at -L + j*dx, dx = 2L/N
    h : semiclassical parameter in (0, 1]
    """

    half_width: float
    points_per_axis: int
    h: float

    def __post_init__(self):
        problems = []
        if not self.half_width > 0:
            problems.append(f"half_width must be > 0, got {self.half_width}")
        n = self.points_per_axis
        if n < 16 or n % 2 != 0:
            problems.append(f"points_per_axis must be even and >= 16, got {n}")
        if not (0 < self.h <= 1):
            problems.append(f"h must lie in (0, 1], got {self.h}")
        if problems:
            raise GridError("; ".join(problems))

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def length(self) -> float:
        return self.half_width

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def dxi(self) -> float:
        return np.pi * self.h / self.half_width

    @property
    def x_coords(self) -> np.ndarray:
        n = self.points_per_axis
        return -self.half_width + self.dx * np.arange(n)

    @property
    def xi_coords(self) -> np.ndarray:
        n = self.points_per_axis
        return self.dxi * np.arange(-n // 2, n // 2)

    @property
    def xi_max(self) -> float:
        """Open right end of the representable frequency range."""
        return self.dxi * (self.points_per_axis // 2)

    @property
    def resolves_unit_band(self) -> bool:
        """Whether the lattice range [-xi_max, xi_max) contains [-2, 2]^2."""
        return self.xi_max > 2.0

    def xi_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        xi = self.xi_coords
        return np.meshgrid(xi, xi, indexing="ij")

    def x_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x_coords
        return np.meshgrid(x, x, indexing="ij")


def _check_values(grid: GridSpec, values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.complex128)
    n = grid.points_per_axis
    if values.shape != (n, n):
        raise GridError(f"{what} shape {values.shape} != grid shape {(n, n)}")
    if not np.all(np.isfinite(values.view(np.float64))):
        raise GridError(f"{what} contains non-finite entries")
    return values


@dataclass(frozen=True)
class Field2D:
    """Complex samples u(x1, x2); row index = x1, column index = x2."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, "field"))
        self.values.setflags(write=False)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.grid.dx)

    def scaled(self, factor: complex) -> "Field2D":
        return Field2D(self.grid, self.values * factor)

    def normalized(self) -> "Field2D":
        nrm = self.l2_norm()
        if nrm == 0.0:
            raise GridError("cannot normalize the zero field")
        return self.scaled(1.0 / nrm)


@dataclass(frozen=True)
class SpectralField2D:
    """Samples on the centered frequency lattice xi_m = pi*h*m/L, m in [-N/2, N/2)."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, "spectrum"))
        self.values.setflags(write=False)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.grid.dxi)


def semiclassical_fft(u: Field2D) -> SpectralField2D:
    """h-scaled Fourier transform of a field.

    Exact discrete quadrature of (2 pi h)^{-1} Int e^{-i<x,xi>/h} u dx via a
    fast transform; a plane wave on the lattice maps to a single spike of
    value (2L)^2/(2 pi h).  Attaches a warning when the lattice does not
    cover the band [-2, 2]^2.
    """
    g = u.grid
    ph = _alternating_signs(g.points_per_axis)
    coef = g.dx ** 2 / (2.0 * np.pi * g.h)
    vals = coef * ph[:, None] * ph[None, :] * np.fft.fftshift(np.fft.fft2(u.values))
    warn = () if g.resolves_unit_band else (
        f"frequency lattice [{-g.xi_max:.4g}, {g.xi_max:.4g}) does not cover [-2, 2]^2",
    )
    return SpectralField2D(g, vals, warn)


def semiclassical_ifft(spec: SpectralField2D) -> Field2D:
    """Exact inverse of :func:`semiclassical_fft`."""
    g = spec.grid
    ph = _alternating_signs(g.points_per_axis)
    coef = g.dx ** 2 / (2.0 * np.pi * g.h)
    vals = np.fft.ifft2(np.fft.ifftshift(spec.values / (coef * ph[:, None] * ph[None, :])))
    return Field2D(g, vals)


def sfft1d(values: np.ndarray, grid: GridSpec, axis: int = -1) -> np.ndarray:
    """1-D h-scaled transform along one axis; lattice = grid.xi_coords."""
    n = grid.points_per_axis
    if values.shape[axis] != n:
        raise GridError(f"axis length {values.shape[axis]} != N = {n}")
    ph = _alternating_signs(n)
    shape = [1] * values.ndim
    shape[axis] = n
    coef = grid.dx / np.sqrt(2.0 * np.pi * grid.h)
    return coef * ph.reshape(shape) * np.fft.fftshift(np.fft.fft(values, axis=axis), axes=axis)


def isfft1d(values: np.ndarray, grid: GridSpec, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`sfft1d`."""
    n = grid.points_per_axis
    ph = _alternating_signs(n)
    shape = [1] * values.ndim
    shape[axis] = n
    coef = grid.dx / np.sqrt(2.0 * np.pi * grid.h)
    return np.fft.ifft(np.fft.ifftshift(values / (coef * ph.reshape(shape)), axes=axis), axis=axis)


def lp_norm(u: Field2D, p: float) -> float:
    """Riemann-sum L^p norm; max of |u| for p = inf."""
    if p < 1:
        raise ValueError(f"lp_norm requires p >= 1, got {p}")
    mod = np.abs(u.values)
    if np.isinf(p):
        return float(mod.max())
    return float((np.sum(mod ** p) * u.grid.dx ** 2) ** (1.0 / p))


def restrict_norm(u: Field2D, rect: tuple[float, float, float, float]) -> float:
    """L^2 norm over an axis-aligned rectangle (x1_min, x1_max, x2_min, x2_max).

    Samples with coordinate in the half-open interval [min, max) are counted,
    so disjoint rectangles partition the squared norm exactly.  An empty
    selection returns 0 with a warning.
    """
    x1_min, x1_max, x2_min, x2_max = rect
    L = u.grid.half_width
    if x1_min < -L or x2_min < -L or x1_max > L + u.grid.dx or x2_max > L + u.grid.dx:
        raise ValueError(f"rectangle {rect} is not contained in the box [-{L}, {L}]^2")
    x = u.grid.x_coords
    sel1 = (x >= x1_min) & (x < x1_max)
    sel2 = (x >= x2_min) & (x < x2_max)
    if not sel1.any() or not sel2.any():
        warnings.warn(f"rectangle {rect} contains no grid samples", stacklevel=2)
        return 0.0
    block = u.values[np.ix_(sel1, sel2)]
    return float(np.sqrt(np.sum(np.abs(block) ** 2)) * u.grid.dx)


# ---------------------------------------------------------------------------
# serialization: flat binary container and CSV export
# ---------------------------------------------------------------------------

def write_field(u: Field2D, path) -> None:
    """Binary container: magic "QML1", N (int64 LE), L, h (float64 LE), then
    N^2 complex pairs of 8-byte reals, row-major."""
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC_FIELD)
        fh.write(struct.pack("<q", g.points_per_axis))
        fh.write(struct.pack("<d", g.half_width))
        fh.write(struct.pack("<d", g.h))
        fh.write(np.ascontiguousarray(u.values, dtype="<c16").tobytes())


def read_field(path) -> Field2D:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_FIELD:
            raise GridError(f"bad magic {magic!r}, expected {MAGIC_FIELD!r}")
        (n,) = struct.unpack("<q", fh.read(8))
        (L,) = struct.unpack("<d", fh.read(8))
        (h,) = struct.unpack("<d", fh.read(8))
        raw = fh.read(16 * n * n)
        if len(raw) != 16 * n * n:
            raise GridError("truncated field file")
        values = np.frombuffer(raw, dtype="<c16").reshape(n, n).astype(np.complex128)
    return Field2D(GridSpec(L, int(n), h), values)


def export_modulus_csv(u: Field2D, path, x1: float | None = None) -> None:
    """Write a CSV slice of |u| along x2 at fixed x1 (default: row of max |u|)."""
    mod = np.abs(u.values)
    if x1 is None:
        i1 = int(np.argmax(mod.max(axis=1)))
    else:
        i1 = int(np.argmin(np.abs(u.grid.x_coords - x1)))
    x = u.grid.x_coords
    with open(path, "w", newline="") as fh:
        fh.write("x1,x2,abs_u\n")
        for j in range(u.grid.points_per_axis):
            fh.write(f"{x[i1]!r},{x[j]!r},{mod[i1, j]!r}\n")


def random_field(grid: GridSpec, seed: int = 0) -> Field2D:
    """Seeded complex Gaussian field; used by tests and property checks."""
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((grid.n, grid.n)) + 1j * rng.standard_normal((grid.n, grid.n))
    return Field2D(grid, vals)
