"""1-D computational domains with an exterior halo, distance functions, and barriers.

The domain is an open interval (a, b).  Because the operators are nonlocal,
grid functions live on an extended uniform mesh covering [a - halo, b + halo];
everything beyond the meshed box is handled analytically (see
:mod:`fracpq.operators`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "BarrierSpec",
    "build_grid",
    "distance",
    "extended_distance",
    "barrier_function",
    "default_band_width",
    "tent_cutoff",
]

#: exterior values vanish beyond the meshed box
ZERO_BEYOND_HALO = "zero_beyond_halo"
#: exterior data are prescribed on the halo nodes; beyond the box the function
#: equals the constant ``farfield_value``
PRESCRIBED_G = "prescribed_g"

_EXTERIOR_RULES = (ZERO_BEYOND_HALO, PRESCRIBED_G)


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on [a - halo, b + halo] around the interval (a, b).

    ``nodes`` are strictly increasing with constant spacing ``h``; the nodes
    with index in ``interior_idx`` are exactly those lying strictly inside
    (a, b).  ``halo`` is the effective exterior band width (a multiple of h,
    at least the requested width).
    """

    a: float
    b: float
    n: int
    halo: float
    h: float
    nodes: np.ndarray
    interior_idx: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def x_lo(self) -> float:
        """Left end of the meshed box."""
        return float(self.nodes[0])

    @property
    def x_hi(self) -> float:
        """Right end of the meshed box."""
        return float(self.nodes[-1])

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[self.interior_idx]

    def is_same_mesh(self, other: "Grid") -> bool:
        return (
            self.size == other.size
            and self.a == other.a
            and self.b == other.b
            and self.h == other.h
        )


def build_grid(a: float, b: float, n: int, halo: float) -> Grid:
    """Build the extended uniform grid for the interval (a, b).

    Parameters
    ----------
    a, b : float
        Domain endpoints, a < b.
    n : int
        Number of interior nodes (at least 16).  The spacing is
        h = (b - a)/(n + 1), so a and b are themselves nodes.
    halo : float
        Requested exterior band width; must be at least b - a so that the
        analytic far-field tail is evaluated only far from the domain.  The
        effective halo is rounded up to a whole number of cells.
    """
    a, b, halo = float(a), float(b), float(halo)
    if not (a < b):
        raise ValueError(f"domain endpoints must satisfy a < b, got a={a}, b={b}")
    if n < 16:
        raise ValueError(f"grid.n must be at least 16, got {n}")
    if halo < b - a:
        raise ValueError(f"grid.halo must be at least b - a = {b - a}, got {halo}")
    h = (b - a) / (n + 1)
    m = int(math.ceil(halo / h - 1e-9))
    k = np.arange(-m, n + 2 + m, dtype=np.int64)
    nodes = a + k * h
    # pin the right endpoint: a + (n+1)*h may be off b by one ulp
    nodes[m + n + 1] = b
    interior_idx = np.arange(m + 1, m + n + 1, dtype=np.int64)
    return Grid(a=a, b=b, n=int(n), halo=m * h, h=h, nodes=nodes, interior_idx=interior_idx)


def distance(grid: Grid, x) -> np.ndarray | float:
    """dist(x, complement of (a, b)); zero outside the domain."""
    x = np.asarray(x, dtype=float)
    d = np.minimum(x - grid.a, grid.b - x)
    d = np.maximum(d, 0.0)
    return float(d) if d.ndim == 0 else d


def extended_distance(grid: Grid, rho: float, x) -> np.ndarray | float:
    """Signed distance extension: d(x) inside, -dist(x, boundary) in the
    exterior band of width rho, and -rho beyond it."""
    if rho <= 0:
        raise ValueError("band width rho must be positive")
    x = np.asarray(x, dtype=float)
    inside = np.minimum(x - grid.a, grid.b - x)
    ext = np.maximum(grid.a - x, x - grid.b)  # dist to boundary when outside
    de = np.where(inside > 0, inside, -np.minimum(ext, rho))
    return float(de) if de.ndim == 0 else de


def default_band_width(grid: Grid) -> float:
    """Band width used for the distance extension when none is configured."""
    return min(0.25 * (grid.b - grid.a), 0.5 * grid.halo)


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on a :class:`Grid` plus a rule for the unmeshed exterior."""

    grid: Grid
    values: np.ndarray
    exterior_rule: str = ZERO_BEYOND_HALO
    farfield_value: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"values must have one entry per node ({self.grid.size}), got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        if self.exterior_rule not in _EXTERIOR_RULES:
            raise ValueError(f"unknown exterior rule {self.exterior_rule!r}")
        if self.exterior_rule == ZERO_BEYOND_HALO and self.farfield_value != 0.0:
            raise ValueError("zero_beyond_halo requires farfield_value == 0")
        if not np.isfinite(self.farfield_value):
            raise ValueError("farfield_value must be finite")

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_idx]

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values, self.exterior_rule, self.farfield_value)

    def is_interior_supported(self, tol: float = 0.0) -> bool:
        """True when all non-interior nodes carry values of magnitude <= tol."""
        mask = np.ones(self.grid.size, dtype=bool)
        mask[self.grid.interior_idx] = False
        return bool(np.all(np.abs(self.values[mask]) <= tol)) and self.farfield_value == 0.0


def zeros(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.size))


def constant(grid: Grid, c: float, *, everywhere: bool = False) -> GridFunction:
    """Constant c on the box; with ``everywhere`` the constant extends past it."""
    vals = np.full(grid.size, float(c))
    if everywhere:
        return GridFunction(grid, vals, PRESCRIBED_G, float(c))
    return GridFunction(grid, vals, PRESCRIBED_G if c != 0.0 else ZERO_BEYOND_HALO,
                        0.0)


def from_callable(grid: Grid, fn, *, farfield_value: float = 0.0) -> GridFunction:
    vals = np.asarray([fn(x) for x in grid.nodes], dtype=float)
    rule = ZERO_BEYOND_HALO if farfield_value == 0.0 else PRESCRIBED_G
    return GridFunction(grid, vals, rule, farfield_value)


def interior_only(grid: Grid, interior_values: np.ndarray) -> GridFunction:
    """Grid function vanishing outside (a, b) with the given interior values."""
    vals = np.zeros(grid.size)
    vals[grid.interior_idx] = np.asarray(interior_values, dtype=float)
    return GridFunction(grid, vals)


@dataclass(frozen=True)
class BarrierSpec:
    """Parameters of the shifted distance-power barrier.

    The barrier is (d_e(x) + kappa^(1/alpha))_+^alpha on the domain together
    with the exterior band of width rho, and zero elsewhere.
    """

    alpha: float
    kappa: float = 0.0
    rho: float = 0.0  # 0 means "use default_band_width of the grid"

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"barrier exponent alpha must lie in (0, 1), got {self.alpha}")
        if self.kappa < 0.0:
            raise ValueError(f"barrier shift kappa must be nonnegative, got {self.kappa}")
        if self.rho < 0.0:
            raise ValueError(f"barrier band rho must be positive, got {self.rho}")

    def resolved_rho(self, grid: Grid) -> float:
        rho = self.rho if self.rho > 0.0 else default_band_width(grid)
        if not (0.0 < rho < 0.5 * (grid.b - grid.a)):
            raise ValueError(
                f"barrier band rho must lie in (0, (b-a)/2), got {rho}"
            )
        return rho

    @property
    def shift(self) -> float:
        """kappa^(1/alpha), the argument shift of the distance power."""
        return self.kappa ** (1.0 / self.alpha) if self.kappa > 0.0 else 0.0


def barrier_function(grid: Grid, spec: BarrierSpec) -> GridFunction:
    """Nodal barrier (d_e + kappa^(1/alpha))_+^alpha, zero beyond the band."""
    rho = spec.resolved_rho(grid)
    x = grid.nodes
    de = extended_distance(grid, rho, x)
    inside_band = np.minimum(x - grid.a, grid.b - x) > -rho  # domain or exterior band
    base = np.maximum(de + spec.shift, 0.0)
    vals = np.where(inside_band, base ** spec.alpha, 0.0)
    return GridFunction(grid, vals)


def tent_cutoff(grid: Grid, lo: float, hi: float) -> GridFunction:
    """Piecewise-linear cutoff: 0 outside (lo, hi), 1 at the midpoint.

    Used as the test cutoff in the truncation energy estimate; values lie in
    [0, 1] and the support is compactly inside (lo, hi).
    """
    if not (grid.a <= lo < hi <= grid.b):
        raise ValueError("cutoff interval must sit inside the domain")
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    vals = np.maximum(0.0, 1.0 - np.abs(grid.nodes - mid) / half)
    return GridFunction(grid, vals)
