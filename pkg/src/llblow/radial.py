"""Discrete radial calculus on graded meshes.

A RadialGrid is a strictly increasing set of nodes starting at y0 > 0,
geometrically graded up to y ~ 1 and uniform beyond.  The origin itself is a
virtual node: boundary stencils close with a parity ghost (odd fields are
reflected with a sign, even without), and cumulative integrals start from the
analytic limit of the integrand at 0.

All pairings use the two-dimensional radial measure y dy.

Operators:
    apply_H       H f = -(f'' + f'/y) + V f / y^2, second-order stencils
    apply_A/Astar the first-order factors with H = A* A
    apply_mH      the 3-component operator with the 2(1+Z) coupling terms
    apply_mHperp  its diagonal dominating part (H, H, 0)
    solve_H       regular inverse by variation of constants from the origin
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from . import closed_forms as cf

ODD = "odd"
EVEN = "even"


def _spacing_walk(y0: float, y_max: float, delta: float, h_cap: float) -> np.ndarray:
    """Nodes from the recursion y_{k+1} = y_k + min(delta*y_k, h_cap).

    The spacing function is continuous, so three-point stencils stay second
    order across the whole mesh (no grading kink).
    """
    nodes = [y0]
    y = y0
    while y < y_max:
        y = y + min(delta * y, h_cap)
        nodes.append(y)
    nodes[-1] = y_max
    if len(nodes) >= 2 and nodes[-1] - nodes[-2] < 1e-6 * h_cap:
        del nodes[-2]
    return np.asarray(nodes)


@dataclass(frozen=True)
class RadialGrid:
    """Graded radial mesh starting at y0 > 0 with a virtual node at 0.

    Geometric grading (relative increment delta) near the origin, capped
    spacing h_cap further out; built from a target node count.
    """

    nodes: np.ndarray
    y0: float = 1e-3
    delta: float = 0.02
    h_cap: float = 0.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 8:
            raise ValueError("need a 1-d grid with at least 8 nodes")
        if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing and positive")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def build(cls, y_max: float, n: int = 4096, y0: float = 1e-3,
              delta: float = 0.02) -> "RadialGrid":
        """Mesh with ~n nodes: geometric grading from y0, uniform cap beyond."""
        lo, hi = 1e-7 * y_max, 2.0 * y_max
        for _ in range(80):
            mid = np.sqrt(lo * hi)
            count = _spacing_walk(y0, y_max, delta, mid).size
            if count > n:
                lo = mid
            else:
                hi = mid
        h_cap = np.sqrt(lo * hi)
        return cls(_spacing_walk(y0, y_max, delta, h_cap), y0, delta, h_cap)

    def refine(self) -> "RadialGrid":
        """Grid with all spacings halved (same smooth grading map)."""
        return RadialGrid(
            _spacing_walk(self.y0, self.y_max, self.delta / 2.0, self.h_cap / 2.0),
            self.y0, self.delta / 2.0, self.h_cap / 2.0)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def y_max(self) -> float:
        return float(self.nodes[-1])

    def content_hash(self) -> str:
        return hashlib.md5(self.nodes.tobytes()).hexdigest()[:12]

    def restrict(self, mask) -> np.ndarray:
        return self.nodes[mask]


@dataclass
class RadialField:
    """Samples of a scalar field on a grid, with origin parity."""

    grid: RadialGrid
    values: np.ndarray
    parity: str = ODD

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.nodes.shape:
            raise ValueError("field/grid size mismatch")
        if self.parity not in (ODD, EVEN, "none"):
            raise ValueError(f"unknown parity {self.parity!r}")


@dataclass
class FrenetField:
    """Three scalar components on a shared grid.

    For radiation-type fields the first two components vanish linearly at the
    origin (odd type) and the third quadratically (even type).
    """

    grid: RadialGrid
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = np.zeros_like(np.asarray(self.alpha, dtype=float))
        for name in ("alpha", "beta", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.nodes.shape:
                raise ValueError(f"component {name} does not match the grid")
            setattr(self, name, arr)

    def stack(self) -> np.ndarray:
        return np.vstack([self.alpha, self.beta, self.gamma])

    def __add__(self, other: "FrenetField") -> "FrenetField":
        _check_same_grid(self.grid, other.grid)
        return FrenetField(self.grid, self.alpha + other.alpha,
                           self.beta + other.beta, self.gamma + other.gamma)

    def __mul__(self, c) -> "FrenetField":
        return FrenetField(self.grid, c * self.alpha, c * self.beta, c * self.gamma)

    __rmul__ = __mul__


def rotate(w: FrenetField) -> FrenetField:
    """Quarter-turn about the vertical axis: (a, b, g) -> (-b, a, 0)."""
    return FrenetField(w.grid, -w.beta.copy(), w.alpha.copy(),
                       np.zeros_like(w.gamma))


def _check_same_grid(g1: RadialGrid, g2: RadialGrid):
    if g1.nodes is not g2.nodes and (
            g1.n != g2.n or not np.array_equal(g1.nodes, g2.nodes)):
        raise ValueError("fields live on different grids")


def scales(b: float) -> tuple[float, float]:
    """Inner and outer profile scales (1/sqrt(b), |log b|/sqrt(b)) for 0 < b < 1."""
    if not 0.0 < b < 1.0:
        raise ValueError("need 0 < b < 1")
    rb = 1.0 / np.sqrt(b)
    return rb, abs(np.log(b)) * rb


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def inner(f, g, grid: RadialGrid, origin_value: float = 0.0) -> float:
    """Pairing of two sampled fields under the measure y dy.

    Composite quadratic quadrature (Richardson-extrapolated trapezoid) of
    f * g * y over [0, y_max], extending the integrand to `origin_value` at
    the virtual origin node (0 for every product with a y factor that stays
    bounded).
    """
    y = grid.nodes
    vals = np.asarray(f, dtype=float) * np.asarray(g, dtype=float) * y
    return _integrate(np.concatenate([[origin_value], vals]),
                      np.concatenate([[0.0], y]))


def norm_l2(f, grid: RadialGrid) -> float:
    return float(np.sqrt(max(inner(f, f, grid), 0.0)))


def _integrate(vals: np.ndarray, xs: np.ndarray) -> float:
    """Integral of samples on a non-uniform mesh, locally quadratic (order 4)."""
    from scipy.integrate import simpson
    return float(simpson(vals, x=xs))


def cumulative_integral(vals: np.ndarray, grid: RadialGrid,
                        origin_value: float = 0.0,
                        origin_slope: float | None = None) -> np.ndarray:
    """Cumulative integral from 0 of samples given on grid nodes.

    Endpoint-corrected trapezoid: each panel gets the h^2/12 derivative
    correction with derivatives from second-order finite differences, making
    the panel rule fourth-order on smooth integrands.  Passing the exact
    integrand slope at the origin removes the finite-difference floor of the
    first panel.  Returns values at the grid nodes.
    """
    y = np.concatenate([[0.0], grid.nodes])
    v = np.concatenate([[origin_value], np.asarray(vals, dtype=float)])
    d = np.gradient(v, y, edge_order=2)
    if origin_slope is not None:
        d[0] = origin_slope
    h = np.diff(y)
    panels = 0.5 * h * (v[:-1] + v[1:]) + h * h / 12.0 * (d[:-1] - d[1:])
    return np.cumsum(panels)


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------

def _parity_sign(parity: str) -> float:
    if parity == ODD:
        return -1.0
    if parity == EVEN:
        return 1.0
    raise ValueError("parity 'none' has a singular stencil at the origin; "
                     "declare the field odd or even")


def _origin_weights(grid: RadialGrid, parity: str):
    """Derivative weights at the first node from a parity-respecting fit.

    Odd fields are interpolated in span{y, y^3, y^5}, even ones in
    span{1, y^2, y^4}, through the first three nodes; this encodes both the
    reflection symmetry and the origin regularity exactly.
    """
    _parity_sign(parity)
    y = grid.nodes[:3] / grid.nodes[2]
    powers = (1, 3, 5) if parity == ODD else (0, 2, 4)
    vand = np.vstack([y**p for p in powers]).T
    coeff_map = np.linalg.solve(vand, np.eye(3))
    t0 = y[0]
    d1_basis = np.array([p * t0 ** (p - 1) if p >= 1 else 0.0 for p in powers])
    d2_basis = np.array([p * (p - 1) * t0 ** (p - 2) if p >= 2 else 0.0
                         for p in powers])
    scale = grid.nodes[2]
    w1 = coeff_map.T @ d1_basis / scale
    w2 = coeff_map.T @ d2_basis / scale**2
    return w1, w2


def derivative(f: np.ndarray, grid: RadialGrid, parity: str) -> np.ndarray:
    """First derivative, second-order central stencils on the graded mesh.

    The first node uses a parity-respecting polynomial fit; the last node a
    one-sided stencil (boundary-contaminated).
    """
    y = grid.nodes
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    hm = y[1:-1] - y[:-2]
    hp = y[2:] - y[1:-1]
    out[1:-1] = (-hp / (hm * (hm + hp)) * f[:-2]
                 + (hp - hm) / (hm * hp) * f[1:-1]
                 + hm / (hp * (hm + hp)) * f[2:])
    w1, _ = _origin_weights(grid, parity)
    out[0] = w1 @ f[:3]
    ha, hb = y[-2] - y[-3], y[-1] - y[-2]
    out[-1] = (hb / (ha * (ha + hb)) * f[-3]
               - (ha + hb) / (ha * hb) * f[-2]
               + (ha + 2.0 * hb) / (hb * (ha + hb)) * f[-1])
    return out


def second_derivative(f: np.ndarray, grid: RadialGrid, parity: str) -> np.ndarray:
    y = grid.nodes
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    hm = y[1:-1] - y[:-2]
    hp = y[2:] - y[1:-1]
    out[1:-1] = 2.0 * (f[:-2] * hp - f[1:-1] * (hm + hp) + f[2:] * hm) \
        / (hm * hp * (hm + hp))
    _, w2 = _origin_weights(grid, parity)
    out[0] = w2 @ f[:3]
    # one-sided first-order second derivative at the outer edge
    ha, hb = y[-2] - y[-3], y[-1] - y[-2]
    out[-1] = 2.0 * (f[-3] * hb - f[-2] * (ha + hb) + f[-1] * ha) \
        / (ha * hb * (ha + hb))
    return out


def laplacian(f: np.ndarray, grid: RadialGrid, parity: str) -> np.ndarray:
    """Two-dimensional radial laplacian f'' + f'/y."""
    return second_derivative(f, grid, parity) + derivative(f, grid, parity) / grid.nodes


def apply_H(f: np.ndarray, grid: RadialGrid, parity: str = ODD) -> np.ndarray:
    """H f = -(f'' + f'/y) + V f / y^2.

    The potential term is evaluated in closed form; the 1/y^2 singularity is
    harmless on odd-type fields (f ~ y at the origin).  The last two nodes
    are boundary-contaminated.
    """
    y = grid.nodes
    return -laplacian(f, grid, parity) + cf.v_fn(y) * np.asarray(f) / (y * y)


def apply_A(f: np.ndarray, grid: RadialGrid, parity: str = ODD) -> np.ndarray:
    """A f = -f' + Z f / y (annihilates the bubble's scaling direction)."""
    y = grid.nodes
    return -derivative(f, grid, parity) + cf.z_fn(y) * np.asarray(f) / y


def apply_Astar(f: np.ndarray, grid: RadialGrid, parity: str = ODD) -> np.ndarray:
    """A* f = f' + (1 + Z) f / y, the y dy adjoint of A."""
    y = grid.nodes
    return derivative(f, grid, parity) + (1.0 + cf.z_fn(y)) * np.asarray(f) / y


def apply_mH(w: FrenetField) -> FrenetField:
    """Vector operator (H a - 2(1+Z) g', H b, -Lap g + 2(1+Z)(d/dy + Z/y) a)."""
    grid = w.grid
    y = grid.nodes
    one_z = 1.0 + cf.z_fn(y)
    da = derivative(w.alpha, grid, ODD)
    first = apply_H(w.alpha, grid, ODD) - 2.0 * one_z * derivative(w.gamma, grid, EVEN)
    second = apply_H(w.beta, grid, ODD)
    third = -laplacian(w.gamma, grid, EVEN) + 2.0 * one_z * (da + cf.z_fn(y) * w.alpha / y)
    return FrenetField(grid, first, second, third)


def apply_mHperp(w: FrenetField) -> FrenetField:
    """Dominating diagonal part: (H a, H b, 0)."""
    grid = w.grid
    return FrenetField(grid, apply_H(w.alpha, grid, ODD),
                       apply_H(w.beta, grid, ODD), np.zeros(grid.n))


def apply_mA(w: FrenetField) -> FrenetField:
    """Componentwise factor (A a, A b, 0) with A* A = the diagonal part."""
    grid = w.grid
    return FrenetField(grid, apply_A(w.alpha, grid, ODD),
                       apply_A(w.beta, grid, ODD), np.zeros(grid.n))


def solve_H(rhs: np.ndarray, grid: RadialGrid, rhs_parity: str = ODD,
            rhs_origin: float | None = None) -> np.ndarray:
    """Regular solution u of H u = rhs by variation of constants from 0.

    u = lambda_phi * int_0^y rhs gamma x dx - gamma * int_0^y rhs lambda_phi x dx.
    The gamma-weighted integrand has the finite limit -rhs(0)/4 at the origin
    (odd rhs gives 0).  apply_H(solve_H(f)) reproduces f to stencil order.
    """
    y = grid.nodes
    rhs = np.asarray(rhs, dtype=float)
    lam = cf.lambda_phi(y)
    gam = cf.gamma_fn(y)
    rhs_slope = None
    if rhs_origin is None:
        if rhs_parity == ODD:
            rhs_origin = 0.0
            # odd-fit slope at the origin, for the first-panel correction
            yn = y[:3] / y[2]
            vand = np.vstack([yn, yn**3, yn**5]).T
            coef = np.linalg.solve(vand, rhs[:3])
            rhs_slope = coef[0] / y[2]
        else:
            # quadratic extrapolation through the first three nodes
            y0, y1, y2 = y[:3]
            l0 = (y1 * y2) / ((y0 - y1) * (y0 - y2))
            l1 = (y0 * y2) / ((y1 - y0) * (y1 - y2))
            l2 = (y0 * y1) / ((y2 - y0) * (y2 - y1))
            rhs_origin = float(l0 * rhs[0] + l1 * rhs[1] + l2 * rhs[2])
    # (rhs gamma y)(0) = -rhs(0)/4; its slope for odd rhs is -rhs'(0)/4
    gamma_slope = None if rhs_slope is None else -0.25 * rhs_slope
    k_gamma = cumulative_integral(rhs * gam * y, grid,
                                  origin_value=-0.25 * rhs_origin,
                                  origin_slope=gamma_slope)
    k_lambda = cumulative_integral(rhs * lam * y, grid, origin_value=0.0,
                                   origin_slope=0.0 if rhs_slope is not None
                                   else None)
    return lam * k_gamma - gam * k_lambda


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def field_to_csv(field: RadialField, name: str) -> str:
    """CSV with columns (y, value); the header names the field and grid hash."""
    buf = io.StringIO()
    buf.write(f"# field={name} grid={field.grid.content_hash()} parity={field.parity}\n")
    buf.write("y,value\n")
    for yv, fv in zip(field.grid.nodes, field.values):
        buf.write(f"{yv:.17g},{fv:.17g}\n")
    return buf.getvalue()


def field_from_csv(text: str) -> tuple[RadialField, str]:
    lines = text.strip().splitlines()
    header = lines[0]
    meta = dict(item.split("=") for item in header.lstrip("# ").split())
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    grid = RadialGrid(data[:, 0])
    return RadialField(grid, data[:, 1], meta.get("parity", ODD)), meta["field"]
