"""Exact scalar ingredients of the equivariant blowup construction.

Everything here is a closed-form function of the radial variable y > 0
(the rescaled radius r / lambda).  These routines are the oracles used by
every other module: the degree-one harmonic bubble written through its
Euler angle phi(y) = 2 arctan y, the potential of the linearized operator,
the two explicit kernel elements of that operator, and the regular solution
t1 of H t1 = lambda_phi that seeds all profile constructions.

All functions accept floats or numpy arrays.  Near the origin the kernel
element gamma_fn and t1_fn switch to series expansions below Y_SWITCH to
avoid the 0 * inf structure of the closed forms.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.integrate import quad

# crossover to series expansions near the origin
Y_SWITCH = 1e-3

# absolute tolerance of the adaptive quadrature inside t1_fn
T1_QUAD_TOL = 1e-12


def lambda_phi(y):
    """sin of the bubble angle: 2y / (1 + y^2).  Scaling generator of the bubble."""
    y = np.asarray(y, dtype=float)
    return 2.0 * y / (1.0 + y * y)


def lambda_phi_prime(y):
    y = np.asarray(y, dtype=float)
    return 2.0 * (1.0 - y * y) / (1.0 + y * y) ** 2


def lambda_phi_pp(y):
    y = np.asarray(y, dtype=float)
    return 4.0 * y * (y * y - 3.0) / (1.0 + y * y) ** 3


def lambda_phi_ppp(y):
    y = np.asarray(y, dtype=float)
    y2 = y * y
    return -12.0 * (y2 * y2 - 6.0 * y2 + 1.0) / (1.0 + y2) ** 4


def z_fn(y):
    """cos of the bubble angle: (1 - y^2) / (1 + y^2)."""
    y = np.asarray(y, dtype=float)
    return (1.0 - y * y) / (1.0 + y * y)


def z_prime(y):
    y = np.asarray(y, dtype=float)
    return -4.0 * y / (1.0 + y * y) ** 2


def v_fn(y):
    """Potential of the linearized operator H = -Lap + V/y^2."""
    y = np.asarray(y, dtype=float)
    y2 = y * y
    return (y2 * y2 - 6.0 * y2 + 1.0) / (1.0 + y2) ** 2


def lambda_z(y):
    """Scaling derivative y Z'(y) = -4y^2/(1+y^2)^2.  Strictly negative for y > 0."""
    y = np.asarray(y, dtype=float)
    return -4.0 * y * y / (1.0 + y * y) ** 2


def lambda_v(y):
    """Scaling derivative y V'(y) = 16 y^2 (y^2 - 1) / (1 + y^2)^3."""
    y = np.asarray(y, dtype=float)
    y2 = y * y
    return 16.0 * y2 * (y2 - 1.0) / (1.0 + y2) ** 3


def gamma_fn(y):
    """Second kernel element of H: (y^3 + 4y log y - 1/y) / (4(1+y^2)).

    Behaves like -1/(4y) at the origin and y/4 at infinity.  Below Y_SWITCH a
    series is used.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < Y_SWITCH
    ys = y[small]
    if ys.size:
        # -1/(4y) + y log y + y/4 + y^3/4 - y^3 log y + O(y^5 log y)
        ly = np.log(ys)
        out[small] = -0.25 / ys + ys * ly + 0.25 * ys + 0.25 * ys**3 - ys**3 * ly
    yb = y[~small]
    out[~small] = (yb**3 + 4.0 * yb * np.log(yb) - 1.0 / yb) / (4.0 * (1.0 + yb * yb))
    return out if out.ndim else float(out)


def gamma_prime(y):
    """Derivative of gamma_fn, closed form."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < Y_SWITCH
    ys = y[small]
    if ys.size:
        ly = np.log(ys)
        out[small] = (
            0.25 / ys**2 + ly + 1.25 + ys * ys * (-0.25 - 3.0 * ly)
        )
    yb = y[~small]
    y2 = yb * yb
    num = y2**3 + 7.0 * y2**2 + 7.0 * y2 + 1.0 + (4.0 * y2 - 4.0 * y2**2) * np.log(yb)
    out[~small] = num / (4.0 * y2 * (1.0 + y2) ** 2)
    return out if out.ndim else float(out)


@lru_cache(maxsize=100_000)
def _t1_log_integral(y: float) -> float:
    """Integral of log(1+x^2)/x from 0 to y, adaptive quadrature to 1e-12."""
    if y <= 0.0:
        return 0.0
    # split at 1 keeps the adaptive rule sharp on both the flat and log regions
    if y <= 1.0:
        val, _ = quad(lambda x: np.log1p(x * x) / x, 0.0, y,
                      epsabs=T1_QUAD_TOL, epsrel=T1_QUAD_TOL, limit=200)
        return val
    head, _ = quad(lambda x: np.log1p(x * x) / x, 0.0, 1.0,
                   epsabs=T1_QUAD_TOL, epsrel=T1_QUAD_TOL, limit=200)
    tail, _ = quad(lambda x: np.log1p(x * x) / x, 1.0, y,
                   epsabs=T1_QUAD_TOL, epsrel=T1_QUAD_TOL, limit=400)
    return head + tail


def _t1_from_integral(y, integral):
    y2 = y * y
    num = (1.0 - y2 * y2) * np.log1p(y2) + 2.0 * y2 * y2 - y2 - 4.0 * y2 * integral
    return num / (2.0 * y * (1.0 + y2))


def t1_fn(y):
    """Regular solution of H t1 = lambda_phi.

    Vanishes like -y^3/4 at the origin and grows like -y log y + y at
    infinity.  The non-elementary integral of log(1+x^2)/x from 0 is
    evaluated by adaptive quadrature (cached per abscissa).
    """
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    out = np.empty_like(y_arr)
    for i, yi in enumerate(y_arr):
        if yi < Y_SWITCH:
            out[i] = -0.25 * yi**3 + yi**5 / 6.0
        else:
            out[i] = _t1_from_integral(yi, _t1_log_integral(float(yi)))
    return float(out[0]) if scalar else out


def t1_samples(y_nodes: np.ndarray) -> np.ndarray:
    """t1 on a dense increasing grid, one adaptive panel per subinterval.

    Equivalent to t1_fn pointwise but O(n) quadrature panels instead of
    O(n) full integrals; used wherever profiles sample t1 densely.
    """
    y_nodes = np.asarray(y_nodes, dtype=float)
    big = y_nodes >= Y_SWITCH
    out = np.empty_like(y_nodes)
    ys = y_nodes[~big]
    out[~big] = -0.25 * ys**3 + ys**5 / 6.0
    yb = y_nodes[big]
    if yb.size:
        integ = np.empty_like(yb)
        acc = _t1_log_integral(float(yb[0]))
        integ[0] = acc
        for i in range(1, yb.size):
            panel, _ = quad(lambda x: np.log1p(x * x) / x, yb[i - 1], yb[i],
                            epsabs=T1_QUAD_TOL, epsrel=T1_QUAD_TOL, limit=100)
            acc += panel
            integ[i] = acc
        out[big] = _t1_from_integral(yb, integ)
    return out


def a_t1(y):
    """A t1 in closed form: ((1+y^2) log(1+y^2) - y^2) / y^2, A = -d/dy + Z/y."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < Y_SWITCH
    ys = y[small]
    if ys.size:
        u = ys * ys
        out[small] = 0.5 * u - u * u / 6.0
    yb = y[~small]
    u = yb * yb
    out[~small] = ((1.0 + u) * np.log1p(u) - u) / u
    return out if out.ndim else float(out)


def t1_prime(y):
    """Derivative of t1: Z t1 / y - A t1."""
    y = np.asarray(y, dtype=float)
    t1 = t1_samples(np.atleast_1d(y)) if y.ndim else np.array([t1_fn(float(y))])
    t1 = t1.reshape(np.atleast_1d(y).shape)
    val = z_fn(y) * t1 / np.maximum(np.atleast_1d(y), 1e-300) - a_t1(y)
    return val if np.ndim(y) else float(val)


def appendix_bound_fn(y):
    """(1+Z) A t1 = 2 log(1+y^2)/y^2 - 2/(1+y^2).

    Nonnegative and strictly below 1/2 on (0, inf); its supremum ~0.4324 is
    attained near y ~ 1.47.  This is the constant that drives the
    two-derivative gain of the energy estimate.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < Y_SWITCH
    u = y[small] ** 2
    if u.size:
        out[small] = u - 4.0 * u * u / 3.0 + 1.5 * u**3
    ub = y[~small] ** 2
    out[~small] = 2.0 * np.log1p(ub) / ub - 2.0 / (1.0 + ub)
    return out if out.ndim else float(out)


def k2_exact(y):
    """Integral of lambda_phi^2 x dx from 0: 2 log(1+y^2) + 2/(1+y^2) - 2.

    Series below y^2 = 1e-3 avoids the leading-order cancellation.
    """
    y = np.asarray(y, dtype=float)
    u = y * y
    out = np.empty_like(u)
    small = u < 1e-3
    us = u[small]
    out[small] = us * us * (1.0 - 4.0 * us / 3.0 + 1.5 * us * us
                            - 1.6 * us ** 3)
    ub = u[~small]
    out[~small] = 2.0 * np.log1p(ub) + 2.0 / (1.0 + ub) - 2.0
    return out if out.ndim else float(out)


def k1_exact_from_t1(t1_vals, y):
    """Integral of lambda_phi gamma x dx from 0, via the kernel representation.

    t1 = lambda_phi K1 - gamma K2 inverts to K1 = (t1 + gamma K2)/lambda_phi.
    """
    y = np.asarray(y, dtype=float)
    return (np.asarray(t1_vals) + gamma_fn(y) * k2_exact(y)) / lambda_phi(y)


def ground_state_map(y):
    """Bubble profile in the co-rotating frame: (lambda_phi, 0, Z), a unit vector."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros((3, y.size))
    out[0] = lambda_phi(y)
    out[2] = z_fn(y)
    return out


def frenet_vectors(y):
    """Orthonormal frame (e_r, e_tau) completing the bubble direction.

    e_r = (Z, 0, -lambda_phi), e_tau = (0, 1, 0) in the co-rotating frame.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    e_r = np.zeros((3, y.size))
    e_r[0] = z_fn(y)
    e_r[2] = -lambda_phi(y)
    e_tau = np.zeros((3, y.size))
    e_tau[1] = 1.0
    return e_r, e_tau
