import numpy as np
import pytest

from llblow import closed_forms as cf
from llblow import profiles as pf
from llblow import radial as rd
from llblow.modulation import Coefficients


@pytest.fixture(scope="module")
def setup_b3():
    b = 1e-3
    _, b1 = rd.scales(b)
    grid = rd.RadialGrid.build(2.05 * b1, n=5000)
    coeffs = Coefficients(1.0, 1.0)
    pset = pf.build_profiles(b, coeffs, grid)
    return b, grid, coeffs, pset


def test_cutoff_plateaus():
    t = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    chi = pf.quintic_cutoff(t)
    assert np.allclose(chi[:3], 1.0)
    assert chi[3] == pytest.approx(0.5)
    assert np.allclose(chi[4:], 0.0)
    # C2: first and second derivatives vanish at both band edges
    for d in (pf.quintic_cutoff_d1, pf.quintic_cutoff_d2):
        assert d(1.0) == 0.0 and d(2.0) == 0.0
    # cutoff algebra: chi (1 - chi) supported only in the band
    y = np.linspace(0, 5, 1001)
    prod = pf.quintic_cutoff(y) * (1 - pf.quintic_cutoff(y))
    assert np.all(prod[(y < 1) | (y > 2)] == 0.0)
    assert np.any(prod[(y > 1) & (y < 2)] > 0.0)


def test_cb_db_magnitudes():
    co = Coefficients(1.0, 1.0)
    vals = {}
    for b in (1e-3, 1e-4, 1e-5):
        _, b1 = rd.scales(b)
        grid = rd.RadialGrid.build(2.05 * b1, n=5000)
        cb, db = pf.cb_db(b, grid)
        L = abs(np.log(b))
        vals[b] = (cb, db)
        # cb carries a concrete ~3/L correction above the 2/L leading term
        assert 1.0 / (1 - 2.7 / L) < cb * L / 2 < 1.0 / (1 - 3.2 / L)
        # definitional identity: cb normalizes the cutoff bubble mass to 4
        base = pf.BaseFields.for_grid(grid)
        chi = pf.cutoff(grid.nodes, rd.scales(b)[0] / 4)
        mass = rd.inner(chi * base.lam, base.lam, grid)
        assert cb * mass == pytest.approx(4.0, rel=5e-6)
    # d_b * b * L bounded across three decades
    ratios = [abs(vals[b][1]) * b * abs(np.log(b)) for b in vals]
    assert max(ratios) < 10 * min(ratios)
    assert max(ratios) < 2.0


def test_sigma_matching(setup_b3):
    b, grid, coeffs, pset = setup_b3
    b0s, b1s = rd.scales(b)
    base = pf.BaseFields.for_grid(grid)
    inner_mask = grid.nodes <= b0s / 4
    rel_in = np.max(np.abs(pset.sigma_b[inner_mask]
                           - pset.c_b * base.t1[inner_mask])
                    / np.abs(pset.c_b * base.t1[inner_mask]))
    assert rel_in < 1e-10
    outer_mask = grid.nodes >= 6 * b0s
    rel_out = np.max(np.abs(pset.sigma_b[outer_mask]
                            + 4 * base.gamma[outer_mask])
                     / np.abs(4 * base.gamma[outer_mask]))
    assert rel_out < 1e-10


def test_tail_cancellation(setup_b3):
    b, grid, coeffs, pset = setup_b3
    b0s, b1s = rd.scales(b)
    base = pf.BaseFields.for_grid(grid)
    m = (grid.nodes >= 6 * b0s) & (grid.nodes <= 2 * b1s)
    expr = grid.nodes * base.t1_p - base.t1 - pset.sigma_b
    fitted_c = np.max(np.abs(expr[m]) * grid.nodes[m]
                      / np.log(grid.nodes[m]) ** 2)
    assert fitted_c < 10.0


def test_first_order_profiles_structure(setup_b3):
    b, grid, coeffs, pset = setup_b3
    base = pf.BaseFields.for_grid(grid)
    # rotation relation is exact by construction
    rot = rd.rotate(pset.phi10)
    assert np.array_equal(rot.alpha, pset.phi01.alpha)
    assert np.array_equal(rot.beta, pset.phi01.beta)
    i1 = np.argmin(np.abs(grid.nodes - 1.0))
    t1_at = base.t1[i1]
    assert pset.phi10.alpha[i1] == pytest.approx(t1_at / 2, rel=1e-12)
    assert pset.phi10.beta[i1] == pytest.approx(t1_at / 2, rel=1e-12)
    # heat-flow limit: first slot vanishes
    heat = pf.first_order_profiles(Coefficients(0.0, 1.0), grid)
    assert np.all(heat[0].alpha == 0.0)
    assert np.allclose(heat[0].beta, base.t1)
    # compensator keeps the sphere constraint at higher order
    s02 = pset.s02.gamma
    assert np.allclose(s02, -base.t1 ** 2 / 4.0)


def test_higher_profiles_growth_and_roundtrip(setup_b3):
    b, grid, coeffs, pset = setup_b3
    _, b1s = rd.scales(b)
    y = grid.nodes
    m = (y >= 1.0) & (y <= 2 * b1s)
    p20 = np.hypot(pset.phi_ij[(2, 0)][0], pset.phi_ij[(2, 0)][1])
    growth = np.max(p20[m] * b * abs(np.log(b)) / (1 + y[m]))
    assert growth < 50.0
    # solve/apply roundtrip against the assembled source
    base = pf.BaseFields.for_grid(grid)
    src = pf._second_order_sources(coeffs, base, pset.sigma_b)
    k = coeffs.square_sum
    rhs1 = (coeffs.rho1 * src[(2, 0)][0] - coeffs.rho2 * src[(2, 0)][1]) / k
    h1 = rd.apply_H(pset.phi_ij[(2, 0)][0], grid, rd.ODD)
    mm = (y > 0.05) & (y < 0.9 * grid.y_max)
    scale = np.max(np.abs(rhs1))
    assert np.max(np.abs((h1 - rhs1)[mm])) < 1e-3 * max(scale, 1.0)


def test_heat_limit_second_order_source():
    co = Coefficients(0.0, 1.0)
    b = 1e-3
    _, b1 = rd.scales(b)
    grid = rd.RadialGrid.build(2.05 * b1, n=4000)
    base = pf.BaseFields.for_grid(grid)
    sigma = pf.sigma_b_build(b, grid)
    src = pf._second_order_sources(co, base, sigma)
    # with no dispersion the quadratic couplings vanish: the a^2 bracket is
    # the pure (1+Z) phi_{1,0} term, whose first slot is zero
    assert np.allclose(src[(2, 0)][0], 0.0)
    assert np.allclose(src[(2, 0)][1], base.one_z * base.t1)


def test_assemble_w0(setup_b3):
    b, grid, coeffs, pset = setup_b3
    w0 = pf.assemble_w0(pset, 0.0, 0.0, localized=False)
    assert np.all(w0.alpha == 0) and np.all(w0.beta == 0) \
        and np.all(w0.gamma == 0)
    a = b / abs(np.log(b)) / 2
    w = pf.assemble_w0(pset, a, b, localized=True)
    _, b1s = rd.scales(b)
    assert np.all(w.alpha[grid.nodes >= 2 * b1s] == 0.0)
    # the b-direction dominates the a-direction at the slow-modulation ratio
    wa = pf.assemble_w0(pset, a, 0.0, localized=False)
    wb = pf.assemble_w0(pset, 0.0, b, localized=False)
    mid = np.argmin(np.abs(grid.nodes - 10.0))
    assert abs(wb.beta[mid]) > 5 * abs(wa.beta[mid])


def test_sphere_constraint_defect(setup_b3):
    b, grid, coeffs, pset = setup_b3
    b0s, _ = rd.scales(b)
    w = pf.assemble_w0(pset, 0.0, b, localized=True)
    defect = pf.sphere_constraint_defect(w)
    y = grid.nodes
    m = (y >= 1.0) & (y <= b0s)
    bound = b ** 3 * y[m] ** 4 * np.log(np.maximum(y[m], 2.0)) ** 2
    assert np.max(np.abs(defect[m]) / np.maximum(bound, 1e-14)) < 50.0


def test_phi_M_properties():
    grid = rd.RadialGrid.build(450.0, n=6000)
    base = pf.BaseFields.for_grid(grid)
    zero = np.zeros(grid.n)
    c_by_m2 = {}
    for M in (50.0, 100.0, 200.0):
        td = pf.phi_M_build(M, grid)
        pair_lam = td.pair(base.lam)
        assert 4 * np.log(M) - 4 < pair_lam < 4 * np.log(M) + 2
        assert abs(td.pair(base.t1)) < 1e-8 * abs(pair_lam)
        assert abs(td.pair_h(base.lam, hf=zero)) < 1e-6 * abs(pair_lam)
        # the t1 pairing against the H-image reproduces the bubble pairing
        # (equality holds by parts in the continuum; quadrature-level here)
        assert td.pair_h(base.t1, hf=base.lam) == pytest.approx(
            pair_lam, rel=1e-4)
        c_by_m2[M] = td.c_M / M ** 2
    assert abs(c_by_m2[50.0] - c_by_m2[200.0]) / abs(c_by_m2[200.0]) < 0.10


def test_residual_spotcheck_scaling():
    co = Coefficients(1.0, 1.0)
    reports = {}
    for b in (1e-3, 1e-4):
        _, b1 = rd.scales(b)
        grid = rd.RadialGrid.build(2.05 * b1, n=5000)
        pset = pf.build_profiles(b, co, grid, with_higher=False)
        reports[b] = pf.residual_spotcheck(pset, 0.0, b)
        assert reports[b]["constant"] < 100.0
    # two-point scaling follows b^4/log^2 within a factor of 3
    ratio = reports[1e-3]["integral"] / reports[1e-4]["integral"]
    model = reports[1e-3]["reference"] / reports[1e-4]["reference"]
    assert ratio / model < 3.0 and model / ratio < 3.0
    # zero amplitudes give a zero residual
    _, b1 = rd.scales(1e-3)
    grid = rd.RadialGrid.build(2.05 * b1, n=4000)
    pset = pf.build_profiles(1e-3, co, grid, with_higher=False)
    assert pf.residual_spotcheck(pset, 0.0, 0.0)["integral"] == 0.0


def test_flux_ratio_structure():
    co = Coefficients(0.0, 1.0)
    b = 1e-4
    b0s, b1s = rd.scales(b)
    grid = rd.RadialGrid.build(2.05 * b1s, n=6000)
    pset = pf.build_profiles(b, co, grid, with_higher=False)
    td = pf.phi_M_build(min(20.0, b0s / 8), grid)
    fx = pf.flux_ratios(pset, td, 0.0, b)
    # heat pair with zero phase rate: first ratio pure -b^2 flux, second zero
    assert fx["computed"][0] < 0.0
    assert fx["reference"][1] == 0.0
    assert abs(fx["computed"][1]) < 1e-3 * abs(fx["computed"][0])
    # the computed/leading deviation is the known cb correction
    L = abs(np.log(b))
    assert fx["rel_err"][0] == pytest.approx(pset.c_b * L / 2 - 1, abs=0.02)


def test_sigma_relations(setup_b3):
    b, grid, coeffs, pset = setup_b3
    k = coeffs.square_sum
    s10 = (coeffs.rho1 / k * pset.sigma_b, coeffs.rho2 / k * pset.sigma_b)
    s01 = (-coeffs.rho2 / k * pset.sigma_b, coeffs.rho1 / k * pset.sigma_b)
    # quarter turn maps one onto the other exactly
    assert np.array_equal(np.asarray(s01), np.asarray((-s10[1], s10[0])))
