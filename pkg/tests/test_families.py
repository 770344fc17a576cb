import numpy as np
import pytest

from chiral_skyrmion import energy as en
from chiral_skyrmion import families as fam
from chiral_skyrmion.grid_field import make_grid, topological_charge

FOUR_PI = 4.0 * np.pi


def test_stereographic_values():
    m, _ = fam.stereographic(0.0, 0.0)
    assert np.array_equal(m, [0.0, 0.0, -1.0])
    m, _ = fam.stereographic(0.6, 0.8)
    assert m[2] == 0.0
    m, _ = fam.stereographic(6.0, 8.0)
    assert m[2] == pytest.approx(99.0 / 101.0, abs=1e-15)
    assert np.linalg.norm(m) == pytest.approx(1.0, abs=1e-15)


def test_stereographic_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 50)) * 2
    _, (d1, d2) = fam.stereographic(*x)
    t = 1e-6
    fd1 = (fam.stereographic(x[0] + t, x[1])[0] - fam.stereographic(x[0] - t, x[1])[0]) / (2 * t)
    fd2 = (fam.stereographic(x[0], x[1] + t)[0] - fam.stereographic(x[0], x[1] - t)[0]) / (2 * t)
    assert np.abs(fd1 - d1).max() < 1e-8 and np.abs(fd2 - d2).max() < 1e-8


def test_moduli_map_examples():
    x1, x2 = np.meshgrid(np.linspace(-3, 3, 7), np.linspace(-2, 2, 5), indexing="ij")
    m0, j0 = fam.stereographic(x1, x2)
    m1, j1 = fam.moduli_map(fam.ModuliPoint(1.0, 0.0), x1, x2)
    assert np.array_equal(m0, m1) and np.array_equal(j0[0], j1[0])
    m, _ = fam.moduli_map(fam.ModuliPoint(0.25), 0.0, 0.0)
    assert np.array_equal(m, [0.0, 0.0, -1.0])
    mp, _ = fam.moduli_map(fam.ModuliPoint(0.7, np.pi, (0.2, 0.1)), x1, x2)
    mq, _ = fam.moduli_map(fam.ModuliPoint(0.7, 0.0, (0.2, 0.1)), x1, x2)
    assert np.allclose(mp[..., :2], -mq[..., :2], atol=1e-15)
    assert np.array_equal(mp[..., 2], mq[..., 2])
    assert fam.ModuliPoint(0.5, 0.0, (1.0, -2.0)).center == (-2.0, 4.0)
    with pytest.raises(ValueError):
        fam.ModuliPoint(0.0)


def test_quarter_skyrmion_has_degree_minus_one():
    f = fam.sample_moduli(make_grid(30.0, 0.25), 0.25)
    assert topological_charge(f).q_int == -1


def test_closed_forms_and_scales():
    assert fam.closed_forms(4) == pytest.approx((FOUR_PI, -8 * np.pi, np.pi))
    assert fam.closed_forms(3) == pytest.approx((FOUR_PI, -8 * np.pi, 2 * np.pi))
    with pytest.raises(ValueError):
        fam.closed_forms(2)
    assert fam.optimal_scale(4) == pytest.approx(0.25)
    assert fam.optimal_scale(3) == pytest.approx(0.5)
    assert fam.optimal_scale(2.5) == pytest.approx(1.0)


def test_scaled_energy_curve():
    p = en.ModelParams(4, 0.05)
    assert fam.scaled_energy_curve(0.25, p) == pytest.approx(FOUR_PI * 0.8, abs=1e-12)
    assert fam.scaled_energy_curve(0.25, p) == pytest.approx(10.0531, abs=1e-4)
    for lam in (0.1, 1.0, 7.0):
        assert fam.scaled_energy_curve(lam, en.ModelParams(3, 0.0)) == FOUR_PI
    e = fam.scaled_energy_curve(0.25, p)
    assert e <= fam.scaled_energy_curve(0.225, p) and e <= fam.scaled_energy_curve(0.275, p)
    with pytest.raises(ValueError):
        fam.scaled_energy_curve(0.0, p)


def test_moduli_objective_examples():
    assert fam.moduli_objective(fam.ModuliPoint(0.5, 0.0), 3) == pytest.approx(-8 * np.pi)
    val = fam.moduli_objective(fam.ModuliPoint(0.8, np.pi / 2), 3)
    assert val == pytest.approx(2 * np.pi / 0.64)
    pt, val = fam.moduli_optimum(3.5)
    assert pt.rho == pytest.approx(1.0 / 3.0) and val == pytest.approx(-8 * np.pi * 1.5)


def test_moduli_objective_matches_sampled_field():
    # H and V_3 tails decay like 1/L, hence the large box
    g = make_grid(160.0, 0.2)
    for pt in (fam.ModuliPoint(0.5, 0.0), fam.ModuliPoint(0.7, 0.6)):
        f = fam.sample_moduli(g, pt.rho, pt.phi, taper=0.0)
        sampled = en.helicity(f) + en.potential(f, 3)
        assert sampled == pytest.approx(fam.moduli_objective(pt, 3), rel=0.01)


def test_eta_properties():
    s = np.linspace(-1, 1, 2001)
    e = fam.eta(s)
    assert np.all(e[s <= 0] == 1.0) and np.all(e[s >= 0.5] == 0.0)
    assert np.all(np.diff(e) <= 0)
    assert np.allclose(fam.eta(s) + fam.eta(0.5 - s), 1.0)
    t = 1e-6
    fd = (fam.eta(s + t) - fam.eta(s - t)) / (2 * t)
    assert np.abs(fd - fam.eta_prime(s)).max() < 1e-6
    assert fam.h_func(0.5) == pytest.approx(fam.H_PLATEAU, abs=1e-12)
    assert fam.h_func(3.0) == pytest.approx(fam.H_PLATEAU, abs=1e-12)
    assert fam.h_func(-2.0) == pytest.approx(-2.0, abs=1e-12)


def test_stream_function_examples():
    prof = fam.CutoffProfile(10.0)
    f, f1, _ = fam.stream_function(prof, 5.0)
    assert f == pytest.approx(np.log(26.0), abs=1e-12)
    assert f1 == pytest.approx(10.0 / 26.0, abs=1e-14)
    assert fam.stream_function(prof, 25.0)[0] == fam.stream_function(prof, 30.0)[0]
    assert prof.support < 2 * prof.R
    with pytest.raises(ValueError):
        fam.CutoffProfile(0.5)


@pytest.mark.parametrize("R", [1.0, 10.0, 50.0])
def test_stream_function_derivative_bounds(R):
    prof = fam.CutoffProfile(R)
    r = np.linspace(R, 3 * R, 20001)
    _, f1, f2 = fam.stream_function(prof, r)
    assert np.all(f1 >= 0) and np.all(f1 <= 2 * r / (1 + r * r) + 1e-15)
    assert np.all(f2 <= 1e-15)
    # -f'' (1 + r^2) <= 4 max|eta'| + 2, uniformly in R
    C = np.max(-f2 * (1 + r * r))
    eta_max = np.abs(fam.eta_prime(np.linspace(0, 0.5, 20001))).max()
    assert C <= 4.0 * eta_max + 2.0
    # f' is the derivative of f
    f = fam.stream_function(prof, r)[0]
    assert np.abs(np.gradient(f, r)[1:-1] - f1[1:-1]).max() < 1e-6


def test_cutoff_family_examples():
    prof = fam.CutoffProfile(5.0)
    m, _ = fam.cutoff_family(prof, 0.0, 0.0)
    assert np.array_equal(m, [0.0, 0.0, -1.0])
    rng = np.random.default_rng(0)
    ang = rng.uniform(0, 2 * np.pi, 200)
    r_in = rng.uniform(0, 5.0, 200)
    x1, x2 = r_in * np.cos(ang), r_in * np.sin(ang)
    a, _ = fam.cutoff_family(prof, x1, x2)
    b, _ = fam.stereographic(x1, x2)
    assert np.abs(a - b).max() <= 1e-12
    r_out = rng.uniform(10.0, 30.0, 200)
    m, (d1, d2) = fam.cutoff_family(prof, r_out * np.cos(ang), r_out * np.sin(ang))
    assert np.array_equal(m, np.tile([0.0, 0.0, 1.0], (200, 1)))
    assert np.all(d1 == 0) and np.all(d2 == 0)
    r = np.linspace(5.0, 7.0, 500)
    m, _ = fam.cutoff_family(prof, r, 0 * r)
    assert np.abs(np.linalg.norm(m, axis=-1) - 1).max() < 1e-14


def test_cutoff_family_jacobian():
    prof = fam.CutoffProfile(3.0)
    rng = np.random.default_rng(1)
    r = rng.uniform(3.05, 4.5, 100)
    a = rng.uniform(0, 2 * np.pi, 100)
    x1, x2 = r * np.cos(a), r * np.sin(a)
    _, (d1, d2) = fam.cutoff_family(prof, x1, x2)
    t = 1e-6
    fd1 = (fam.cutoff_family(prof, x1 + t, x2)[0] - fam.cutoff_family(prof, x1 - t, x2)[0]) / (2 * t)
    fd2 = (fam.cutoff_family(prof, x1, x2 + t)[0] - fam.cutoff_family(prof, x1, x2 - t)[0]) / (2 * t)
    assert np.abs(fd1 - d1).max() < 1e-6 and np.abs(fd2 - d2).max() < 1e-6


def test_anticonformality_of_class_members():
    g = make_grid(8.0, 0.2)
    for f in (fam.sample_moduli(g, 0.6, 1.1, (0.4, 0.2), taper=0.0),
              fam.sample_stereographic(g, 2.0, taper=0.0)):
        d1, d2 = f.jacobian
        s = slice(1, -1)
        cr = d1 - np.cross(f.values, d2)
        assert np.abs(cr[s, s]).max() <= 1e-10


def test_p2_parameters():
    R, lam = fam.p2_parameters(0.01)
    assert R == pytest.approx(46.05, abs=0.01) and lam == pytest.approx(1.151, abs=1e-3)
    R, lam = fam.p2_parameters(0.001)
    assert R == pytest.approx(218.4, abs=0.05) and lam == pytest.approx(1.727, abs=1e-3)
    with pytest.raises(ValueError):
        fam.p2_parameters(0.2)
    ub = fam.p2_upper_bound_field(0.01)
    assert ub.predicted == pytest.approx(FOUR_PI * (1 - 0.04 / np.log(100.0)))
    assert ub.support_radius < 2 * ub.profile.R / ub.lam


def test_p2_radial_oracle_matches_cartesian_jacobian():
    eps = 0.01
    ub = fam.p2_upper_bound_field(eps)
    g = make_grid(np.ceil(ub.support_radius) + 1.0, 0.1)
    f = fam.sample(ub, g, taper=0.0)
    d1, d2 = f.jacobian
    D = en.integrate(0.5 * (en.dot(d1, d1) + en.dot(d2, d2)), g)
    H = en.helicity(f, derivs=f.jacobian)
    Dr, Hr, Vr, _ = fam.p2_radial_energies(eps)
    assert D == pytest.approx(Dr, rel=1e-6)
    assert H == pytest.approx(Hr, rel=1e-3)
    assert en.potential(f, 2) == pytest.approx(Vr, rel=1e-3)


def test_sample_taper_window():
    g = make_grid(20.0, 0.25)
    f = fam.sample_stereographic(g)
    assert f.window == pytest.approx(10.0)
    s = g.box_slice(f.window)
    raw, _ = fam.stereographic(*(a[s, s] for a in g.mesh))
    assert np.abs(f.values[s, s] - raw).max() < 1e-15
    f.validate()
    with pytest.raises(ValueError):
        fam.make_evaluator("nope")


def test_perturbed_skyrmion_and_matching():
    g = make_grid(30.0, 0.3)
    f = fam.perturbed_skyrmion(g, 0.5)
    f.validate()
    assert topological_charge(f).q_int == -1
    params = en.ModelParams(4, 0.05)
    f, a = fam.matched_perturbation(g, params, 30.0)
    E = en.energy_breakdown(f, params, scheme="compact").E
    assert (FOUR_PI - E) / params.eps == pytest.approx(30.0, abs=1e-6)
    with pytest.raises(ValueError):
        fam.matched_perturbation(g, params, 1e3)
