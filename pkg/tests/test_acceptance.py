"""Acceptance criteria, one pass/fail line each at the pinned tolerances.

The lines are echoed as they are produced and collected again at the end of
the pytest run under "acceptance criteria".  Known reds are left red: see the
notes next to criteria 1 and 8.
"""

import time
import warnings

import numpy as np
import pytest

from chiral_skyrmion import dynamics as dy
from chiral_skyrmion import energy as en
from chiral_skyrmion import families as fam
from chiral_skyrmion import minimize as mn
from chiral_skyrmion import surgery as sg
from chiral_skyrmion.grid_field import SpinField, dot, integrate, make_grid, topological_charge

FOUR_PI = 4.0 * np.pi
TARGET_P4 = FOUR_PI * 0.8  # 4pi (1 - 2 (p - 2) eps) at p = 4, eps = 0.05
P4 = en.ModelParams(4, 0.05)


def rel(a, b):
    return abs(a / b - 1.0)


def test_criterion_01_closed_forms(acceptance):
    # the V_3 density decays like r^-3, so its truncation deficit at L = 40 is ~ 1/L,
    # well above 1.5%; this red is expected and recorded in the decisions ledger
    t0 = time.perf_counter()
    f = fam.sample_stereographic(make_grid(40.0, 0.05))
    D, H = en.dirichlet(f), en.helicity(f)
    V4, V3 = en.potential(f, 4), en.potential(f, 3)
    secs = time.perf_counter() - t0
    errs = {"D": rel(D, FOUR_PI), "H": rel(H, -8 * np.pi), "V4": rel(V4, np.pi), "V3": rel(V3, 2 * np.pi)}
    ok = (errs["D"] <= 0.01 and errs["H"] <= 0.01 and errs["V4"] <= 0.01 and errs["V3"] <= 0.015
          and secs < 30)
    acceptance("1", ok, f"D={D:.5f} ({errs['D']:.2%}) H={H:.4f} ({errs['H']:.2%}) V4={V4:.5f} "
                        f"({errs['V4']:.2%}) V3={V3:.4f} ({errs['V3']:.2%}, tol 1.5%) time={secs:.1f}s")
    assert ok


def test_criterion_02_matched_bounds(acceptance):
    f = fam.sample_stereographic(make_grid(80.0, 0.1), 0.25)
    rep = en.bound_suite(f, P4)
    E = rep.energies.E
    e = rep["e"]
    ok = rel(E, TARGET_P4) <= 0.015 and e.holds and abs(e.margin) <= rep.allowance
    acceptance("2", ok, f"E={E:.5f} vs {TARGET_P4:.5f} ({rel(E, TARGET_P4):.2%}, tol 1.5%); "
                        f"(e) margin={e.margin:.4f} allowance={rep.allowance:.3f} status={e.status}")
    assert ok


def test_criterion_03_bogomolny_refinement(acceptance):
    # ratio of the L2 norm of the defect on the untapered window; the squared
    # integral drops by 16 per halving (both printed)
    norms, raw = [], []
    for h in (0.2, 0.1, 0.05):
        f = fam.sample_stereographic(make_grid(40.0, h), 0.25)
        raw.append(en.bogomolny_residual(f, 0.5, window=f.window))
        norms.append(np.sqrt(raw[-1]))
    ratios = [norms[0] / norms[1], norms[1] / norms[2]]
    ok = all(abs(r - 4.0) <= 0.8 for r in ratios)
    acceptance("3", ok, f"||res||_2 = {norms[0]:.3e}, {norms[1]:.3e}, {norms[2]:.3e}; ratios "
                        f"{ratios[0]:.3f}, {ratios[1]:.3f} (4 +- 20%); int|res|^2 ratios "
                        f"{raw[0] / raw[1]:.2f}, {raw[1] / raw[2]:.2f}")
    assert ok


def test_criterion_04_step_one_identity(acceptance):
    g = make_grid(10.0, 0.1)
    points = [(1.0, 0.0, (0.0, 0.0)), (0.25, 0.0, (0.0, 0.0)), (0.6, 0.7, (0.4, -0.3)),
              (1.7, -2.2, (-0.8, 0.5)), (0.4, np.pi, (0.2, 0.9))]
    worst = 0.0
    for r, p, b in points:
        f = fam.sample_moduli(g, r, p, b)
        for kappa in (0.0, 0.5, 1.0, 2.0):
            worst = max(worst, en.pointwise_identity_residual(f, kappa))
    ok = worst <= 1e-10
    acceptance("4", ok, f"max pointwise residual {worst:.2e} over 5 moduli points x 4 kappas (tol 1e-10)")
    assert ok


def test_criterion_05_charge(acceptance):
    q_phi = topological_charge(fam.sample_stereographic(make_grid(40.0, 0.05))).q_int
    inside = sg.split(fam.sample_stereographic(make_grid(80.0, 0.2), 0.25), sg.SplitConfig(R=15.0))
    g = make_grid(120.0, 0.25)
    outside = sg.split(fam.sample_moduli(g, 1.0, 0.0, (-55.0, 0.0), taper=20.0 / 120.0),
                       sg.SplitConfig(R=10.0))
    trivial = sg.split(SpinField.constant(make_grid(80.0, 0.2)), sg.SplitConfig(R=15.0))
    runs = {"inside": inside, "outside": outside, "trivial": trivial}
    expect = {"inside": (-1, -1, 0), "outside": (-1, 0, -1), "trivial": (0, 0, 0)}
    ok = q_phi == -1 and all((r.q, r.q1, r.q2) == expect[k] and r.additive for k, r in runs.items())
    detail = " ".join(f"{k}:{r.q}->{r.q1}+{r.q2}" for k, r in runs.items())
    acceptance("5", ok, f"q_int(Phi)={q_phi}; splits {detail}")
    assert ok


def test_criterion_06_moduli_optimum(acceptance):
    pt, val = mn.moduli_minimize(3, fam.ModuliPoint(1.0, 0.3))
    analytic = abs(pt.rho - 0.5) <= 1e-8 and abs(pt.phi) <= 1e-8 and abs(val + 8 * np.pi) <= 1e-8
    # H and V_3 tails decay like 1/L: a large box with only the ring pinned
    f = fam.sample_moduli(make_grid(200.0, 0.2), pt.rho, pt.phi, taper=0.0)
    sampled = en.helicity(f) + en.potential(f, 3)
    ok = analytic and rel(sampled, val) <= 0.01
    acceptance("6", ok, f"optimum rho={pt.rho:.10f} phi={pt.phi:.1e} value={val:.10f} (-8pi={-8 * np.pi:.10f}); "
                        f"sampled H+V={sampled:.4f} ({rel(sampled, val):.2%}, tol 1%) on L=200 h=0.2")
    assert ok


def test_criterion_07_relaxation(acceptance):
    f = fam.sample_moduli(make_grid(80.0, 0.25), 0.4, 0.3)
    t0 = time.perf_counter()
    # the dilation mode is soft; residual 0.03 already puts E well inside the window
    res = mn.relax(f, P4, mn.FlowConfig(residual_tol=0.03, max_steps=30000, monitor_every=500))
    secs = time.perf_counter() - t0
    eb = en.energy_breakdown(res.field, P4)
    hist = res.history
    monotone = hist.max_increase() <= 1e-10 * 500
    ok = rel(eb.E, TARGET_P4) <= 0.015 and eb.q_int == -1 and secs < 300 and monotone
    acceptance("7", ok, f"E={eb.E:.5f} ({rel(eb.E, TARGET_P4):.2%}, tol 1.5%) q={eb.q_int} steps={res.steps} "
                        f"residual={hist.residual[-1]:.3e} max dE={hist.max_increase():.2e} time={secs:.0f}s")
    assert ok


def test_criterion_08_p2_upper_bound(acceptance):
    # Energies from the independent radial quadrature; at eps = 0.01 also from
    # the Cartesian analytic Jacobian.  Finite-difference energies on coarse
    # grids undershoot D and are not used.  Expected red: see decisions ledger.
    parts, ok = [], True
    for eps in (1e-2, 1e-3):
        D, H, V, E = fam.p2_radial_energies(eps)
        excess = (FOUR_PI - E) * abs(np.log(eps)) / (FOUR_PI * eps)
        ok &= E < FOUR_PI and 2.0 <= excess <= 6.0
        parts.append(f"eps={eps:g}: E={E:.6f} (4pi-E={FOUR_PI - E:+.2e}) excess={excess:.3f}")
    ub = fam.p2_upper_bound_field(1e-2)
    g = make_grid(np.ceil(ub.support_radius) + 1.0, 0.1)
    f = fam.sample(ub, g, taper=0.0)
    d1, d2 = f.jacobian
    E2 = (integrate(0.5 * (dot(d1, d1) + dot(d2, d2)), g)
          + 1e-2 * (en.helicity(f, derivs=f.jacobian) + en.potential(f, 2)))
    parts.append(f"cartesian E(0.01)={E2:.6f}")
    acceptance("8", ok, "; ".join(parts) + " (need E<4pi, excess in [2,6])")
    assert ok


def test_criterion_09_frame_algebra(acceptance):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(500):
        a, b = rng.uniform(0.05, 2.0), rng.uniform(0.0, 2.0)
        v = rng.uniform(-1, 1, 2)
        worst = max(worst, dy.thiele_residual(a, b, v, dy.thiele_solve(a, b, v)))
    f = fam.perturbed_skyrmion(make_grid(20.0, 0.2), 0.4)
    gil = 0.0
    for nu, alpha in ((0.0, 1.0), (0.5, 1.0), (1.2, 0.3)):
        gil = max(gil, dy.gilbert_residual(f, P4, dy.rhs_moving_frame(f, P4, nu, alpha), nu, alpha))
    galilean = all(np.array_equal(dy.thiele_solve(x, x, (0.3, -1.1)), [0.3, -1.1]) and dy.effective_nu(x, x, 2.0) == 0.0
                   for x in (0.1, 1.0, 2.5))
    ok = worst <= 1e-14 and gil <= 1e-12 and galilean
    acceptance("9", ok, f"thiele residual {worst:.1e} (tol 1e-14); gilbert substitution {gil:.1e} (tol 1e-12); "
                        f"alpha=beta -> c=v, nu=0: {galilean}")
    assert ok


def test_criterion_10_traveling_wave(acceptance):
    norms = []
    for h in (0.4, 0.2, 0.1):
        f = fam.sample_stereographic(make_grid(80.0, h), 0.25)
        r = dy.rhs_moving_frame(f, P4, 0.5, 1.0)
        norms.append(np.sqrt(integrate(dot(r, r), f.grid, window=f.window)))
    ratios = [norms[0] / norms[1], norms[1] / norms[2]]
    g = make_grid(80.0, 0.2)
    f0 = fam.sample_stereographic(g, 0.25)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", dy.HorizonExceeded)
        out, traj = dy.evolve(f0, P4, dy.DynamicsParams.from_nu(1.0, 0.5), dy.EvolveConfig(T=1.0, monitor_every=25))
    moved = np.abs(out.values - f0.values).max()
    ok = all(abs(r - 4.0) <= 0.8 for r in ratios) and moved <= 5 * g.h ** 2
    acceptance("10", ok, f"||rhs||_2 on window {norms[0]:.3e}, {norms[1]:.3e}, {norms[2]:.3e} ratios "
                         f"{ratios[0]:.3f}, {ratios[1]:.3f}; T=1 max change {moved:.2e} <= 5h^2={5 * g.h ** 2:.2f}; "
                         f"max E={max(traj.E):.4f}; horizon {traj.horizon:.3f} (warned: {bool(caught)})")
    assert ok


@pytest.fixture(scope="module")
def perturbed_runs():
    """nu = 0.5 runs from perturbed skyrmions with matched margin (4pi - E0)/eps = 30."""
    g = make_grid(80.0, 0.2)
    runs = {}
    for eps in (0.05, 0.025):
        params = en.ModelParams(4, eps)
        f0, amp = fam.matched_perturbation(g, params, 30.0)
        E0 = en.energy_breakdown(f0, params, scheme="compact").E
        T = dy.horizon(E0, eps, 1.0, 0.5)
        _, traj = dy.evolve(f0, params, dy.DynamicsParams.from_nu(1.0, 0.5), dy.EvolveConfig(T=T, monitor_every=5))
        runs[eps] = (traj, amp)
    return runs


def test_criterion_11_energy_inequality(acceptance, perturbed_runs):
    parts, ok = [], True
    for eps, (traj, amp) in perturbed_runs.items():
        rep = dy.energy_inequality_report(traj)
        ok &= rep.holds and rep.margin > 0 and rep.below_4pi and traj.t[-1] >= traj.horizon * (1 - 1e-9)
        parts.append(f"eps={eps:g}: lhs={rep.lhs:.4e} rhs={rep.rhs:.4e} margin={rep.margin:.3e} "
                     f"maxE={rep.max_energy:.4f} T=horizon={traj.horizon:.3f}")
    g = make_grid(40.0, 0.2)
    f0 = fam.perturbed_skyrmion(g, 0.5)
    try:
        _, traj0 = dy.evolve(f0, P4, dy.DynamicsParams(1.0), dy.EvolveConfig(T=0.5, monitor_every=1))
        steps = np.diff(traj0.E)
        mono = bool(np.all(steps <= 1e-8))
        parts.append(f"nu=0: {len(steps)} steps, max dE={steps.max():.2e} (allowance 1e-8)")
    except dy.StabilityViolation as e:
        mono = False
        parts.append(f"nu=0: {e}")
    ok &= mono
    acceptance("11", ok, "; ".join(parts))
    assert ok


def test_criterion_11_small_quantity_scaling(acceptance, perturbed_runs):
    a, _ = perturbed_runs[0.05]
    b, _ = perturbed_runs[0.025]
    r_dz = max(a.dz_sq) / max(b.dz_sq)
    r_diss = a.dissipation / b.dissipation
    ok = 1.5 <= r_dz <= 3.0 and 1.5 <= r_diss <= 3.0
    acceptance("11b", ok, f"eps 0.05 -> 0.025 at matched margin: sup int|dz m|^2 ratio {r_dz:.3f}, "
                          f"int int |dt m|^2 ratio {r_diss:.3f} (window [1.5, 3])")
    assert ok


def test_criterion_12_property_suites(acceptance):
    from conftest import ACCEPTANCE_LINES
    evaluated = [k for k in ACCEPTANCE_LINES if k.rstrip("b").isdigit() and int(k.rstrip("b")) <= 11]
    missing = sorted({str(k) for k in range(1, 12)} - set(evaluated), key=int)
    ok = not missing
    acceptance("12", ok, "full-scale results replaced by the convergence, margin and oracle suites above; "
                         + ("criteria 1-11 all evaluated" if ok else f"missing {missing}"))
    assert ok
