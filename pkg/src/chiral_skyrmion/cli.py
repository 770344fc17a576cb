"""Command-line front end: ``energy``, ``minimize``, ``evolve``, ``verify``, ``family``, ``split``.

Exit status: 0 success, 1 a check failed, 2 usage error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import _accel
from . import energy as en
from . import families as fam
from .dynamics import DynamicsParams, EvolveConfig, HorizonExceeded, energy_inequality_report, evolve
from .grid_field import make_grid, topological_charge
from .io import read_field, write_field, write_rows
from .minimize import ChargeJump, FlowConfig, NotConverged, relax
from .surgery import AnchorDegenerate, DomainTooSmall, SplitConfig, split


class UsageError(Exception):
    pass


def read_config(path):
    """``key = value`` lines, ``#`` comments; keys use dashes or underscores."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _floats(text, count, flag):
    try:
        vals = [float(s) for s in str(text).split(",")]
    except ValueError:
        raise UsageError(f"{flag}: expected {count} comma-separated numbers, got {text!r}")
    if len(vals) != count:
        raise UsageError(f"{flag}: expected {count} comma-separated numbers, got {text!r}")
    return vals


def _params(a):
    try:
        return en.ModelParams(a.p, a.eps)
    except ValueError as e:
        raise UsageError(f"--p/--eps: {e}")


def _grid(a):
    if getattr(a, "grid", None):
        L, h = _floats(a.grid, 2, "--grid")
    else:
        L, h = a.L, a.h
    try:
        return make_grid(L, h)
    except ValueError as e:
        raise UsageError(f"--L/--h: {e}")


def _echo(out, **kw):
    out.write("# " + " ".join(f"{k}={v}" for k, v in kw.items()) + "\n")


def _load(a):
    try:
        return read_field(a.input, a.format).validate()
    except (OSError, ValueError) as e:
        raise UsageError(f"--in: {e}")


# ---------------------------------------------------------------- commands

def cmd_energy(a, out):
    f = _load(a)
    params = _params(a)
    eb = en.energy_breakdown(f, params, scheme=a.scheme)
    tc = topological_charge(f)
    _echo(out, n=f.grid.n, L=f.grid.L, h=f.grid.h, p=params.p, eps=params.eps, scheme=a.scheme)
    for k, v in eb.as_dict().items():
        out.write(f"{k:>8} {v:.12g}\n")
    out.write(f"{'q_real':>8} {tc.q_real:.12g}\n{'n_degen':>8} {tc.n_degenerate}\n")
    return 0


def _write_bounds(report, out):
    out.write(f"{'check':<6}{'lhs':>20}{'rhs':>20}{'margin':>20}  status\n")
    for c in report.checks:
        out.write(f"{c.name:<6}{c.lhs:>20.10g}{c.rhs:>20.10g}{c.margin:>20.10g}  {c.status}\n")
    out.write("check,lhs,rhs,margin,status\n")
    for c in report.checks:
        out.write(f"{c.name},{c.lhs:.17g},{c.rhs:.17g},{c.margin:.17g},{c.status}\n")


def cmd_verify(a, out):
    params = _params(a)
    if a.suite == "closed-forms":
        g = _grid(a)
        f = fam.sample_stereographic(g)
        _echo(out, suite=a.suite, n=g.n, L=g.L, h=g.h, tol=a.tol, strict=a.strict)
        D0, H0, _ = fam.closed_forms(4.0)
        rows = [("D", en.dirichlet(f), D0, True), ("H", en.helicity(f), H0, True),
                ("V4", en.potential(f, 4.0), fam.closed_forms(4.0)[2], True),
                ("V3", en.potential(f, 3.0), fam.closed_forms(3.0)[2], a.strict)]
        tc = topological_charge(f)
        ok = tc.q_int == -1
        out.write(f"{'quantity':<10}{'measured':>16}{'exact':>16}{'rel.err':>12}  gated\n")
        for name, val, exact, gated in rows:
            rel = abs(val / exact - 1.0)
            if gated:
                ok &= rel <= a.tol
            out.write(f"{name:<10}{val:>16.10g}{exact:>16.10g}{rel:>12.3e}  {'yes' if gated else 'no'}\n")
        out.write(f"{'q_int':<10}{tc.q_int:>16d}{-1:>16d}\n")
        # V3 density decays like r^-3: the part beyond the untapered window is ~ 2pi / window
        tail = 2.0 * np.pi / np.sqrt(1.0 + f.window ** 2)
        out.write(f"# V3 tail beyond r={f.window:g} is about {tail:.4g} ({tail / (2 * np.pi):.2%}); "
                  "gated only with --strict\n")
        return 0 if ok else 1
    if a.suite == "bounds":
        if a.input:
            f = _load(a)
        else:
            g = _grid(a)
            f = fam.sample_stereographic(g, fam.optimal_scale(params.p) if params.p > 2 else 1.0)
        rep = en.bound_suite(f, params, disc_constant=a.disc_constant)
        _echo(out, suite=a.suite, n=f.grid.n, L=f.grid.L, h=f.grid.h, p=params.p, eps=params.eps,
              allowance=f"{rep.allowance:.3g}")
        _write_bounds(rep, out)
        return 0 if rep.all_hold else 1
    if a.suite == "identity":
        g = _grid(a)
        rng = np.random.default_rng(a.seed)
        worst = 0.0
        _echo(out, suite=a.suite, n=g.n, L=g.L, h=g.h, seed=a.seed, tol=1e-10)
        for _ in range(5):
            pt = fam.ModuliPoint(rng.uniform(0.2, 1.0), rng.uniform(-np.pi, np.pi),
                                 tuple(rng.uniform(-0.5, 0.5, 2)))
            f = fam.sample(lambda x1, x2: fam.moduli_map(pt, x1, x2), g)
            for k in (0.0, 0.5, 1.0, 2.0):
                r = en.pointwise_identity_residual(f, k)
                worst = max(worst, r)
                out.write(f"rho={pt.rho:.4f} phi={pt.phi:+.4f} kappa={k:g} residual={r:.3e}\n")
        out.write(f"max residual {worst:.3e}\n")
        return 0 if worst <= 1e-10 else 1
    raise UsageError(f"--suite: unknown suite {a.suite!r}")


def cmd_family(a, out):
    g = _grid(a)
    kw = {}
    for item in a.params or []:
        if "=" not in item:
            raise UsageError(f"--params: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        kw[k] = tuple(_floats(v, 2, "--params b")) if k == "b" else float(v)
    try:
        ev = fam.make_evaluator(a.kind, **kw)
        taper = a.taper
        if taper is None:
            taper = 0.0 if a.kind in ("cutoff", "p2") else 0.5
        f = fam.sample(ev, g, taper, tag=a.kind)
    except (ValueError, KeyError) as e:
        raise UsageError(f"--kind/--params: {e}")
    write_field(f, a.out, a.format)
    _echo(out, kind=a.kind, n=g.n, L=g.L, h=g.h, taper=taper, file=a.out)
    out.write(f"q_int {topological_charge(f).q_int}\n")
    return 0


def cmd_minimize(a, out):
    f = _load(a)
    params = _params(a)
    cfg = FlowConfig(a.dt, a.max_steps, a.residual_tol, a.renorm_every, not a.no_charge_guard,
                     a.monitor_every)
    try:
        cfg.resolved(f.grid.h)
    except ValueError as e:
        raise UsageError(f"--dt: {e}")
    res = relax(f, params, cfg, raise_on_failure=False)
    prefix = Path(a.out_prefix)
    write_rows(f"{prefix}_history.csv", ["step", "E", "D", "H", "V", "residual", "q"], res.history.rows())
    write_field(res.field, f"{prefix}_final.{'csv' if a.format == 'csv' else 'cskf'}", a.format)
    _echo(out, n=f.grid.n, L=f.grid.L, h=f.grid.h, p=params.p, eps=params.eps,
          dt=cfg.resolved(f.grid.h), tol=cfg.residual_tol)
    h = res.history
    out.write(f"stop={res.stop_reason} steps={res.steps} E={h.E[-1]:.12g} "
              f"residual={h.residual[-1]:.3e} q={h.q[-1]}\n")
    return 0 if res.converged else 1


def cmd_evolve(a, out):
    f = _load(a)
    params = _params(a)
    if a.nu is not None:
        dp = DynamicsParams.from_nu(a.alpha, a.nu, a.beta)
    else:
        dp = DynamicsParams(a.alpha, a.beta, tuple(_floats(a.v, 2, "--v")))
    cfg = EvolveConfig(a.dt, a.T, a.renorm_every, a.monitor_every, a.blowup_threshold,
                       snapshot_every=a.snapshot_every)
    try:
        dt, steps = cfg.resolved(f.grid.h, dp.alpha, dp.nu)
    except ValueError as e:
        raise UsageError(f"--dt/--T: {e}")
    import warnings
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HorizonExceeded)
        final, traj = evolve(f, params, dp, cfg)
    prefix = Path(a.out_prefix)
    write_rows(f"{prefix}_trajectory.csv",
               ["t", "E", "D_minus_4pi", "dissipation_increment", "sup_grad", "q"], traj.rows())
    ext = "csv" if a.format == "csv" else "cskf"
    write_field(final, f"{prefix}_final.{ext}", a.format)
    for k, (t, m) in enumerate(traj.snapshots):
        write_field(final.replaced(m), f"{prefix}_snap{k:04d}.{ext}", a.format)
    rep = energy_inequality_report(traj)
    _echo(out, n=f.grid.n, L=f.grid.L, h=f.grid.h, p=params.p, eps=params.eps, alpha=dp.alpha,
          beta=dp.beta, nu=f"{dp.nu:.6g}", dt=f"{dt:.6g}", steps=steps)
    for w in caught:
        out.write(f"warning: {w.message}\n")
    out.write(f"E0={traj.E[0]:.12g} ET={traj.E[-1]:.12g} horizon={traj.horizon:.6g}\n")
    out.write(f"energy inequality lhs={rep.lhs:.6e} rhs={rep.rhs:.6e} margin={rep.margin:.3e} "
              f"holds={rep.holds}\n")
    return 0 if rep.holds else 1


def cmd_split(a, out):
    f = _load(a)
    center = tuple(_floats(a.center, 2, "--center"))
    try:
        cfg = SplitConfig(a.R, a.sigma, a.delta, center, a.p)
    except ValueError as e:
        raise UsageError(f"--R/--sigma/--delta: {e}")
    try:
        res = split(f, cfg)
    except DomainTooSmall as e:
        out.write(f"error: {e}\n")
        return 1
    except AnchorDegenerate as e:
        out.write(f"error: {e}\n")
        return 1
    ext = "csv" if a.format == "csv" else "cskf"
    write_field(res.inner, f"{a.out_prefix}1.{ext}", a.format)
    write_field(res.outer, f"{a.out_prefix}2.{ext}", a.format)
    _echo(out, n=f.grid.n, L=f.grid.L, h=f.grid.h, R=cfg.R, sigma=cfg.sigma, delta=cfg.delta)
    out.write(f"c={res.c:.6g} q={res.q} q1={res.q1} q2={res.q2} additive={res.additive}\n")
    out.write(f"annulus_energy={res.annulus_energy:.6g} inner_tail={res.inner_tail_energy:.6g} "
              f"outer_core={res.outer_core_energy:.6g} K={res.K:.4g}\n")
    return 0 if res.additive else 1


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file; command-line flags win")
    common.add_argument("--format", choices=("csv", "binary"), default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--backend", choices=("numpy", "numba"), default=None)

    model = _Parser(add_help=False)
    model.add_argument("--p", type=float, default=4.0)
    model.add_argument("--eps", type=float, default=0.05)

    grid = _Parser(add_help=False)
    grid.add_argument("--L", type=float, default=40.0)
    grid.add_argument("--h", type=float, default=0.1)
    grid.add_argument("--grid", help="L,h")

    ap = _Parser(prog="chiral-skyrmion", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("energy", parents=[common, model])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--scheme", choices=("central", "compact"), default="central")

    p = sub.add_parser("verify", parents=[common, model, grid])
    p.add_argument("--suite", choices=("closed-forms", "bounds", "identity"), default="closed-forms")
    p.add_argument("--in", dest="input")
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--strict", action="store_true", help="also gate V3 (its far-field tail decays only like 1/L)")
    p.add_argument("--disc-constant", type=float, default=10.0)

    p = sub.add_parser("family", parents=[common, grid])
    p.add_argument("--kind", choices=fam.FAMILIES, required=True)
    p.add_argument("--params", nargs="*", help="key=value pairs, e.g. rho=0.25 phi=0 b=0,0")
    p.add_argument("--taper", type=float, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("minimize", parents=[common, model])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--max-steps", type=int, default=20000)
    p.add_argument("--residual-tol", type=float, default=1e-4)
    p.add_argument("--renorm-every", type=int, default=1)
    p.add_argument("--monitor-every", type=int, default=25)
    p.add_argument("--no-charge-guard", action="store_true")
    p.add_argument("--out-prefix", default="relax")

    p = sub.add_parser("evolve", parents=[common, model])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--v", default="0,0")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--renorm-every", type=int, default=1)
    p.add_argument("--monitor-every", type=int, default=10)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--blowup-threshold", type=float, default=50.0)
    p.add_argument("--out-prefix", default="evolve")

    p = sub.add_parser("split", parents=[common, model])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--sigma", type=int, choices=(0, 1), default=1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--center", default="0,0")
    p.add_argument("--out-prefix", default="part")
    return ap


def _apply_config(ap, argv, args):
    """Fill options from the config file unless given on the command line."""
    conf = read_config(args.config)
    sub = ap._subparsers._group_actions[0].choices[args.command]
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    for action in sub._actions:
        key = action.dest
        flag = next((o for o in action.option_strings if o.startswith("--")), None)
        if key not in conf:
            continue
        raw = conf.pop(key)
        if flag in given:
            continue
        if action.type is not None:
            try:
                raw = action.type(raw)
            except ValueError:
                raise UsageError(f"{args.config}: bad value for {key}: {raw!r}")
        elif action.const is True:
            raw = raw.lower() in ("1", "true", "yes", "on")
        if action.choices is not None and raw not in action.choices:
            raise UsageError(f"{args.config}: {key} must be one of {list(action.choices)}")
        setattr(args, key, raw)
    if conf:
        raise UsageError(f"{args.config}: unknown keys {sorted(conf)}")


COMMANDS = {
    "energy": cmd_energy, "verify": cmd_verify, "family": cmd_family,
    "minimize": cmd_minimize, "evolve": cmd_evolve, "split": cmd_split,
}


def run(argv=None, out=None):
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        if args.config:
            _apply_config(ap, argv, args)
        if args.backend:
            _accel.set_backend(args.backend)
        if args.threads:
            _accel.set_threads(args.threads)
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        sys.stderr.write(f"usage error: {e}\n")
        sys.stderr.write(ap.format_usage())
        return 2
    except (NotConverged, ChargeJump) as e:
        out.write(f"error: {e}\n")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
