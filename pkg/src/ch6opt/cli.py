"""Command-line interface.

Exit codes: 0 success, 1 check failure, 2 usage or configuration error,
3 solver blow-up.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, RunConfig, parse_config
from .control import OptimizationError, gradient_check, optimize, random_directions
from .fieldio import FieldFormatError, atomic_write_text, write_csv, write_field
from .potential import validate_assumptions
from .sensitivity import taylor_remainder_test
from .spectral import GridField, SpectralField
from .state import BlowUpError, mass_ode_reference, residual_energy_identity, simulate

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_BLOWUP = 0, 1, 2, 3

log = logging.getLogger("ch6opt")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out(cfg: RunConfig) -> Path:
    p = cfg.resolve(cfg["io"]["output"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_manifest(cfg: RunConfig, out: Path, command: str) -> None:
    header = f"ch6opt {__version__} {command}\nkernel backend: {kernels.backend()}\nsource: {cfg.source}"
    atomic_write_text(out / "manifest.ini", cfg.manifest(header))


def _write_snapshots(out: Path, traj, stride: int, sub: str = "snapshots") -> None:
    m = traj.n_steps
    for n in range(m + 1):
        if n % stride == 0 or n == m:
            write_field(out / sub / f"phi_{n:06d}.ch6f", traj.snapshot(n))


def _diagnostics_rows(traj):
    res, _ = residual_energy_identity(traj)
    d = traj.diagnostics
    for n, t in enumerate(traj.times):
        r = res[n] if n < len(res) else float("nan")
        yield (t, d["mean"][n], d["energy"][n], d["max"][n], r)


# -- subcommands --------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    traj = simulate(cfg.phi0(grid), cfg.control(grid), cfg.params(), cfg.stepper(), cfg.T)
    out = _out(cfg)
    _write_snapshots(out, traj, cfg["io"]["stride"])
    write_csv(out / "diagnostics.csv", ("t", "mean", "energy", "nodal_max", "energy_residual"),
              _diagnostics_rows(traj))
    _write_manifest(cfg, out, "simulate")
    print(f"simulated {traj.n_steps} steps to T = {cfg.T:g}; final energy {traj.diagnostics['energy'][-1]:.6e}")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args) -> int:
    problem = cfg.problem()

    def progress(k, J, res, s):
        if not args.quiet:
            print(f"  k={k:4d}  J={J:.10e}  stationarity={res:.3e}  step={s:.3e}")

    res = optimize(cfg.control(problem.grid), problem, cfg.options(), callback=progress)
    out = _out(cfg)
    steps = [float("nan")] + list(res.step_history)
    write_csv(out / "iterations.csv", ("k", "J", "stationarity", "step"),
              ((k, J, r, s) for k, (J, r, s) in enumerate(zip(res.J_history, res.stationarity_history, steps))))
    for n, un in enumerate(res.u_star):
        write_field(out / "control" / f"u_{n:06d}.ch6f", GridField(problem.grid, un))
    _write_snapshots(out, res.state, cfg["io"]["stride"], "state")
    _write_manifest(cfg, out, "optimize")
    print(f"{res.reason} after {res.iterations} iterations: J = {res.J_history[-1]:.10e}, "
          f"stationarity = {res.stationarity_history[-1]:.3e}")
    return EXIT_OK if res.reason == "converged" else EXIT_CHECK


def cmd_gradient_check(cfg: RunConfig, args) -> int:
    ch = cfg["check"]
    n_dir = args.directions if args.directions is not None else ch["directions"]
    eps = args.eps if args.eps is not None else ch["eps"]
    if n_dir < 1 or not eps > 0:
        print("error: --directions must be >= 1 and --eps > 0", file=sys.stderr)
        return EXIT_USAGE
    problem = cfg.problem()
    chk = gradient_check(problem, cfg.control(problem.grid), n_dir, eps, ch["seed"])
    out = _out(cfg)
    write_csv(out / "gradient_check.csv", ("direction", "adjoint", "finite_difference", "rel_err"),
              ((i, a, f, e) for i, (a, f, e) in enumerate(zip(chk.adjoint, chk.finite_difference, chk.rel_errors))))
    _write_manifest(cfg, out, "gradient-check")
    print(f"{'dir':>3}  {'adjoint':>22}  {'finite difference':>22}  {'rel err':>10}")
    for i, (a, f, e) in enumerate(zip(chk.adjoint, chk.finite_difference, chk.rel_errors)):
        print(f"{i:3d}  {a:22.14e}  {f:22.14e}  {e:10.3e}")
    ok = chk.max_rel_error <= ch["max_rel_err"]
    print(f"max relative error {chk.max_rel_error:.3e} (bound {ch['max_rel_err']:g}): {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_taylor_check(cfg: RunConfig, args) -> int:
    ch = cfg["check"]
    grid = cfg.grid()
    phi0 = cfg.phi0(grid)
    m = cfg.n_steps
    h = random_directions(grid, m, 1, ch["seed"])[0]
    rep = taylor_remainder_test(cfg.control(grid), h, ch["taylor_eps"], cfg.params(), cfg.stepper(), phi0, cfg.T)
    print(f"{'eps':>10}  {'R(eps)':>14}  {'R/eps^2':>14}")
    for e, r, q in zip(rep.eps, rep.remainders, rep.ratios):
        print(f"{e:10.3e}  {r:14.6e}  {q:14.6e}")
    ok = rep.spread < ch["taylor_max_spread"]
    print(f"ratio spread {rep.spread:.3f} (bound {ch['taylor_max_spread']:g}): {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_diagnose(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    params = cfg.params()
    dt = cfg["time"]["dt"]
    traj = simulate(cfg.phi0(grid), cfg.control(grid), params, cfg.stepper(), cfg.T)
    u_mean = traj.u.reshape(traj.n_steps, -1).mean(axis=1)
    means = traj.means()
    # implicit-Euler recursion the scheme satisfies exactly, and the exact ODE
    rec = np.empty_like(means)
    rec[0] = means[0]
    for n in range(traj.n_steps):
        rec[n + 1] = (rec[n] + dt * u_mean[n]) / (1.0 + dt * params.sigma)
    exact = np.array([mass_ode_reference(means[0], u_mean, params.sigma, t, dt) for t in traj.times])
    rec_err = float(np.max(np.abs(means - rec)))
    ode_err = float(np.max(np.abs(means - exact)))
    _, e_res = residual_energy_identity(traj)
    E = traj.diagnostics["energy"]
    print(f"mean: discrete recursion error {rec_err:.3e}, exact-ODE error {ode_err:.3e}")
    print(f"energy: initial {E[0]:.10e}, final {E[-1]:.10e}, max increase {float(np.max(np.diff(E), initial=0.0)):.3e}")
    print(f"energy identity: max |residual| {e_res:.3e}")
    ok = rec_err <= cfg["check"]["mass_tol"]
    print(f"mass recursion (tol {cfg['check']['mass_tol']:g}): {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_validate_potential(cfg: RunConfig, args) -> int:
    pot = cfg.params().potential
    rep = validate_assumptions(pot, (-args.interval, args.interval))
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.ok else EXIT_CHECK


COMMANDS = {
    "simulate": (cmd_simulate, "run the state solver; write snapshots, diagnostics CSV and manifest"),
    "optimize": (cmd_optimize, "run projected gradient descent; write iterations CSV, final control/state"),
    "gradient-check": (cmd_gradient_check, "compare the adjoint gradient with finite differences"),
    "taylor-check": (cmd_taylor_check, "remainder-ratio test of the linearized state"),
    "diagnose": (cmd_diagnose, "mean-value and energy-identity residual report"),
    "validate-potential": (cmd_validate_potential, "check the potential's structural assumptions"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ch6opt", description="Sixth-order Cahn-Hilliard state solver and optimal control.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--backend", choices=("cython", "python"), help="force a kernel backend")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("config", help="INI run configuration")
        if name == "gradient-check":
            sp.add_argument("--directions", type=int, default=None, help="number of random directions")
            sp.add_argument("--eps", type=float, default=None, help="finite-difference step")
        if name == "optimize":
            sp.add_argument("-q", "--quiet", action="store_true", help="no per-iteration output")
        if name == "validate-potential":
            sp.add_argument("--interval", type=float, default=10.0, help="half-width S of the sample interval")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.backend:
        try:
            kernels.use(args.backend)
        except (ImportError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    func = COMMANDS[args.command][0]
    try:
        cfg = parse_config(args.config)
        return func(cfg, args)
    except (ConfigError, FieldFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OptimizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP if isinstance(exc.cause, BlowUpError) else EXIT_CHECK
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
