"""Command-line front end: ``edmbranch {solve-limit,branch,verify,rerun}``.

Exit codes: 0 success, 1 solver or verification failure, 2 domain error,
3 empty branch, 64 usage error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .choquard import DomainError, ModelParams, solve_ground_state
from .continuation import SolverOptions, continue_branch
from .edm_system import MUTATIONS, scaled_residual
from .grid import build_grid, grid_from_descriptor
from .io import sha256, write_csv, write_json
from .limit_state import assemble_limit_state
from .newton import MetricBreakdownError, SolverError
from .physical import diagnostics, reconstruct
from .verify import run_suite

EXIT_OK, EXIT_FAIL, EXIT_DOMAIN, EXIT_EMPTY, EXIT_USAGE = 0, 1, 2, 3, 64

logger = logging.getLogger("edmbranch")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, model_required: bool) -> None:
    p.add_argument("--m", type=float, required=model_required, default=None if model_required else 1.0,
                   help="fermion mass")
    p.add_argument("--e", type=float, required=model_required, default=None if model_required else 0.6,
                   help="charge (e**2 < m**2)")
    p.add_argument("--n", type=int, default=None, help="number of grid nodes (default 2000)")
    p.add_argument("--rmax", type=float, default=40.0, help="outer radius in scaled units")
    p.add_argument("--grading", choices=("uniform", "geometric"), default="uniform")
    p.add_argument("--q", type=float, default=1.0, help="geometric grading ratio")
    p.add_argument("--tol", type=float, default=1e-10, help="Newton tolerance (sup-norm)")
    p.add_argument("--max-iters", type=int, default=30)
    p.add_argument("--out", type=Path, default=Path("edm_out"), help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edmbranch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve-limit", help="ground state and eps = 0 limit state")
    _common(p, model_required=True)

    p = sub.add_parser("branch", help="continue the branch from eps = 0 to eps_max")
    _common(p, model_required=True)
    p.add_argument("--eps-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)

    p = sub.add_parser("verify", help="run the self-check suite")
    _common(p, model_required=False)
    p.add_argument("--quick", action="store_true", help="n = 500 and fewer random states")
    p.add_argument("--mutate", choices=MUTATIONS, default=None,
                   help="flip the sign of one remainder term (oracle sensitivity test)")

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, default=None, help="output directory (default: a sibling)")
    p.add_argument("--check", action="store_true",
                   help="exit 1 unless every output matches the recorded hash")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _setup(args):
    if args.n is None:
        args.n = 500 if getattr(args, "quick", False) else 2000
    params = ModelParams(args.m, args.e)
    try:
        grid = build_grid(args.n, args.rmax, args.grading, args.q)
        opts = SolverOptions(tol=args.tol, max_iters=args.max_iters)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return params, grid, opts


def _manifest(args, command, grid, opts, outputs, out_dir, extra=None) -> dict:
    man = {
        "command": command,
        "params": {"m": args.m, "e": args.e},
        "grid": grid.descriptor(),
        "solver": {"tol": opts.tol, "max_iters": opts.max_iters, "damping": opts.damping},
        "seed": args.seed,
        "outputs": [{"file": f, "sha256": sha256(out_dir / f)} for f in outputs],
        "provenance": {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "version": __version__,
        },
    }
    extra = dict(extra or {})
    man["provenance"].update(extra.pop("provenance", {}))
    man.update(extra)
    return man


def _state_columns(state) -> dict:
    return {"r": state.grid.r, "phi": state.phi.values, "chi": state.chi.values,
            "tau": state.tau.values, "zeta": state.zeta.values}


def cmd_solve_limit(args) -> int:
    params, grid, opts = _setup(args)
    gs = solve_ground_state(params, grid, tol=opts.tol, max_iters=max(opts.max_iters, 60))
    limit = assemble_limit_state(gs, params)
    res = scaled_residual(0.0, limit, params)
    norms = res.sup_norms()
    residual = float(max(norms.max(), np.max(np.abs(res.boundary))))
    out = args.out
    write_csv(out / "limit.csv", _state_columns(limit))
    man = _manifest(args, "solve-limit", grid, opts, ["limit.csv"], out, {
        "provenance": {"ground_state_residual": gs.residual_norm,
                       "limit_residual_sup": residual,
                       "limit_residual_by_equation": norms.tolist(),
                       "l2_mass": gs.l2_mass,
                       "v_prime_origin": gs.v_prime_origin}})
    write_json(out / "manifest.json", man)
    print(f"limit state: residual {residual:.3e} (ground state {gs.residual_norm:.3e}), "
          f"l2 mass {gs.l2_mass:.10g}; wrote {out / 'limit.csv'}")
    return EXIT_OK if residual < opts.tol else EXIT_FAIL


BRANCH_COLUMNS = ("k", "eps", "omega", "residual_norm", "newton_iters", "adm_mass", "adm_spread",
                  "norm_integral", "norm_times_4pi", "sup_t", "min_A", "phys_res_1", "phys_res_2",
                  "phys_res_3", "phys_res_4")


def cmd_branch(args) -> int:
    params, grid, opts = _setup(args)
    if args.eps_max < 0 or args.steps < 1:
        raise UsageError("--eps-max must be >= 0 and --steps >= 1")
    branch = continue_branch(params, args.eps_max, args.steps, opts, grid=grid)
    out = args.out
    files = []
    rows = {c: [] for c in BRANCH_COLUMNS}
    for k, pt in enumerate(branch.points):
        name = f"point_{k}_scaled.csv"
        write_csv(out / name, _state_columns(pt.state))
        files.append(name)
        diag = None
        if pt.eps > 0:
            phys = reconstruct(pt.state, params)
            diag = diagnostics(phys)
            name = f"point_{k}_physical.csv"
            write_csv(out / name, {"R": phys.grid_phys.r, "Phi1": phys.Phi1.values,
                                   "Phi2": phys.Phi2.values, "A": phys.A.values,
                                   "T": phys.T.values, "V": phys.V.values})
            files.append(name)
        nan = float("nan")
        vals = [k, pt.eps, params.m - pt.eps, pt.residual_norm, pt.newton_iters]
        if diag is None:
            vals += [nan] * 6 + [nan] * 4
        else:
            vals += [diag.adm_mass, diag.adm_spread, diag.norm_integral,
                     4.0 * np.pi * diag.norm_integral, diag.sup_t, diag.min_A,
                     *diag.unscaled_residual_norms]
        for c, v in zip(BRANCH_COLUMNS, vals):
            rows[c].append(v)
    write_csv(out / "branch.csv", rows)
    files.append("branch.csv")
    man = _manifest(args, "branch", grid, opts, files, out, {
        "branch": {"eps_max": args.eps_max, "n_steps": args.steps},
        "truncated": branch.truncated,
        "eps_reached": branch.eps_reached,
        "provenance": {"residual_norms": [p.residual_norm for p in branch.points],
                       "newton_iters": [p.newton_iters for p in branch.points]}})
    write_json(out / "manifest.json", man)
    print(f"branch: {len(branch.points)} points, eps reached {branch.eps_reached:.6g}"
          + (" (truncated)" if branch.truncated else "") + f"; wrote {out}")
    if args.eps_max > 0 and len(branch.points) < 2:
        return EXIT_EMPTY
    return EXIT_OK


def cmd_verify(args) -> int:
    params, grid, opts = _setup(args)
    checks = run_suite(params, grid, opts, seed=args.seed, mutate=args.mutate, quick=args.quick)
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.name:<{width}}  value={c.value:.6g}  threshold={c.threshold:.3g}"
              + (f"  ({c.detail})" if c.detail else ""))
    report = {"params": {"m": args.m, "e": args.e}, "grid": grid.descriptor(),
              "quick": args.quick, "mutate": args.mutate, "seed": args.seed,
              "checks": [c.as_dict() for c in checks],
              "all_passed": all(c.passed for c in checks)}
    write_json(args.out / "verify_report.json", report)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def args_from_manifest(man: dict, out: Path) -> list[str]:
    grid = grid_from_descriptor(man["grid"])
    argv = [man["command"], "--m", repr(man["params"]["m"]), "--e", repr(man["params"]["e"]),
            "--n", str(grid.n), "--rmax", repr(grid.R_max), "--grading", grid.grading,
            "--q", repr(grid.q), "--tol", repr(man["solver"]["tol"]),
            "--max-iters", str(man["solver"]["max_iters"]), "--seed", str(man["seed"]),
            "--out", str(out)]
    if man["command"] == "branch":
        argv += ["--eps-max", repr(man["branch"]["eps_max"]), "--steps", str(man["branch"]["n_steps"])]
    return argv


def cmd_rerun(args) -> int:
    try:
        man = json.loads(args.manifest.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest: {exc}") from exc
    out = args.out or args.manifest.parent.with_name(args.manifest.parent.name + "_rerun")
    code = main(args_from_manifest(man, out) + (["--verbose"] if args.verbose else []))
    if code != EXIT_OK or not args.check:
        return code
    bad = [o["file"] for o in man["outputs"] if sha256(out / o["file"]) != o["sha256"]]
    if bad:
        print("outputs differ from the manifest: " + ", ".join(bad), file=sys.stderr)
        return EXIT_FAIL
    print(f"all {len(man['outputs'])} outputs reproduced bit-identically")
    return EXIT_OK


COMMANDS = {"solve-limit": cmd_solve_limit, "branch": cmd_branch, "verify": cmd_verify,
            "rerun": cmd_rerun}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DomainError as exc:
        print(f"domain error: {exc}",
              file=sys.stderr)
        return EXIT_DOMAIN
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:  # m <= 0 and similar parameter violations
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (SolverError, MetricBreakdownError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
