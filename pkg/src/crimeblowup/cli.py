"""Command-line interface.

    crimeblowup run CONFIG [--output-dir DIR] [--workers K] [--seedless] [--quiet]
    crimeblowup verify-w0 --chi 2 --n 3 --R 1 --M 16 --N 2048 [--tol 1e-6]
    crimeblowup info

Exit status: 0 on success with every check passing, 1 when a check fails or a
verification fails, 2 on configuration errors, 3 when a scenario aborts.
"""

from __future__ import annotations

import argparse
import ast
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import SCENARIOS, ConfigParseError, ConfigValidationError, load_config
from .initial_data import InitialDataParams, UnresolvedCapError, construct_w0, verify_w0
from .grid import make_grid

log = logging.getLogger("crimeblowup")

RNG_MODULES = ("random", "secrets", "numpy.random")


def rng_references(package_dir: Optional[Path] = None) -> list[str]:
    """Locations in the package source that import or touch a random number generator."""
    package_dir = package_dir or Path(__file__).resolve().parent
    hits = []
    for path in sorted(package_dir.glob("*.py")):
        tree = ast.parse(path.read_text(encoding="utf-8"), filename=str(path))
        for node in ast.walk(tree):
            names: list[str] = []
            if isinstance(node, ast.Import):
                names = [a.name for a in node.names]
            elif isinstance(node, ast.ImportFrom) and node.module:
                names = [node.module] + [f"{node.module}.{a.name}" for a in node.names]
            elif isinstance(node, ast.Attribute) and node.attr == "random":
                names = ["<attr>.random"]
            for name in names:
                if name in RNG_MODULES or name.endswith(".random"):
                    hits.append(f"{path.name}:{node.lineno}: {name}")
    return hits


def _cmd_run(args: argparse.Namespace) -> int:
    from .output import emit_results, resolve_output_dir
    from .scenarios import ScenarioError, run_scenario

    if args.seedless:
        hits = rng_references()
        if hits:
            for h in hits:
                log.error("random number generator reference: %s", h)
            return 1
        log.info("seedless: no random number generator referenced")
    try:
        cfg = load_config(args.config)
    except (ConfigParseError, ConfigValidationError) as exc:
        log.error("%s: %s", args.config, exc)
        return 2
    out_dir = resolve_output_dir(args.output_dir, cfg)
    try:
        result = run_scenario(cfg, workers=args.workers)
    except ScenarioError as exc:
        manifest = emit_results(exc.result, cfg, out_dir)
        log.error("%s; partial results in %s", exc, manifest.parent)
        return 3
    manifest = emit_results(result, cfg, out_dir)
    if not args.quiet:
        for c in result.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        print(f"wrote {len(result.rows)} rows to {manifest.parent / 'results.csv'}")
    return 0 if result.passed else 1


def _cmd_verify(args: argparse.Namespace) -> int:
    params = InitialDataParams(args.chi, args.n, args.R, args.M)
    grid = make_grid(args.n, args.R, args.N)
    try:
        w0, consts = construct_w0(grid, params, min_cap_cells=args.min_cap_cells)
    except UnresolvedCapError as exc:
        log.error("%s", exc)
        return 1
    report = verify_w0(w0, params, consts, tol=args.tol)
    if not args.quiet:
        print(f"A = {consts.A!r}  lambda = {consts.lam!r}  mu = {consts.mu!r}")
        print(report.summary())
        print(f"w0(0) = {report.peak!r}  (>= M: {report.peak_meets_M})")
    return 0 if report.passed else 1


def _cmd_info(args: argparse.Namespace) -> int:
    from .output import OUTPUT_DIR_ENV

    print(f"crimeblowup {__version__}")
    print("scenarios: " + ", ".join(SCENARIOS))
    print(f"default output directory: ${OUTPUT_DIR_ENV} or ./results")
    print("config grammar: see crimeblowup.config module docstring or README")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crimeblowup", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--quiet", action="store_true", help="only warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a TOML config")
    p_run.add_argument("config", help="path to the TOML configuration")
    p_run.add_argument("--output-dir", help="output directory (overrides config and environment)")
    p_run.add_argument("--workers", type=int, default=1, help="parallel worker processes (default 1)")
    p_run.add_argument("--seedless", action="store_true", help="fail if any RNG is referenced by the package")
    p_run.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only warnings and errors")
    p_run.set_defaults(func=_cmd_run)

    p_ver = sub.add_parser("verify-w0", help="build the seeding profile and check its six properties")
    p_ver.add_argument("--chi", type=float, default=2.0)
    p_ver.add_argument("--n", type=int, default=3)
    p_ver.add_argument("--R", type=float, default=1.0)
    p_ver.add_argument("--M", type=float, default=16.0)
    p_ver.add_argument("--N", type=int, default=2048)
    p_ver.add_argument("--tol", type=float, default=1e-6)
    p_ver.add_argument("--min-cap-cells", type=int, default=8,
                       help="refuse grids with fewer cells inside the cap (default 8; 0 accepts any grid)")
    p_ver.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="no report output")
    p_ver.set_defaults(func=_cmd_verify)

    p_info = sub.add_parser("info", help="print version and scenario list")
    p_info.set_defaults(func=_cmd_info)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except ValueError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
