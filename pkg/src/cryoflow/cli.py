"""Command line entry point: ``cryoflow run | validate | oracle``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import dump_config, parse_config
from .errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO_FAILED = 3
EXIT_IO = 4


def _cmd_run(args) -> int:
    from .ensemble import run_ensemble
    from .output import check_writable

    bundle = parse_config(args.config)
    try:
        out = check_writable(args.out)
    except OSError as exc:
        print(f"error: output directory {args.out} is not writable: {exc}", file=sys.stderr)
        return EXIT_IO
    workers = args.workers if args.workers is not None else bundle.options.workers
    if workers < 1:
        raise ConfigError("--workers must be >= 1")
    (out / "config_normalized.txt").write_text(dump_config(bundle))
    outcomes = run_ensemble(bundle.scenarios, bundle.forcing, out, workers=workers, plots=bundle.options.plots)
    failed = [o for o in outcomes if not o.ok]
    for o in outcomes:
        print(f"{o.name}: {'ok' if o.ok else 'FAILED: ' + o.message}")
    return EXIT_SCENARIO_FAILED if failed else EXIT_OK


def _cmd_validate(args) -> int:
    bundle = parse_config(args.config)
    for s in bundle.scenarios:
        print(f"{s.name}: aspect={s.aspect} layers={len(s.profile.layers)} n_cells={s.mesh.n_cells}")
    print(f"{len(bundle.scenarios)} scenario(s) valid")
    if args.dump:
        print(dump_config(bundle), end="")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    from . import oracles

    if args.oracle == "stefan":
        problem = oracles.StefanProblem(args.ts, args.kappa, args.st)
        print(f"lambda = {problem.lam:.17g}")
        for t in args.t:
            print(f"t = {t:.17g} s  front = {oracles.stefan_front(problem, t):.17g} m")
    elif args.oracle == "erfc":
        for z in args.z:
            print(f"z = {z:.17g} m  T = {oracles.erfc_profile(args.ts, args.kappa, z, args.t):.17g} degC")
    elif args.oracle == "hydrostatic":
        for z in args.z:
            print(f"z = {z:.17g} m  h = {oracles.hydrostatic_head(args.h0, z):.17g} m")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cryoflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every scenario of a configuration")
    run.add_argument("--config", required=True, help="configuration file")
    run.add_argument("--out", required=True, help="output directory (created if missing)")
    run.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    run.add_argument(
        "--seedless-deterministic",
        action="store_true",
        default=True,
        help="accepted for explicitness; runs never use random numbers",
    )
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="parse and check a configuration without running it")
    val.add_argument("--config", required=True)
    val.add_argument("--dump", action="store_true", help="print the normalized configuration")
    val.set_defaults(func=_cmd_validate)

    orc = sub.add_parser("oracle", help="print analytical reference values")
    osub = orc.add_subparsers(dest="oracle", required=True)
    st = osub.add_parser("stefan", help="one-phase Stefan front")
    st.add_argument("--st", type=float, required=True, help="Stefan number")
    st.add_argument("--kappa", type=float, default=1e-6, help="frozen diffusivity (m2/s)")
    st.add_argument("--ts", type=float, default=-10.0, help="surface temperature (degC)")
    st.add_argument("--t", type=float, nargs="*", default=[86400.0], help="times (s)")
    er = osub.add_parser("erfc", help="conduction after a surface temperature step")
    er.add_argument("--ts", type=float, required=True)
    er.add_argument("--kappa", type=float, required=True)
    er.add_argument("--t", type=float, required=True)
    er.add_argument("--z", type=float, nargs="+", required=True)
    hy = osub.add_parser("hydrostatic", help="pressure head at rest")
    hy.add_argument("--h0", type=float, required=True, help="pressure head at z = 0 (m)")
    hy.add_argument("--z", type=float, nargs="+", required=True)
    orc.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if args.command == "oracle":
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
