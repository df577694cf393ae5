"""Command line front end: ``segretool <subcommand> [options]``.

Exit codes: 0 on success, 1 when a numerical check fails, 2 on usage errors.
"""
import argparse
import cmath
import logging
import sys
from typing import Sequence

from segretool import catalog, hypersurface, monodromy
from segretool.config import DEFAULT_SEED, RunConfig, with_overrides
from segretool.continuation import ContinuationPath, MapGerm, continue_along_path, q_segre_check
from segretool.errors import ConfigurationError, SegreToolError
from segretool.file_io import csvio, jsonio, paths
from segretool.hypersurface import Hypersurface
from segretool.segresets import find_chain, sample_segre_set
from segretool.util import parse_point


def _parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed of the random generator.")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="Override a tolerance.")
    common.add_argument("--output", help="Write the result to this file instead of stdout.")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--verbose", action="store_true", help="Log debug messages.")
    common.add_argument("--quiet", action="store_true", help="Log errors only.")

    surface = argparse.ArgumentParser(add_help=False)
    source = surface.add_mutually_exclusive_group()
    source.add_argument("--surface", help="Surface JSON file.")
    source.add_argument("--catalog", help="Catalog entry, e.g. mlog, malpha(0.5), km(2), ex62, quadric(1,0).")

    germ = argparse.ArgumentParser(add_help=False)
    germ.add_argument("--germ", help="Germ JSON file; defaults to the catalog entry's germ.")
    germ.add_argument("--mode", choices=("tracking", "segre"), help="Continuation mode.")

    parser = argparse.ArgumentParser(
        prog="segretool",
        description="Segre varieties, continuation and monodromy of nonminimal hypersurfaces.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    levi = subparsers.add_parser("levi", parents=[common, surface], help="Levi form signature at a point.")
    levi.add_argument("--point", required=True)

    segre = subparsers.add_parser("segre", parents=[common, surface], help="Segre variety graph and Segre map rank.")
    segre.add_argument("--point", required=True)
    segre.add_argument("--count", type=int, default=8)

    cloud = subparsers.add_parser("cloud", parents=[common, surface], help="Sample iterated Segre sets.")
    cloud.add_argument("--point", required=True)
    cloud.add_argument("--depth", type=int, default=2)
    cloud.add_argument("--count", type=int, default=100)
    cloud.add_argument("--csv", action="store_true", help="Same as --format csv.")

    chain = subparsers.add_parser("chain", parents=[common, surface], help="Find a Segre chain.")
    chain.add_argument("--point", required=True)
    chain.add_argument("--target", required=True)
    chain.add_argument("--max-depth", type=int, default=4)
    chain.add_argument("--csv", action="store_true", help="Same as --format csv.")

    cont = subparsers.add_parser("continue", parents=[common, surface, germ], help="Continue a germ along a path.")
    target = cont.add_mutually_exclusive_group(required=True)
    target.add_argument("--target", help="End point of a straight path from the germ's base.")
    target.add_argument("--path", help="Path JSON file.")

    mono = subparsers.add_parser("monodromy", parents=[common, surface, germ], help="Monodromy around X.")
    mono.add_argument("--loop-turns", type=int, default=1)

    transfer = subparsers.add_parser("transfer", parents=[common, surface, germ], help="Image quadrics of both sides.")
    transfer.add_argument("--single-valued", action="store_true")

    kroot = subparsers.add_parser("kroot", parents=[common, surface], help="The k-root surface.")
    kroot.add_argument("--k", type=int, required=True)

    verify = subparsers.add_parser("verify", parents=[common, surface], help="Run the catalog checks.")
    verify.add_argument("--all", action="store_true", help="Verify every catalog entry.")
    verify.add_argument("--mode", choices=("tracking", "segre"))

    listing = subparsers.add_parser("catalog", parents=[common], help="List catalog entries or export one.")
    listing.add_argument("--export", metavar="NAME")

    return parser.parse_args(argv)


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", force=True)


def _tolerance_overrides(items: Sequence[str]) -> dict[str, str]:
    overrides = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--tol expects NAME=VALUE, got {item!r}")
        overrides[name.strip()] = value.strip()
    return overrides


def _surface(args: argparse.Namespace) -> Hypersurface:
    if getattr(args, "surface", None):
        return jsonio.read_surface(jsonio.load(paths.get_abs_path(args.surface)))
    if getattr(args, "catalog", None):
        return catalog.get(args.catalog).surface
    raise ConfigurationError("Give a surface with --surface FILE or --catalog NAME")


def _germ(args: argparse.Namespace, M: Hypersurface) -> MapGerm:
    if args.germ:
        return jsonio.read_germ(jsonio.load(paths.get_abs_path(args.germ)), M.n)
    if args.catalog:
        return catalog.get(args.catalog).germs[0].build()
    raise ConfigurationError("Give a germ with --germ FILE (or use a --catalog entry)")


def _loop(germ: MapGerm, turns: int) -> ContinuationPath:
    w0 = complex(germ.base[-1])
    return ContinuationPath.loop(germ.base[:-1], abs(w0), turns, cmath.phase(w0))


# ----- subcommands -----

def _levi(args, config: RunConfig):
    M = _surface(args)
    P = parse_point(args.point, M.n)
    eigenvalues = hypersurface.levi_form(M, P, config.tolerances)
    signature = hypersurface.levi_signature(M, P, config.tolerances)
    return {"surface": M.name, "point": P, "eigenvalues": eigenvalues, "signature": list(signature)}


def _segre(args, config: RunConfig):
    M = _surface(args)
    zeta = parse_point(args.point, M.n)
    variety = hypersurface.segre_variety(M, zeta, config.tolerances)
    payload = {"surface": M.name, "base": zeta, "degenerate": variety.degenerate}
    if not variety.degenerate:
        payload["rank"] = hypersurface.segre_map_rank(M, zeta, tol=config.tolerances)
        zs = hypersurface.random_domain_points(M, args.count, config.rng())[:, :-1]
        payload["graph"] = [variety.point(z) for z in zs]
    return payload


def _cloud(args, config: RunConfig):
    M = _surface(args)
    cloud = sample_segre_set(M, parse_point(args.point, M.n), args.depth, args.count, config.rng(), config.tolerances)
    if config.format == "csv":
        return csvio.cloud_rows(cloud)
    return jsonio.cloud_payload(cloud)


def _chain(args, config: RunConfig):
    M = _surface(args)
    chain = find_chain(M, parse_point(args.point, M.n), parse_point(args.target, M.n), config.rng(),
                       max_depth=args.max_depth, tol=config.tolerances)
    if config.format == "csv":
        return csvio.chain_rows(chain)
    return jsonio.chain_payload(chain)


def _continue(args, config: RunConfig):
    M = _surface(args)
    germ = _germ(args, M)
    if args.path:
        path = jsonio.read_path(jsonio.load(paths.get_abs_path(args.path)), M.n)
    else:
        path = ContinuationPath.through([germ.base, parse_point(args.target, M.n)])
    result = continue_along_path(M, germ, path, args.mode, config.tolerances)
    residual, passed = q_segre_check(M, result, config.rng(), tol=config.tolerances)
    payload = {
        "base": result.base,
        "radius": result.radius,
        "branch_log": result.branch_log,
        "value": result(result.base),
        "q_segre": {"residual": residual, "passed": passed},
    }
    if result.is_closed_form:
        payload["germ"] = jsonio.germ_payload(result)
    payload["passed"] = passed
    return payload


def _monodromy(args, config: RunConfig):
    M = _surface(args)
    germ = _germ(args, M)
    result = monodromy.compute_monodromy(M, germ, _loop(germ, args.loop_turns), args.mode, config.tolerances)
    deviation, A = monodromy.verify_monodromy_formula(result, tol=config.tolerances)
    payload = jsonio.monodromy_payload(result)
    payload["surface"] = M.name
    payload["formula"] = {"deviation": deviation, "A": A}
    payload["passed"] = deviation <= config.tolerances.step_consistency
    return payload


def _transfer(args, config: RunConfig):
    M = _surface(args)
    germ = _germ(args, M)
    transfer = monodromy.sphericity_transfer(M, germ, config.rng(), args.single_valued, mode=args.mode,
                                             tol=config.tolerances)
    payload = jsonio.transfer_payload(transfer)
    payload["surface"] = M.name
    tol = config.tolerances
    payload["passed"] = max(transfer.plus_residual, transfer.minus_residual) <= tol.quadric_fit and (
        not args.single_valued or transfer.distance <= tol.glue)
    return payload


def _kroot(args, config: RunConfig):
    M = _surface(args)
    return jsonio.surface_payload(hypersurface.k_root(M, args.k, config.rng(), tol=config.tolerances))


def _verify(args, config: RunConfig):
    if getattr(args, "surface", None):
        raise ConfigurationError("verify checks catalog entries; --surface files carry no expected values")
    if args.all:
        names = [entry.name for entry in catalog.list_entries()]
    elif args.catalog:
        names = [args.catalog]
    else:
        raise ConfigurationError("verify needs --catalog NAME or --all")
    reports = [catalog.verify(name, config.rng(), args.mode, config.tolerances) for name in names]
    payload = {"reports": [report.as_dict() for report in reports], "passed": all(r.passed for r in reports)}
    if not payload["passed"]:
        failed = [r.name for r in reports if not r.passed]
        logging.error(f"VERIFY: failed entries: {', '.join(failed)}")
    return payload


def _catalog(args, config: RunConfig):
    if args.export:
        return catalog.export(args.export)
    return {"entries": [entry.name for entry in catalog.list_entries()], "families": list(catalog.NAMES)}


_COMMANDS = {
    "levi": _levi,
    "segre": _segre,
    "cloud": _cloud,
    "chain": _chain,
    "continue": _continue,
    "monodromy": _monodromy,
    "transfer": _transfer,
    "kroot": _kroot,
    "verify": _verify,
    "catalog": _catalog,
}


def _emit(result, config: RunConfig) -> bool:
    is_table = isinstance(result, tuple)
    if config.output is None:
        sys.stdout.write(csvio.dumps(*result) if is_table else jsonio.dumps(result))
        return True
    filepath = paths.with_format_suffix(config.output, config.format)
    success, message = csvio.export_csv(filepath, *result) if is_table else jsonio.export_json(filepath, result)
    if success:
        logging.info(message)
    else:
        logging.error(message)
    return success


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parse_args(argv)
    except SystemExit as error:
        return 2 if error.code else 0
    _configure_logging(args)
    try:
        fmt = "csv" if getattr(args, "csv", False) else args.format
        if fmt == "csv" and args.command not in ("cloud", "chain"):
            raise ConfigurationError(f"--format csv is only available for cloud and chain, not {args.command}")
        config = RunConfig.from_environment(
            seed=args.seed,
            tolerances=with_overrides(RunConfig().tolerances, _tolerance_overrides(args.tol)),
            output=paths.get_abs_path(args.output) if args.output else None,
            format=fmt,
        )
        result = _COMMANDS[args.command](args, config)
        if not _emit(result, config):
            return 2
    except ConfigurationError as error:
        logging.error(str(error))
        return 2
    except SegreToolError as error:
        logging.error(str(error))
        return 1
    if isinstance(result, dict) and result.get("passed") is False:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
