"""Command line entry point: ``railchan simulate`` and ``railchan report``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .pipeline import CaseError, CaseSpec, default_workers, report, run_all, run_case

log = logging.getLogger("railchan")

EXIT_USAGE = 2
EXIT_IO = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="railchan",
                                description="Ray-traced satellite/terrestrial railway channel runs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="trace one case or all eight")
    which = sim.add_mutually_exclusive_group(required=True)
    which.add_argument("--case", help="case id such as BS2TrUE-R or SA2SaUE-S")
    which.add_argument("--all", action="store_true", help="run every case plus SIR reports")
    sim.add_argument("--scene", help="YAML scene/config file layered over the defaults")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=None,
                     help="worker processes (default: $RAILCHAN_WORKERS or 1)")
    sim.add_argument("--cutoff-db", type=float, default=None,
                     help="drop MPCs this far below the strongest (default 60)")
    sim.add_argument("--tile-m2", type=float, default=None,
                     help="scattering tile area in m^2 (default 1)")
    sim.add_argument("--samples", type=int, default=None,
                     help="trajectory samples (default 1441)")

    rep = sub.add_parser("report", help="rebuild statistics and summaries from MPC traces")
    rep.add_argument("--in", dest="in_dir", required=True, help="directory holding *_mpc.csv")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            report(args.in_dir)
            return 0
        workers = args.workers if args.workers is not None else default_workers()
        if workers < 1:
            raise CaseError("--workers must be at least 1")
        case = CaseSpec.parse(args.case) if args.case else None
        cfg = load_config(args.scene, cutoff_db=args.cutoff_db, tile_m2=args.tile_m2,
                          samples=args.samples)
        if case is None:
            run_all(cfg, args.out, workers)
        else:
            run_case(case, cfg, args.out, workers)
    except (CaseError, ConfigError, ValueError) as exc:
        print(f"railchan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"railchan: error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
