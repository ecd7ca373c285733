import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from cli import commands
from cli.config_loader import format_validation_error
from exceptions import (
    BlowUpError,
    DomainError,
    EXIT_BLOWUP,
    EXIT_INVALID,
    EXIT_RESOURCE,
    ResourceLimitError,
    SolverError,
)
from models import CarlemanMode
from settings import Settings

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    settings = Settings.get()
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Carleman linearization toolkit for reaction-diffusion systems",
    )
    parser.add_argument("--threads", type=int, default=settings.threads, help="Worker threads for sweeps")
    parser.add_argument(
        "--log-level", type=str.upper, default=settings.log_level.upper(),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Direct RK4 solution of the discretized system")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="Trajectory CSV (defaults to [output].trajectory)")
    p.set_defaults(handler=commands.simulate)

    p = sub.add_parser("carleman", help="Assemble a truncated Carleman system")
    p.add_argument("--config", required=True)
    p.add_argument("-k", type=int, help="Truncation order (defaults to the largest in [carleman].k)")
    p.add_argument("--repr", choices=[m.value for m in CarlemanMode])
    p.add_argument("--dump-pattern", help="Write block_row,block_col,nnz to this CSV")
    p.set_defaults(handler=commands.carleman)

    p = sub.add_parser("compare", help="Carleman solutions against the direct solution")
    p.add_argument("--config", required=True)
    p.add_argument("--repr", choices=[m.value for m in CarlemanMode])
    p.add_argument("--out", help="Error CSV (defaults to [output].errors)")
    p.add_argument("--metrics-out", help="Metrics CSV (defaults to [output].metrics)")
    p.set_defaults(handler=commands.compare)

    p = sub.add_parser("sweep", help="Parameter sweep of the averaged relative error")
    p.add_argument("--config")
    p.add_argument("--panel", choices=["a", "b", "c", "d"], help="Use a preset grid instead of --config")
    p.add_argument("--points", type=int, default=16, help="Points per preset axis")
    p.add_argument("--out")
    p.set_defaults(handler=commands.sweep)

    p = sub.add_parser("lchs-verify", help="LCHS reconstruction against the matrix exponential")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--beta", type=float, default=0.8)
    p.add_argument("--K", type=float, default=80.0)
    p.add_argument("--nodes", type=int, default=1280)
    p.add_argument("-t", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="lchs.csv")
    p.set_defaults(handler=commands.lchs_verify)

    p = sub.add_parser("rates", help="Eyring rates from a deltaG table")
    p.add_argument("--deltaG", required=True, help="CSV with columns i,j,deltaG")
    p.add_argument("--kbt", type=float, required=True)
    p.add_argument("--second-order", action="store_true", help="Also scan the second-order Zwanzig error")
    p.add_argument("--dim", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="rates.csv")
    p.add_argument("--scan-out", default="zwanzig.csv")
    p.set_defaults(handler=commands.rates)

    p = sub.add_parser("estimate", help="Query-count report per scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="Report CSV (defaults to [output].report)")
    p.set_defaults(handler=commands.estimate)

    p = sub.add_parser("laplacian", help="Periodic Laplacian norm and spectrum")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--norm", action="store_true")
    p.add_argument("--spectrum", help="Write k_1..k_d,eigenvalue to this CSV")
    p.set_defaults(handler=commands.laplacian)

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    logger.info("Running %s", args.command)
    try:
        status = args.handler(args)
    except ValidationError as e:
        print(format_validation_error(e), file=sys.stderr)
        return EXIT_INVALID
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (BlowUpError, SolverError) as e:
        print(f"blow-up: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except ResourceLimitError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    logger.info("Finished %s", args.command)
    return status


if __name__ == "__main__":
    raise SystemExit(run())
