import argparse
import logging
import time
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from cli.config_loader import build_grid, build_system, initial_state, load_config, require
from exceptions import BlowUpError, DomainError, EXIT_OK
from models import CarlemanMode, LCHSConfig, RunConfig, SolverConfig, ThermoContext
from services.carleman_service import CarlemanService
from services.estimator_service import EstimatorService
from services.gm_service import GMService
from services.integrator_service import IntegratorService
from services.lchs_service import LCHSService
from services.rates_service import RatesService
from services.spatial_service import SpatialService
from utils.artifacts import CsvArtifact
from utils.linalg import spectral_norm_estimate

logger = logging.getLogger(__name__)

SECOND_ORDER_STRENGTHS = [0.4, 0.2, 0.1, 0.05]


def _config_echo(config: RunConfig, command: str, **extra: Any) -> Dict[str, Any]:
    metadata: Dict[str, Any] = {"command": command, "config": config.model_dump(mode="json")}
    metadata.update(extra)
    return metadata


def _write(path, frame: pd.DataFrame, metadata: Dict[str, Any], started: float) -> Path:
    written = CsvArtifact.write(path, frame, metadata, wall_time=time.perf_counter() - started)
    logger.info("Wrote %d rows to %s", len(frame), written)
    return written


def simulate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    require(config, "network", "grid", "solver")
    grid = build_grid(config.grid)
    system = GMService.discretize(build_system(config.network), grid)
    y0 = initial_state(config, grid, system.species)

    trajectory = IntegratorService.solve_nonlinear(system, y0, config.solver)
    frame = IntegratorService.trajectory_frame(trajectory, system.species, grid.n_d)
    out = args.out or config.output.trajectory
    _write(out, frame, _config_echo(config, "simulate", blowup=trajectory.blowup), started)
    if trajectory.blowup:
        raise BlowUpError(f"direct solution blew up at t={trajectory.final_time:.6g}; partial trajectory in {out}")
    return EXIT_OK


def carleman(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    require(config, "network", "grid")
    k = args.k or max(config.carleman.k)
    mode = CarlemanMode(args.repr or config.carleman.repr)
    grid = build_grid(config.grid)
    system = GMService.discretize(build_system(config.network), grid)

    linear = CarlemanService.assemble(system, k, mode, config.carleman.source_coupling)
    bound = CarlemanService.norm_bound(system, k, mode, source_coupling=config.carleman.source_coupling)
    estimate = spectral_norm_estimate(linear.M)
    print(f"Carleman system: mode={mode.value} k={k} dim={linear.dim} nnz={linear.M.nnz}")
    print(f"  ||M|| power iteration = {estimate:.6g}, bound = {bound:.6g}")

    if args.dump_pattern:
        frame = pd.DataFrame(
            CarlemanService.block_pattern(linear), columns=["block_row", "block_col", "nnz"]
        )
        _write(
            args.dump_pattern, frame,
            _config_echo(config, "carleman", k=k, repr=mode.value, dim=linear.dim),
            started,
        )
    return EXIT_OK


def compare(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    require(config, "network", "grid", "solver")
    grid = build_grid(config.grid)
    system = build_system(config.network)
    species = system.tensors.species
    y0 = initial_state(config, grid, species)
    mode = CarlemanMode(args.repr or config.carleman.repr)

    result = GMService.compare(
        system, grid, y0, config.solver, config.carleman.k, mode, config.carleman.source_coupling
    )
    metadata = _config_echo(config, "compare", blowup=result.blowup)
    _write(args.out or config.output.errors, GMService.comparison_frame(result), metadata, started)

    frames = []
    for k in sorted(result.metrics):
        frame = IntegratorService.metrics_frame(result.metrics[k])
        frame.insert(2, "k", k)
        frames.append(frame)
    metrics = (
        pd.concat(frames, ignore_index=True) if frames
        else pd.DataFrame(columns=["t", "species", "k", "err_abs_inf", "err_rel_mean"])
    )
    _write(args.metrics_out or config.output.metrics, metrics, metadata, started)

    if result.blowup:
        raise BlowUpError("at least one trajectory blew up; metrics were written for the remaining orders")
    return EXIT_OK


def sweep(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if args.panel:
        spec = GMService.sweep_preset(args.panel, args.points)
        out = args.out or f"sweep_{args.panel}.csv"
        metadata: Dict[str, Any] = {"command": "sweep", "panel": args.panel, "sweep": spec.model_dump(mode="json")}
    else:
        if not args.config:
            raise DomainError("sweep needs --config or --panel")
        config = load_config(args.config)
        require(config, "sweep")
        spec = config.sweep
        out = args.out or config.output.sweep
        metadata = _config_echo(config, "sweep")
    metadata["axes"] = [axis.name for axis in spec.axes]

    frame = GMService.sweep(spec, threads=args.threads)
    blown = int(frame["blowup"].sum())
    if blown:
        logger.warning("%d sweep rows blew up and carry NaN errors", blown)
    _write(out, frame, metadata, started)
    return EXIT_OK


def lchs_verify(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = LCHSConfig(beta=args.beta, K=args.K, nodes=args.nodes, t=args.t)
    A = LCHSService.random_dissipative_matrix(args.dim, args.seed)
    p = cfg.panel_points
    counts = sorted({max(p, cfg.nodes // (4 * p) * p), max(p, cfg.nodes // (2 * p) * p), cfg.nodes})
    table = LCHSService.convergence_table(A, cfg, counts)
    for row in table.itertuples(index=False):
        print(f"K={row.K:g} nodes={row.nodes} error_fro={row.error_fro:.3e}")
    metadata = {"command": "lchs-verify", "lchs": cfg.model_dump(), "dim": args.dim, "seed": args.seed}
    _write(args.out, table, metadata, started)
    return EXIT_OK


def rates(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    ctx = ThermoContext(kBT=args.kbt)
    if not Path(args.deltaG).is_file():
        raise DomainError(f"deltaG table {args.deltaG} does not exist")
    table = pd.read_csv(args.deltaG, comment="#")
    missing = {"i", "j", "deltaG"} - set(table.columns)
    if missing:
        raise DomainError(f"{args.deltaG}: missing column(s) {', '.join(sorted(missing))}")
    deltaG = {(int(r.i), int(r.j)): float(r.deltaG) for r in table.itertuples(index=False)}
    computed = RatesService.rates_from_table(deltaG, ctx)
    frame = pd.DataFrame(
        [{"i": i, "j": j, "rate": rate} for (i, j), rate in computed.items()], columns=["i", "j", "rate"]
    )
    metadata = {"command": "rates", "kBT": ctx.kBT, "deltaG": {f"{i},{j}": v for (i, j), v in sorted(deltaG.items())}}
    _write(args.out, frame, metadata, started)

    if args.second_order:
        H_i, V = RatesService.random_diagonal_family(args.dim, args.seed)
        scan = RatesService.second_order_scan(H_i, V, ctx, SECOND_ORDER_STRENGTHS)
        scan_meta = {"command": "rates --second-order", "kBT": ctx.kBT, "dim": args.dim, "seed": args.seed}
        _write(args.scan_out, scan, scan_meta, started)
    return EXIT_OK


def estimate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    require(config, "network", "grid", "solver")
    if not config.scenarios:
        raise DomainError("estimate needs at least one [[scenarios]] entry")
    grid = build_grid(config.grid)
    system = GMService.discretize(build_system(config.network), grid)
    y0 = initial_state(config, grid, system.species)
    mode = CarlemanMode(config.carleman.repr)

    facts_cache = {}
    rows = []
    for scenario in config.scenarios:
        solver = config.solver
        if scenario.t is not None:
            solver = SolverConfig.model_validate(solver.model_dump() | {"t_final": scenario.t})
        key = (scenario.k, solver.t_final)
        if key not in facts_cache:
            facts_cache[key] = EstimatorService.system_facts(system, y0, scenario.k, solver, mode=mode)
        facts = facts_cache[key].model_copy(update={"beta": scenario.beta, "lcu_nodes": scenario.lcu_nodes})
        report = EstimatorService.total_queries(scenario.inputs, facts)
        rows.append({"scenario": scenario.name} | report.flat())
        logger.info("Scenario %s: queries_total=%.4g", scenario.name, report.queries_total)

    _write(args.out or config.output.report, pd.DataFrame(rows), _config_echo(config, "estimate"), started)
    return EXIT_OK


def laplacian(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    operator = SpatialService.laplacian_nd(args.n, args.d)
    print(f"Laplacian n={args.n} d={args.d}: dim={operator.dim} nnz={operator.matrix.nnz}")
    if args.norm:
        norm = SpatialService.laplacian_norm_exact(args.n, args.d)
        if not norm.bound_tight:
            logger.warning("Bound 4dn^2 = %.6g is not attained for odd n; exact norm is %.6g", norm.bound, norm.norm)
        print(f"  ||Delta|| = {norm.norm:.12g} (bound {norm.bound:.12g}, tight={norm.bound_tight})")
    if args.spectrum:
        indices, eigenvalues = SpatialService.laplacian_eigenvalues(args.n, args.d)
        frame = pd.DataFrame(indices, columns=[f"k_{axis + 1}" for axis in range(args.d)])
        frame["eigenvalue"] = eigenvalues
        _write(args.spectrum, frame, {"command": "laplacian", "n": args.n, "d": args.d}, started)
    return EXIT_OK
