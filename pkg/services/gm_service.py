import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from exceptions import DomainError, ResourceLimitError
from models import (
    CarlemanMode,
    GMParams,
    ReactionNetwork,
    Reaction,
    SolverConfig,
    SweepAxis,
    SweepSpec,
)
from services.carleman_service import CarlemanService
from services.integrator_service import ErrorMetrics, IntegratorService, Trajectory
from services.reaction_network_service import CoefficientTensors, ReactionNetworkService
from services.spatial_service import DiscretizedSystem, SpatialGrid, SpatialService
from settings import Settings

logger = logging.getLogger(__name__)

CONVERGENCE_GRID_NODES = 50
CONVERGENCE_DT = 0.001
CONVERGENCE_T_FINAL = 1.0
CONVERGENCE_K_ORDERS = (2, 3)

# The c1 sweep stops early: without source coupling the k=3 error grows like c1 t^2
COUPLING_SWEEP_SOLVER = SolverConfig(dt=0.001, t_final=0.06, record_every=10)

SWEEP_COLUMNS = [
    "param1", "param2", "k", "species", "mean_rel_err",
    "excluded_nodes", "two_equilibria", "blowup",
]


@dataclass(frozen=True)
class ReactionSystem:
    """Network, node-level coefficient tensors and diffusion coefficients"""

    network: ReactionNetwork
    tensors: CoefficientTensors
    diffusion: np.ndarray
    node_rates: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ComparisonResult:
    direct: Trajectory
    carleman: Dict[int, Trajectory]
    metrics: Dict[int, ErrorMetrics]
    species: int
    n_d: int
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def blowup(self) -> bool:
        return self.direct.blowup or any(t.blowup for t in self.carleman.values())


class GMService:
    @staticmethod
    def gm_network(params: GMParams) -> ReactionSystem:
        """y1' = D1 lap y1 - mu1 y1 + c1 y1^2 y2 + b1,  y2' = D2 lap y2 - mu2 y2 - c1 y1^2 y2 + b2"""
        reactions = []
        if params.c1 > 0:
            # 2 y1 + y2 -> 3 y1
            reactions.append(Reaction(alpha=[2, 1], beta=[3, 0], rate=params.c1))
        network = ReactionNetwork(species=2, reactions=reactions)
        tensors = ReactionNetworkService.build_tensors(
            network, sources=[params.b1, params.b2], decay=[params.mu1, params.mu2]
        )
        return ReactionSystem(network, tensors, np.array([params.D1, params.D2]))

    @staticmethod
    def rescaled_params(mu1: float, b2: float, D1: float, D2: float) -> GMParams:
        return GMParams(D1=D1, D2=D2, mu1=mu1, mu2=1.0, c1=1.0, b1=0.0, b2=b2)

    @staticmethod
    def rescaled_gm(mu1: float, b2: float, D1: float, D2: float) -> ReactionSystem:
        return GMService.gm_network(GMService.rescaled_params(mu1, b2, D1, D2))

    @staticmethod
    def has_two_equilibria(mu1: float, b2: float) -> bool:
        if b2 == 0:
            raise DomainError("has_two_equilibria requires b2 != 0")
        return 0.0 < mu1 / b2 < 2.0

    @staticmethod
    def stable_params() -> GMParams:
        D1 = 1e-4
        return GMParams(D1=D1, D2=D1 / 2, mu1=5.0, mu2=5.0, c1=1.0, b1=1.0, b2=0.0)

    @staticmethod
    def initial_condition(grid: SpatialGrid) -> np.ndarray:
        """[1 + sin(2 pi x), 1 + cos(4 pi x)] on the first coordinate"""
        x = SpatialService.grid_coordinates(grid)[:, 0]
        return np.concatenate([1.0 + np.sin(2.0 * np.pi * x), 1.0 + np.cos(4.0 * np.pi * x)])

    @staticmethod
    def discretize(system: ReactionSystem, grid: SpatialGrid) -> DiscretizedSystem:
        return SpatialService.discretize(system.tensors, system.diffusion, grid, system.node_rates)

    @staticmethod
    def compare(
        system: ReactionSystem,
        grid: SpatialGrid,
        y0: np.ndarray,
        cfg: SolverConfig,
        k_orders: Sequence[int],
        mode: CarlemanMode = CarlemanMode.GROUPED,
        source_coupling: bool = False,
    ) -> ComparisonResult:
        """Direct RK4 solution against Carleman solutions at each truncation order"""
        discretized = GMService.discretize(system, grid)
        direct = IntegratorService.solve_nonlinear(discretized, y0, cfg)
        carleman: Dict[int, Trajectory] = {}
        metrics: Dict[int, ErrorMetrics] = {}
        S, n_d = discretized.species, grid.n_d
        for k in k_orders:
            linear = CarlemanService.assemble(discretized, k, mode, source_coupling)
            z0 = CarlemanService.embed(y0, k, mode, S, n_d)
            projected = IntegratorService.project(IntegratorService.solve_linear(linear, z0, cfg), linear)
            carleman[k] = projected
            if direct.blowup or projected.blowup:
                logger.warning("Skipping metrics for k=%d: trajectory blew up", k)
                continue
            metrics[k] = IntegratorService.error_metrics(projected, direct, S, n_d)
        meta = {"mode": CarlemanMode(mode).value, "k_orders": list(k_orders), "n": grid.n, "d": grid.d}
        return ComparisonResult(direct, carleman, metrics, S, n_d, meta)

    @staticmethod
    def comparison_frame(result: ComparisonResult) -> pd.DataFrame:
        """Long table t, species, k, err_abs_inf"""
        frames = []
        for k in sorted(result.metrics):
            m = result.metrics[k]
            n_t, S = m.abs_inf.shape
            frames.append(pd.DataFrame({
                "t": np.repeat(m.times, S),
                "species": np.tile(np.arange(1, S + 1), n_t),
                "k": k,
                "err_abs_inf": m.abs_inf.ravel(),
            }))
        if not frames:
            return pd.DataFrame(columns=["t", "species", "k", "err_abs_inf"])
        return pd.concat(frames, ignore_index=True)

    @staticmethod
    def fig2_experiment(
        t_final: float = CONVERGENCE_T_FINAL,
        n: int = CONVERGENCE_GRID_NODES,
        record_every: int = 10,
        mode: CarlemanMode = CarlemanMode.GROUPED,
    ) -> Tuple[ComparisonResult, pd.DataFrame, Dict[str, Any]]:
        params = GMService.stable_params()
        grid = SpatialGrid(d=1, n=n)
        cfg = SolverConfig(dt=CONVERGENCE_DT, t_final=t_final, record_every=record_every)
        result = GMService.compare(
            GMService.gm_network(params), grid, GMService.initial_condition(grid), cfg, CONVERGENCE_K_ORDERS, mode
        )
        metadata = {
            "experiment": "stable-convergence",
            "params": params.model_dump(),
            "grid": {"n": n, "d": 1},
            "solver": cfg.model_dump(),
            "k_orders": list(CONVERGENCE_K_ORDERS),
            "mode": CarlemanMode(mode).value,
            "initial_condition": "[1 + sin(2 pi x), 1 + cos(4 pi x)]",
        }
        return result, GMService.comparison_frame(result), metadata

    @staticmethod
    def sweep_preset(panel: str, points: int = 16) -> SweepSpec:
        """Default grids per panel; axis ranges are estimates read off the plotted ranges"""
        def log_axis(name: str, lo: float, hi: float) -> SweepAxis:
            return SweepAxis(name=name, values=np.logspace(lo, hi, points).tolist())

        unit = GMParams(D1=1e-4, D2=5e-5, mu1=1.0, mu2=1.0, c1=1.0, b1=0.0, b2=1.0)
        if panel == "a":
            return SweepSpec(
                model="gm",
                axes=[log_axis("c1", -1.0, 0.0)],
                fixed=GMParams(D1=3e-4, D2=2e-5, mu1=1.0, mu2=1.0, c1=1.0, b1=1.0, b2=1.0),
                solver=COUPLING_SWEEP_SOLVER,
            )
        if panel == "b":
            return SweepSpec(
                model="gm-rescaled", d2_ratio=0.5,
                axes=[log_axis("mu1", -2.0, 2.0), log_axis("D1", -5.0, -3.0)],
                fixed=unit.model_copy(update={"b2": 0.01}),
            )
        if panel == "c":
            return SweepSpec(
                model="gm-rescaled", d2_ratio=0.5,
                axes=[log_axis("b2", -3.0, 1.0), log_axis("D1", -5.0, -3.0)],
                fixed=unit.model_copy(update={"mu1": 50.0}),
            )
        if panel == "d":
            return SweepSpec(
                model="gm-rescaled", d2_ratio=0.5,
                axes=[log_axis("mu1", -2.0, 2.0), log_axis("b2", -3.0, 1.0)],
                fixed=unit,
            )
        raise DomainError(f"unknown sweep panel '{panel}' (expected a, b, c or d)")

    @staticmethod
    def cell_params(spec: SweepSpec, values: Sequence[float]) -> GMParams:
        update = {axis.name: float(v) for axis, v in zip(spec.axes, values)}
        params = spec.fixed.model_copy(update=update)
        if spec.d2_ratio is not None:
            params = params.model_copy(update={"D2": spec.d2_ratio * params.D1})
        if spec.model == "gm-rescaled":
            params = GMService.rescaled_params(params.mu1, params.b2, params.D1, params.D2)
        # model_copy skips validation
        return GMParams.model_validate(params.model_dump())

    @staticmethod
    def _run_cell(spec: SweepSpec, values: Tuple[float, ...]) -> List[Dict[str, Any]]:
        params = GMService.cell_params(spec, values)
        grid = SpatialGrid(d=spec.d, n=spec.n)
        result = GMService.compare(
            GMService.gm_network(params), grid, GMService.initial_condition(grid),
            spec.solver, spec.k_orders, spec.mode, spec.source_coupling,
        )
        two_equilibria = params.b2 != 0 and GMService.has_two_equilibria(params.mu1, params.b2)
        rows = []
        for k in spec.k_orders:
            metrics = result.metrics.get(k)
            for species in range(result.species):
                rows.append({
                    "param1": values[0],
                    "param2": values[1] if len(values) > 1 else math.nan,
                    "k": k,
                    "species": species + 1,
                    "mean_rel_err": float(metrics.averaged_rel[species]) if metrics else math.nan,
                    "excluded_nodes": int(metrics.excluded[species]) if metrics else 0,
                    "two_equilibria": bool(two_equilibria),
                    "blowup": metrics is None,
                })
        return rows

    @staticmethod
    def sweep(spec: SweepSpec, threads: int = 1) -> pd.DataFrame:
        cap = Settings.get().max_sweep_cells
        if spec.n_cells > cap:
            raise ResourceLimitError(f"sweep with {spec.n_cells} cells exceeds the limit of {cap}")
        cells = list(itertools.product(*(axis.values for axis in spec.axes)))
        logger.info("Running %d sweep cells on %d thread(s)", len(cells), threads)

        def run(values):
            return GMService._run_cell(spec, values)

        if threads > 1 and len(cells) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                # map preserves cell order regardless of completion order
                results = list(pool.map(run, cells))
        else:
            results = [run(values) for values in cells]
        rows = [row for cell_rows in results for row in cell_rows]
        return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
