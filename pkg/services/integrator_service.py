import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from exceptions import DomainError, SolverError
from models import SolverConfig
from services.carleman_service import CarlemanService, CarlemanSystem
from services.reaction_network_service import ReactionNetworkService
from services.spatial_service import DiscretizedSystem, SpatialGrid
from settings import Settings

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

REL_ERROR_GUARD = 1e-12


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)
    blowup: bool = False

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise DomainError("times and states must have the same length")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")

    @property
    def final_time(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class ErrorMetrics:
    """Errors of trajectory a against reference b.

    rel is directional: (a - b) / b, NaN where |b| < 1e-12.
    """

    times: np.ndarray
    abs_inf: np.ndarray
    rel: np.ndarray
    rel_mean: np.ndarray
    averaged_rel: np.ndarray
    excluded: np.ndarray


class IntegratorService:
    @staticmethod
    def rk4_step(f: RHS, t: float, y: np.ndarray, h_t: float) -> np.ndarray:
        if h_t <= 0:
            raise DomainError("step size must be positive")
        k1 = f(t, y)
        k2 = f(t + h_t / 2, y + h_t / 2 * k1)
        k3 = f(t + h_t / 2, y + h_t / 2 * k2)
        k4 = f(t + h_t, y + h_t * k3)
        for name, slope in (("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4)):
            if not np.all(np.isfinite(slope)):
                raise SolverError(f"non-finite right-hand side in stage {name} at t={t:.6g}")
        return y + (h_t / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    @staticmethod
    def integrate(f: RHS, y0: np.ndarray, cfg: SolverConfig, meta: Optional[Dict[str, Any]] = None) -> Trajectory:
        """Fixed-step RK4 from t=0, recording t=0, every record_every steps and the final step"""
        cap = cfg.blowup_cap or Settings.get().blowup_cap
        n_steps = cfg.n_steps
        y = np.array(y0, dtype=float)
        times: List[float] = [0.0]
        states: List[np.ndarray] = [y.copy()]
        blowup = False
        for step in range(1, n_steps + 1):
            t_prev = (step - 1) * cfg.dt
            t_next = cfg.step_end(step)
            try:
                y = IntegratorService.rk4_step(f, t_prev, y, t_next - t_prev)
            except SolverError as exc:
                logger.warning("Integration aborted: %s", exc)
                blowup = True
                break
            if not np.all(np.isfinite(y)) or np.max(np.abs(y), initial=0.0) > cap:
                logger.warning("State norm exceeded blow-up cap %.3g at t=%.6g", cap, t_next)
                if np.all(np.isfinite(y)):
                    times.append(t_next)
                    states.append(y.copy())
                blowup = True
                break
            if step % cfg.record_every == 0 or step == n_steps:
                times.append(t_next)
                states.append(y.copy())
        info = {"solver": "rk4", "dt": cfg.dt, "t_final": cfg.t_final, "record_every": cfg.record_every}
        info.update(meta or {})
        return Trajectory(np.array(times), np.array(states), info, blowup)

    @staticmethod
    def cfl_indicator(cfg: SolverConfig, grid: SpatialGrid, D) -> float:
        return cfg.dt * 4.0 * grid.d * grid.n ** 2 * float(np.max(D, initial=0.0))

    @staticmethod
    def nonlinear_rhs(system: DiscretizedSystem) -> RHS:
        S, n_d = system.species, system.grid.n_d
        F1 = system.F1.matrix
        source = system.source_vector()
        nonlinear = [t for j, t in sorted(system.lifted.items()) if j >= 2 and t.base.nnz]

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            out = F1 @ y + source
            if nonlinear:
                species_rows = y.reshape(S, n_d)
                for lifted in nonlinear:
                    local = ReactionNetworkService.evaluate_tensor(lifted.base, species_rows)
                    out += (local * lifted.node_scale[None, :]).ravel()
            return out

        return rhs

    @staticmethod
    def solve_nonlinear(system: DiscretizedSystem, Y0: np.ndarray, cfg: SolverConfig) -> Trajectory:
        Y0 = np.asarray(Y0, dtype=float)
        if Y0.shape != (system.state_dim,):
            raise DomainError(f"initial state must have length {system.state_dim}")
        cfl = IntegratorService.cfl_indicator(cfg, system.grid, system.diffusion)
        if cfl > 1.0:
            logger.warning("CFL indicator %.3g exceeds 1 (dt=%g, n=%d)", cfl, cfg.dt, system.grid.n)
        meta = {"kind": "nonlinear", "species": system.species, "n": system.grid.n, "d": system.grid.d, "cfl": cfl}
        return IntegratorService.integrate(IntegratorService.nonlinear_rhs(system), Y0, cfg, meta)

    @staticmethod
    def solve_linear(system: CarlemanSystem, Z0: np.ndarray, cfg: SolverConfig) -> Trajectory:
        Z0 = np.asarray(Z0, dtype=float)
        if Z0.shape != (system.dim,):
            raise DomainError(f"initial state must have length {system.dim}")
        M, b = system.M, system.b

        def rhs(t: float, z: np.ndarray) -> np.ndarray:
            return M @ z + b

        meta = {"kind": "carleman", "k": system.k, "mode": system.mode.value, "dim": system.dim}
        return IntegratorService.integrate(rhs, Z0, cfg, meta)

    @staticmethod
    def project(trajectory: Trajectory, system: CarlemanSystem) -> Trajectory:
        """Carleman trajectory reduced to its first block"""
        return Trajectory(
            trajectory.times,
            CarlemanService.extract(trajectory.states, system),
            dict(trajectory.meta),
            trajectory.blowup,
        )

    @staticmethod
    def error_metrics(a: Trajectory, b: Trajectory, S: int, n_d: int) -> ErrorMetrics:
        if a.states.shape != b.states.shape:
            raise DomainError(f"trajectory shapes differ: {a.states.shape} vs {b.states.shape}")
        if a.states.shape[1] != S * n_d:
            raise DomainError(f"trajectories must have {S * n_d} components")
        if not np.allclose(a.times, b.times, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(b.times).max()))):
            raise DomainError("trajectories are recorded at different times")

        n_t = len(a.times)
        diff = (a.states - b.states).reshape(n_t, S, n_d)
        reference = b.states.reshape(n_t, S, n_d)
        abs_inf = np.abs(diff).max(axis=2)

        valid = np.abs(reference) >= REL_ERROR_GUARD
        rel = np.full(diff.shape, np.nan)
        np.divide(diff, reference, out=rel, where=valid)
        abs_rel = np.where(valid, np.abs(rel), 0.0)
        counts = valid.sum(axis=2)
        rel_mean = np.divide(
            abs_rel.sum(axis=2), counts, out=np.full(counts.shape, np.nan), where=counts > 0
        )
        total_counts = valid.sum(axis=(0, 2))
        averaged_rel = np.divide(
            abs_rel.sum(axis=(0, 2)), total_counts,
            out=np.full(S, np.nan), where=total_counts > 0,
        )
        excluded = (~valid).sum(axis=(0, 2))
        if excluded.any():
            logger.warning("Relative error excluded %s near-zero reference values per species", excluded.tolist())
        return ErrorMetrics(a.times.copy(), abs_inf, rel, rel_mean, averaged_rel, excluded)

    @staticmethod
    def metrics_frame(metrics: ErrorMetrics) -> pd.DataFrame:
        n_t, S = metrics.abs_inf.shape
        return pd.DataFrame({
            "t": np.repeat(metrics.times, S),
            "species": np.tile(np.arange(1, S + 1), n_t),
            "err_abs_inf": metrics.abs_inf.ravel(),
            "err_rel_mean": metrics.rel_mean.ravel(),
        })

    @staticmethod
    def trajectory_frame(trajectory: Trajectory, S: int, n_d: int) -> pd.DataFrame:
        n_t = len(trajectory.times)
        return pd.DataFrame({
            "t": np.repeat(trajectory.times, S * n_d),
            "species": np.tile(np.repeat(np.arange(1, S + 1), n_d), n_t),
            "node": np.tile(np.arange(n_d), S * n_t),
            "value": trajectory.states.reshape(-1),
        })
