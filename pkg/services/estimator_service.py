import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from exceptions import DomainError
from models import (
    CarlemanMode,
    EncodingInputs,
    LCHSConfig,
    ResourceReport,
    SolverConfig,
    SystemFacts,
)
from services.carleman_service import CarlemanService
from services.integrator_service import IntegratorService, Trajectory
from services.lchs_service import LCHSService
from services.spatial_service import DiscretizedSystem

logger = logging.getLogger(__name__)

# Largest exponent whose exponential still fits a double
EXP_OVERFLOW = 709.0
CLASSICAL_LOG10_LIMIT = 300.0


@dataclass(frozen=True)
class UCQueries:
    alpha_exp: float
    K_taylor: int
    queries: float


@dataclass(frozen=True)
class FEncoding:
    alpha_F: float
    queries_F: float
    error_rescale: float


@dataclass(frozen=True)
class LCHSQueries:
    K: float
    eps1: float
    c_one_norm: float
    queries: float


class EstimatorService:
    """Asymptotic query-count shapes with unit constants and natural logarithms"""

    @staticmethod
    def _log_floor(x: float) -> float:
        if x <= 0:
            raise DomainError("logarithm argument must be positive")
        return max(1.0, math.log(x))

    @staticmethod
    def alpha_deltaG(inputs: EncodingInputs) -> float:
        return inputs.alpha_j_max * (1.0 + inputs.alpha_i / inputs.kBT)

    @staticmethod
    def deltaG_queries(inputs: EncodingInputs) -> float:
        alpha = EstimatorService.alpha_deltaG(inputs)
        return alpha * EstimatorService._log_floor(1.0 / inputs.epsilon) / (inputs.gamma * inputs.delta)

    @staticmethod
    def k_taylor(x: float) -> int:
        """Taylor order ceil(ln x / ln ln x), guarded below e^e where ln ln x is not useful"""
        if x <= math.e:
            return 1
        if x <= math.e ** math.e:
            return 3
        return max(3, math.ceil(math.log(x) / math.log(math.log(x))))

    @staticmethod
    def uc_queries(inputs: EncodingInputs) -> UCQueries:
        alpha = EstimatorService.alpha_deltaG(inputs)
        exponent = alpha / inputs.kBT
        if exponent > EXP_OVERFLOW:
            logger.warning("alpha_exp = exp(%.4g) overflows; reporting inf", exponent)
            alpha_exp = math.inf
        else:
            alpha_exp = math.exp(exponent)
        log_term = EstimatorService._log_floor(1.0 / inputs.epsilon)
        queries = alpha * log_term ** 2 / (inputs.gamma * inputs.delta)
        return UCQueries(
            alpha_exp=alpha_exp,
            K_taylor=EstimatorService.k_taylor(inputs.max_deltaG / inputs.kBT),
            queries=queries,
        )

    @staticmethod
    def f_encoding(inputs: EncodingInputs) -> FEncoding:
        if inputs.stoich_sum <= 0:
            raise DomainError("stoich_sum must be positive")
        alpha = EstimatorService.alpha_deltaG(inputs)
        uc = EstimatorService.uc_queries(inputs)
        queries = 0.0
        if alpha > 0:
            queries = (
                alpha
                * EstimatorService._log_floor(alpha / inputs.kBT)
                * EstimatorService._log_floor(inputs.stoich_sum / inputs.epsilon) ** 2
                / (inputs.gamma * inputs.delta)
            )
        return FEncoding(
            alpha_F=inputs.stoich_sum * uc.alpha_exp,
            queries_F=queries,
            error_rescale=inputs.epsilon / inputs.stoich_sum,
        )

    @staticmethod
    def hamsim_queries(alpha: float, t: float, eps: float) -> float:
        """6 alpha |t| + 9 ln(12 / eps)"""
        if eps <= 0:
            raise DomainError("eps must be positive")
        return 6.0 * alpha * abs(t) + 9.0 * math.log(12.0 / eps)

    @staticmethod
    def lchs_queries(
        alpha_M: float,
        t: float,
        g: float,
        eps: float,
        beta: float,
        c_one_norm: Optional[float] = None,
        lcu_nodes: int = 256,
    ) -> LCHSQueries:
        """g alpha_M t (ln 1/eps)^(1/beta), with the truncation K and the per-term accuracy eps1.

        Without an explicit c_one_norm the kernel coefficients at (beta, K, lcu_nodes) are
        summed; at beta = 1 the kernel is undefined and the normalisation 1 is used.
        """
        if not 0.0 < beta <= 1.0:
            raise DomainError("beta must lie in (0, 1]")
        if g < 1.0:
            raise DomainError(f"dissipation parameter g = {g:.6g} must be at least 1")
        if eps <= 0:
            raise DomainError("eps must be positive")
        K = max(math.log(g / eps), 0.0) ** (1.0 / beta)
        if c_one_norm is None:
            if beta < 1.0 and K > 0:
                cfg = LCHSConfig(beta=beta, K=K, nodes=lcu_nodes, t=t)
                c_one_norm = LCHSService.lcu_coefficients(cfg).one_norm
            else:
                c_one_norm = 1.0
        queries = g * alpha_M * t * max(math.log(1.0 / eps), 0.0) ** (1.0 / beta)
        return LCHSQueries(K=K, eps1=eps / (8.0 * c_one_norm * g), c_one_norm=c_one_norm, queries=queries)

    @staticmethod
    def classical_cost_log10(S: int, varsigma: int, n_d: int) -> float:
        return varsigma * n_d * math.log10(S)

    @staticmethod
    def total_queries(inputs: EncodingInputs, facts: SystemFacts) -> ResourceReport:
        uc = EstimatorService.uc_queries(inputs)
        f = EstimatorService.f_encoding(inputs)
        lchs = EstimatorService.lchs_queries(
            facts.alpha_M, facts.t, facts.g, inputs.epsilon, facts.beta, lcu_nodes=facts.lcu_nodes
        )
        eps_be = inputs.epsilon_be if inputs.epsilon_be is not None else inputs.epsilon
        combined = facts.alpha_M * eps_be + f.alpha_F * inputs.epsilon

        log10_cost = EstimatorService.classical_cost_log10(facts.S, facts.varsigma, facts.n_d)
        classical = 10.0 ** log10_cost if log10_cost < CLASSICAL_LOG10_LIMIT else None

        return ResourceReport(
            alpha_DeltaG=EstimatorService.alpha_deltaG(inputs),
            alpha_exp=uc.alpha_exp,
            alpha_F=f.alpha_F,
            K_taylor=uc.K_taylor,
            queries_DeltaG=EstimatorService.deltaG_queries(inputs),
            queries_UC=uc.queries,
            queries_F=f.queries_F,
            error_rescale=f.error_rescale,
            alpha_M=facts.alpha_M,
            g=facts.g,
            K_lchs=lchs.K,
            eps1=lchs.eps1,
            c_one_norm=lchs.c_one_norm,
            queries_lchs=lchs.queries,
            queries_total=f.queries_F * lchs.queries,
            combined_error=combined,
            classical_cost_log10=log10_cost,
            classical_cost=classical,
            inputs=inputs,
            facts=facts,
        )

    @staticmethod
    def dissipation_parameter(trajectory: Trajectory, b: np.ndarray, t: Optional[float] = None) -> float:
        """(||Z(0)|| + t ||b||) / ||Z(t)|| on the last recorded state"""
        t = trajectory.final_time if t is None else t
        final_norm = float(np.linalg.norm(trajectory.states[-1]))
        if final_norm == 0.0:
            raise DomainError("final Carleman state vanishes; g is undefined")
        return (float(np.linalg.norm(trajectory.states[0])) + t * float(np.linalg.norm(b))) / final_norm

    @staticmethod
    def system_facts(
        system: DiscretizedSystem,
        Y0: np.ndarray,
        k: int,
        cfg: SolverConfig,
        beta: float = 0.8,
        mode: CarlemanMode = CarlemanMode.GROUPED,
        lcu_nodes: int = 256,
        variant: str = "general",
    ) -> SystemFacts:
        """alpha_M from the norm bound and g from a simulated Carleman trajectory"""
        linear = CarlemanService.assemble(system, k, mode)
        Z0 = CarlemanService.embed(Y0, k, mode, system.species, system.grid.n_d)
        trajectory = IntegratorService.solve_linear(linear, Z0, cfg)
        if trajectory.blowup:
            raise DomainError("Carleman trajectory blew up; g cannot be estimated")
        g = EstimatorService.dissipation_parameter(trajectory, linear.b)
        logger.info("Dissipation parameter g=%.6g over t=%.6g", g, trajectory.final_time)
        return SystemFacts(
            alpha_M=CarlemanService.norm_bound(system, k, mode, variant),
            t=trajectory.final_time,
            g=g,
            beta=beta,
            S=system.species,
            varsigma=system.max_order,
            n_d=system.grid.n_d,
            lcu_nodes=lcu_nodes,
        )
