import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from exceptions import DomainError, ResourceLimitError
from models import ThermoContext, ZwanzigReference
from settings import Settings

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12
COMMUTATOR_TOLERANCE = 1e-10
GAP_TOLERANCE = 1e-10
EXPONENT_FLOOR = -700.0

RateKey = Tuple[int, int]


@dataclass(frozen=True)
class HamiltonianPair:
    H_i: np.ndarray
    H_j: np.ndarray
    label_i: str = "i"
    label_j: str = "j"

    def __post_init__(self):
        for name, H in (("H_i", self.H_i), ("H_j", self.H_j)):
            if H.ndim != 2 or H.shape[0] != H.shape[1]:
                raise DomainError(f"{name} must be square")
            if not np.allclose(H, H.conj().T, rtol=0.0, atol=HERMITIAN_TOLERANCE):
                raise DomainError(f"{name} is not Hermitian")
        if self.H_i.shape != self.H_j.shape:
            raise DomainError("H_i and H_j must have the same dimension")
        cap = Settings.get().max_dense_dim
        if self.H_i.shape[0] > cap:
            raise ResourceLimitError(f"Hamiltonians limited to dimension {cap}")

    @property
    def delta(self) -> np.ndarray:
        return self.H_j - self.H_i

    def reversed(self) -> "HamiltonianPair":
        return HamiltonianPair(self.H_j, self.H_i, self.label_j, self.label_i)


class RatesService:
    @staticmethod
    def eyring_rate(deltaG: float, ctx: ThermoContext) -> float:
        """(kBT / 2 pi) exp(-deltaG / kBT)"""
        exponent = -deltaG / ctx.kBT
        if -exponent < EXPONENT_FLOOR:
            raise DomainError(
                f"deltaG/kBT = {deltaG / ctx.kBT:.4g} is below {EXPONENT_FLOOR:g}; the rate overflows"
            )
        return ctx.kBT / (2.0 * math.pi) * math.exp(exponent)

    @staticmethod
    def _log_partition(energies: np.ndarray, kBT: float) -> float:
        return float(logsumexp(-np.asarray(energies) / kBT))

    @staticmethod
    def free_energy_difference(pair: HamiltonianPair, ctx: ThermoContext) -> float:
        """-kBT ln(Z_j / Z_i) for any Hermitian pair"""
        e_i = np.linalg.eigvalsh(pair.H_i)
        e_j = np.linalg.eigvalsh(pair.H_j)
        return -ctx.kBT * (RatesService._log_partition(e_j, ctx.kBT) - RatesService._log_partition(e_i, ctx.kBT))

    @staticmethod
    def zwanzig_exact(pair: HamiltonianPair, ctx: ThermoContext) -> float:
        if np.array_equal(pair.H_i, pair.H_j):
            return 0.0
        commutator = pair.H_i @ pair.H_j - pair.H_j @ pair.H_i
        if np.linalg.norm(commutator, 2) > COMMUTATOR_TOLERANCE:
            raise DomainError(
                "H_i and H_j do not commute; use free_energy_difference for the partition-function route"
            )
        # A generic combination shares the common eigenbasis and splits degeneracies
        _, basis = np.linalg.eigh(pair.H_i + math.pi * pair.H_j)
        e_i = np.real(np.einsum("ab,ac,cb->b", basis.conj(), pair.H_i, basis))
        e_j = np.real(np.einsum("ab,ac,cb->b", basis.conj(), pair.H_j, basis))
        log_weights = -e_i / ctx.kBT - logsumexp(-e_i / ctx.kBT)
        result = -ctx.kBT * float(logsumexp(log_weights - (e_j - e_i) / ctx.kBT))
        check = RatesService.free_energy_difference(pair, ctx)
        if abs(result - check) > 1e-9 * max(1.0, abs(check)):
            logger.warning("Zwanzig average %.12g disagrees with partition route %.12g", result, check)
        return result

    @staticmethod
    def _reference_state(pair: HamiltonianPair, ctx: ThermoContext, reference: ZwanzigReference) -> np.ndarray:
        """Density matrix of the reference ensemble of H_i"""
        energies, vecs = np.linalg.eigh(pair.H_i)
        if ZwanzigReference(reference) is ZwanzigReference.GROUNDSTATE:
            if energies.size > 1 and energies[1] - energies[0] < GAP_TOLERANCE:
                raise DomainError(
                    f"ground state of H_{pair.label_i} is degenerate (gap {energies[1] - energies[0]:.3e})"
                )
            ground = vecs[:, 0]
            return np.outer(ground, ground.conj())
        weights = np.exp(-energies / ctx.kBT - logsumexp(-energies / ctx.kBT))
        return (vecs * weights[None, :]) @ vecs.conj().T

    @staticmethod
    def zwanzig_second_order(
        pair: HamiltonianPair,
        ctx: ThermoContext,
        reference: ZwanzigReference = ZwanzigReference.THERMAL,
        split_variances: bool = False,
    ) -> float:
        """<dH> - Var(dH) / (2 kBT) with dH = H_j - H_i in the reference state of H_i.

        split_variances evaluates the expanded form instead, which keeps the
        single-Hamiltonian variances and the cross term separately.
        """
        rho = RatesService._reference_state(pair, ctx, reference)

        def expect(op: np.ndarray) -> complex:
            return np.trace(rho @ op)

        if not split_variances:
            dH = pair.delta
            mean = expect(dH).real
            variance = expect(dH @ dH).real - mean ** 2
            return float(mean - variance / (2.0 * ctx.kBT))

        H_i, H_j = pair.H_i, pair.H_j
        mean_i, mean_j = expect(H_i).real, expect(H_j).real
        cross = expect(H_i @ H_j).real
        if ZwanzigReference(reference) is ZwanzigReference.GROUNDSTATE:
            # E_i is the ground energy and the H_i variance vanishes
            fluctuation = expect(H_j @ H_j).real - mean_j ** 2 - 2.0 * cross
            return float(mean_j - mean_i - fluctuation / (2.0 * ctx.kBT))
        fluctuation = (
            expect(H_i @ H_i).real + expect(H_j @ H_j).real
            - mean_i ** 2 - mean_j ** 2 - 2.0 * cross
        )
        return float(mean_j - mean_i - fluctuation / (2.0 * ctx.kBT))

    @staticmethod
    def rates_from_table(deltaG_table: Dict[RateKey, float], ctx: ThermoContext) -> Dict[RateKey, float]:
        rates = {}
        for key in sorted(deltaG_table):
            try:
                rates[key] = RatesService.eyring_rate(deltaG_table[key], ctx)
            except DomainError as exc:
                raise DomainError(f"entry {key}: {exc}") from exc
        return rates

    @staticmethod
    def random_diagonal_family(dim: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
        """Diagonal H_i and perturbation V; the family is H_j = H_i + lambda V"""
        rng = np.random.default_rng(seed)
        return np.diag(rng.uniform(0.0, 2.0, dim)), np.diag(rng.standard_normal(dim))

    @staticmethod
    def second_order_scan(
        H_i: np.ndarray,
        V: np.ndarray,
        ctx: ThermoContext,
        strengths: List[float],
        reference: ZwanzigReference = ZwanzigReference.THERMAL,
    ) -> pd.DataFrame:
        rows = []
        for lam in strengths:
            pair = HamiltonianPair(H_i, H_i + lam * V)
            exact = RatesService.zwanzig_exact(pair, ctx)
            approx = RatesService.zwanzig_second_order(pair, ctx, reference)
            rows.append({
                "lambda": lam, "exact": exact, "second_order": approx, "abs_error": abs(approx - exact),
            })
        return pd.DataFrame(rows, columns=["lambda", "exact", "second_order", "abs_error"])
