import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from exceptions import DomainError
from models import Reaction, ReactionNetwork

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoefficientTensor:
    """Sparse S x S^order coefficient matrix F_order in coordinate form.

    Indices are 0-based and sorted row-major. ``max_rate`` and ``sigma_max``
    carry the reaction provenance used by the stoichiometric norm bound; they
    are zero for tensors that do not come from reactions alone.
    """

    order: int
    species: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    max_rate: float = 0.0
    sigma_max: float = 0.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.species, self.species ** self.order

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def to_sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.rows, self.cols)), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def scaled(self, factor: float) -> "CoefficientTensor":
        return CoefficientTensor(
            order=self.order,
            species=self.species,
            rows=self.rows,
            cols=self.cols,
            values=self.values * factor,
            max_rate=self.max_rate * abs(factor),
            sigma_max=self.sigma_max,
        )

    @classmethod
    def zeros(cls, species: int, order: int) -> "CoefficientTensor":
        empty_int = np.zeros(0, dtype=np.int64)
        return cls(order, species, empty_int, empty_int.copy(), np.zeros(0))

    @classmethod
    def from_entries(
        cls,
        species: int,
        order: int,
        entries: Dict[Tuple[int, int], float],
        max_rate: float = 0.0,
        sigma_max: float = 0.0,
    ) -> "CoefficientTensor":
        kept = sorted((key, value) for key, value in entries.items() if value != 0.0)
        rows = np.array([key[0] for key, _ in kept], dtype=np.int64)
        cols = np.array([key[1] for key, _ in kept], dtype=np.int64)
        values = np.array([value for _, value in kept], dtype=float)
        return cls(order, species, rows, cols, values, max_rate, sigma_max)


@dataclass(frozen=True)
class CoefficientTensors:
    """F_0 .. F_varsigma of the polynomial right-hand side at a single node"""

    species: int
    tensors: Tuple[CoefficientTensor, ...] = field(default_factory=tuple)

    @property
    def max_order(self) -> int:
        return len(self.tensors) - 1

    def __getitem__(self, order: int) -> CoefficientTensor:
        if 0 <= order < len(self.tensors):
            return self.tensors[order]
        return CoefficientTensor.zeros(self.species, order)

    def nonlinear(self) -> Iterable[CoefficientTensor]:
        return (tensor for tensor in self.tensors[2:] if tensor.nnz)


@dataclass(frozen=True)
class TensorNorms:
    inf_norm: float
    one_norm: float
    two_norm: float
    two_bound: float


class ReactionNetworkService:
    @staticmethod
    def lex_index(indices: Sequence[int], S: int) -> int:
        """1-based lexicographic position of a species tuple in the k-th tensor power"""
        if S < 1:
            raise DomainError("S must be positive")
        position = 1
        for entry in indices:
            if not 1 <= entry <= S:
                raise DomainError(f"tuple entry {entry} outside 1..{S}")
            position = (position - 1) * S + entry
        # position accumulates 1 + sum (i_j - 1) S^(k-j) in Horner form
        return position

    @staticmethod
    def lex_tuple(position: int, S: int, k: int) -> Tuple[int, ...]:
        if not 1 <= position <= S ** k:
            raise DomainError(f"position {position} outside 1..{S ** k}")
        digits = np.unravel_index(position - 1, (S,) * k) if k else ()
        return tuple(int(d) + 1 for d in digits)

    @staticmethod
    def canonical_position(i: int, j: int, S: int, varsigma: int) -> int:
        """Position of the monomial y_i^(varsigma-1) y_j written as (i, ..., i, j)"""
        if S < 2:
            raise DomainError("canonical_position requires S >= 2")
        if varsigma < 1:
            raise DomainError("varsigma must be at least 1")
        if not (1 <= i <= S and 1 <= j <= S):
            raise DomainError(f"species indices must lie in 1..{S}")
        return j + (i - 1) * S * (S ** (varsigma - 1) - 1) // (S - 1)

    @staticmethod
    def reactant_position(reaction: Reaction, S: int) -> int:
        return ReactionNetworkService.lex_index(reaction.reactant_tuple(), S)

    @staticmethod
    def build_tensor(network: ReactionNetwork, order: int) -> CoefficientTensor:
        if order < 1:
            raise DomainError("build_tensor requires order >= 1")
        S = network.species
        entries: Dict[Tuple[int, int], float] = {}
        row_changes = np.zeros(S)
        max_rate = 0.0
        for reaction in network.reactions:
            if reaction.order != order:
                continue
            col = ReactionNetworkService.reactant_position(reaction, S) - 1
            changes = np.asarray(reaction.beta) - np.asarray(reaction.alpha)
            row_changes += np.abs(changes)
            max_rate = max(max_rate, reaction.rate)
            for row in np.flatnonzero(changes):
                key = (int(row), col)
                entries[key] = entries.get(key, 0.0) + float(changes[row]) * reaction.rate
        return CoefficientTensor.from_entries(
            S, order, entries, max_rate=max_rate, sigma_max=float(row_changes.max(initial=0.0))
        )

    @staticmethod
    def build_tensors(
        network: ReactionNetwork,
        sources: Optional[Sequence[float]] = None,
        decay: Optional[Sequence[float]] = None,
    ) -> CoefficientTensors:
        """F_0 from sources, F_1 from first-order reactions minus diag(decay), then F_2.."""
        S = network.species
        for name, values in (("sources", sources), ("decay", decay)):
            if values is not None and len(values) != S:
                raise DomainError(f"{name} must have length {S}")

        f0 = CoefficientTensor.from_entries(
            S, 0, {(i, 0): float(v) for i, v in enumerate(sources or [])}
        )
        f1 = ReactionNetworkService.build_tensor(network, 1)
        if decay is not None and any(decay):
            entries = {(int(r), int(c)): float(v) for r, c, v in zip(f1.rows, f1.cols, f1.values)}
            for i, mu in enumerate(decay):
                entries[(i, i)] = entries.get((i, i), 0.0) - float(mu)
            # decay terms are not rate-bounded, so drop the reaction provenance
            f1 = CoefficientTensor.from_entries(S, 1, entries)

        top = max(network.max_order, 1)
        higher = [ReactionNetworkService.build_tensor(network, j) for j in range(2, top + 1)]
        return CoefficientTensors(S, tuple([f0, f1] + higher))

    @staticmethod
    def tensor_power(Y: np.ndarray, j: int) -> np.ndarray:
        if j < 0:
            raise DomainError("tensor power must be non-negative")
        Y = np.asarray(Y, dtype=float)
        return reduce(np.kron, [Y] * j, np.ones(1))

    @staticmethod
    def evaluate_tensor(F: CoefficientTensor, Y: np.ndarray) -> np.ndarray:
        """F . Y^(x)order, node-wise when Y has shape (S, n_nodes)"""
        Y = np.asarray(Y, dtype=float)
        if Y.shape[0] != F.species:
            raise DomainError(f"state has {Y.shape[0]} species, tensor expects {F.species}")
        result = np.zeros(Y.shape)
        if F.nnz == 0:
            return result
        if F.order == 0:
            monomials = np.ones((F.nnz,) + Y.shape[1:])
        else:
            factors = np.unravel_index(F.cols, (F.species,) * F.order)
            monomials = np.prod([Y[idx] for idx in factors], axis=0)
        weights = F.values.reshape((-1,) + (1,) * (Y.ndim - 1))
        np.add.at(result, F.rows, weights * monomials)
        return result

    @staticmethod
    def rhs_eval(tensors: CoefficientTensors, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 1 or Y.size != tensors.species:
            raise DomainError(f"rhs_eval expects a vector of length {tensors.species}")
        return sum(
            (ReactionNetworkService.evaluate_tensor(F, Y) for F in tensors.tensors),
            np.zeros(tensors.species),
        )

    @staticmethod
    def tensor_norms(F: CoefficientTensor) -> TensorNorms:
        if F.nnz == 0:
            return TensorNorms(0.0, 0.0, 0.0, 0.0)
        # The spectral norm only sees the occupied columns
        occupied, compact_cols = np.unique(F.cols, return_inverse=True)
        dense = np.zeros((F.species, occupied.size))
        np.add.at(dense, (F.rows, compact_cols), F.values)
        abs_dense = np.abs(dense)
        inf_norm = float(abs_dense.sum(axis=1).max())
        one_norm = float(abs_dense.sum(axis=0).max())
        two_norm = float(np.linalg.norm(dense, 2))
        if F.max_rate > 0:
            tau_max = one_norm / F.max_rate
            two_bound = F.max_rate * float(np.sqrt(F.sigma_max * tau_max))
        else:
            two_bound = float(np.sqrt(inf_norm * one_norm))
        return TensorNorms(inf_norm, one_norm, two_norm, two_bound)

    @staticmethod
    def stoich_sum(network: ReactionNetwork) -> float:
        return float(sum(
            np.abs(np.asarray(r.beta) - np.asarray(r.alpha)).sum() for r in network.reactions
        ))

    @staticmethod
    def _rate_matrix(S: int, rates: Optional[np.ndarray]) -> np.ndarray:
        if rates is None:
            return np.ones((S, S))
        rates = np.asarray(rates, dtype=float)
        if rates.shape != (S, S):
            raise DomainError(f"autocatalytic rates must be an {S}x{S} matrix")
        return rates

    @staticmethod
    def autocatalytic_network(S: int, varsigma: int, rates: Optional[np.ndarray] = None) -> ReactionNetwork:
        """(varsigma-1) y_i + y_j -> varsigma y_i for i != j, varsigma y_i -> (varsigma+1) y_i for i == j"""
        if S < 2 or varsigma < 2:
            raise DomainError("autocatalytic networks need S >= 2 and varsigma >= 2")
        rate_matrix = ReactionNetworkService._rate_matrix(S, rates)
        reactions = []
        for i in range(S):
            for j in range(S):
                alpha = [0] * S
                beta = [0] * S
                alpha[i] += varsigma - 1
                alpha[j] += 1
                beta[i] = varsigma + (1 if i == j else 0)
                monomial = [i + 1] * (varsigma - 1) + [j + 1]
                reactions.append(Reaction(
                    alpha=alpha, beta=beta, rate=float(rate_matrix[i, j]), monomial=monomial
                ))
        return ReactionNetwork(species=S, reactions=reactions)

    @staticmethod
    def autocatalytic_tensor(S: int, varsigma: int, rates: Optional[np.ndarray] = None) -> CoefficientTensor:
        rate_matrix = ReactionNetworkService._rate_matrix(S, rates)
        entries: Dict[Tuple[int, int], float] = {}
        for i in range(1, S + 1):
            for j in range(1, S + 1):
                col = ReactionNetworkService.canonical_position(i, j, S, varsigma) - 1
                c = float(rate_matrix[i - 1, j - 1])
                entries[(i - 1, col)] = entries.get((i - 1, col), 0.0) + c
                if i != j:
                    entries[(j - 1, col)] = entries.get((j - 1, col), 0.0) - c
        return CoefficientTensor.from_entries(
            S, varsigma, entries, max_rate=float(rate_matrix.max()), sigma_max=float(2 * S - 1)
        )

    @staticmethod
    def autocatalytic_norm_bound(S: int, max_rate: float) -> float:
        return max_rate * float(np.sqrt(2 * (2 * S - 1)))
