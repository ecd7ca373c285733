import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from exceptions import DomainError, ResourceLimitError
from services.reaction_network_service import (
    CoefficientTensor,
    CoefficientTensors,
    ReactionNetworkService,
)
from settings import Settings
from utils.linalg import kron_chain, sparse_identity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpatialGrid:
    d: int
    n: int

    def __post_init__(self):
        if not 1 <= self.d <= 3:
            raise DomainError("spatial dimension must be 1, 2 or 3")
        if self.n < 3:
            raise DomainError("periodic stencil needs n >= 3")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_d(self) -> int:
        return self.n ** self.d


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: sp.csr_matrix
    symmetric: bool

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LaplacianNorm:
    norm: float
    bound: float
    bound_tight: bool


@dataclass(frozen=True)
class LiftedTensor:
    """One copy of a species-level tensor per grid node, scaled node-wise"""

    base: CoefficientTensor
    grid: SpatialGrid
    node_scale: np.ndarray

    @property
    def order(self) -> int:
        return self.base.order

    @property
    def norm(self) -> float:
        """Spectral norm of the block structure: max_p scale_p * ||F||_2"""
        base_norm = ReactionNetworkService.tensor_norms(self.base).two_norm
        return float(np.abs(self.node_scale).max() * base_norm)

    @property
    def two_bound(self) -> float:
        base_bound = ReactionNetworkService.tensor_norms(self.base).two_bound
        return float(np.abs(self.node_scale).max() * base_bound)

    def full_matrix(self) -> sp.csr_matrix:
        """(S n_d) x (S n_d)^order matrix on the species-major lifted state"""
        S, n_d, j = self.base.species, self.grid.n_d, self.base.order
        N = S * n_d
        if self.base.nnz == 0:
            return sp.csr_matrix((N, N ** j))
        factors = np.unravel_index(self.base.cols, (S,) * j) if j else ()
        nodes = np.arange(n_d, dtype=np.int64)
        rows = (self.base.rows[:, None] * n_d + nodes[None, :]).ravel()
        cols = np.zeros((self.base.nnz, n_d), dtype=np.int64)
        for species_index in factors:
            cols = cols * N + (species_index[:, None] * n_d + nodes[None, :])
        values = (self.base.values[:, None] * self.node_scale[None, :]).ravel()
        return sp.csr_matrix((values, (rows, cols.ravel())), shape=(N, N ** j))


@dataclass(frozen=True)
class DiscretizedSystem:
    """Method-of-lines system dY/dt = F1 Y + F0 + sum_j F_j Y^(x)j on a grid"""

    tensors: CoefficientTensors
    diffusion: np.ndarray
    grid: SpatialGrid
    F1: DiscreteOperator
    lifted: Dict[int, LiftedTensor]

    @property
    def species(self) -> int:
        return self.tensors.species

    @property
    def max_order(self) -> int:
        return max(self.tensors.max_order, 1)

    @property
    def state_dim(self) -> int:
        return self.species * self.grid.n_d

    def source_vector(self) -> np.ndarray:
        lifted0 = self.lifted.get(0)
        if lifted0 is None or lifted0.base.nnz == 0:
            return np.zeros(self.state_dim)
        return lifted0.full_matrix().toarray().ravel()


class SpatialService:
    @staticmethod
    def _check_nodes(n: int, d: int) -> None:
        cap = Settings.get().max_grid_nodes
        if n ** d > cap:
            raise ResourceLimitError(f"grid with {n ** d} nodes exceeds the limit of {cap}")

    @staticmethod
    def laplacian_1d(n: int) -> DiscreteOperator:
        if n < 3:
            raise DomainError("laplacian_1d requires n >= 3")
        SpatialService._check_nodes(n, 1)
        diagonals = [np.full(n, -2.0), np.ones(n - 1), np.ones(n - 1)]
        stencil = sp.diags(diagonals, [0, 1, -1], format="lil")
        stencil[0, n - 1] = 1.0
        stencil[n - 1, 0] = 1.0
        return DiscreteOperator(matrix=(n ** 2 * stencil).tocsr(), symmetric=True)

    @staticmethod
    def laplacian_nd(n: int, d: int) -> DiscreteOperator:
        if not 1 <= d <= 3:
            raise DomainError("laplacian_nd supports d in 1..3")
        SpatialService._check_nodes(n, d)
        lap = SpatialService.laplacian_1d(n).matrix
        eye = sparse_identity(n)
        total = sp.csr_matrix((n ** d, n ** d))
        for axis in range(d):
            factors = [lap if pos == axis else eye for pos in range(d)]
            total = total + kron_chain(factors)
        return DiscreteOperator(matrix=total.tocsr(), symmetric=True)

    @staticmethod
    def laplacian_eigenvalues(n: int, d: int) -> Tuple[np.ndarray, np.ndarray]:
        """All multi-indices k (0-based, row-major) and the matching eigenvalues"""
        if n < 3:
            raise DomainError("laplacian_eigenvalues requires n >= 3")
        SpatialService._check_nodes(n, d)
        one_d = 2.0 * n ** 2 * (np.cos(2.0 * np.pi * np.arange(n) / n) - 1.0)
        indices = np.array(list(itertools.product(range(n), repeat=d)), dtype=np.int64)
        eigenvalues = one_d[indices].sum(axis=1)
        return indices, eigenvalues

    @staticmethod
    def laplacian_norm_exact(n: int, d: int) -> LaplacianNorm:
        if n < 3:
            raise DomainError("laplacian_norm_exact requires n >= 3")
        one_d = 2.0 * n ** 2 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))
        # Each axis contributes independently, so the maximum is d times the 1-D maximum
        norm = d * float(one_d.max())
        bound = 4.0 * d * n ** 2
        return LaplacianNorm(norm=bound if n % 2 == 0 else norm, bound=bound, bound_tight=n % 2 == 0)

    @staticmethod
    def grid_coordinates(grid: SpatialGrid) -> np.ndarray:
        """Node coordinates x = index / n, shape (n_d, d), row-major node order"""
        axes = [np.arange(grid.n) / grid.n] * grid.d
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @staticmethod
    def build_F1(D: Sequence[float], mu: Sequence[float], grid: SpatialGrid) -> DiscreteOperator:
        D = np.asarray(D, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if D.shape != mu.shape or D.ndim != 1:
            raise DomainError("D and mu must be vectors of the same length")
        if np.any(D < 0):
            raise DomainError("diffusion coefficients must be non-negative")
        lap = SpatialService.laplacian_nd(grid.n, grid.d).matrix
        eye = sparse_identity(grid.n_d)
        blocks = [D[i] * lap - mu[i] * eye for i in range(D.size)]
        return DiscreteOperator(matrix=sp.block_diag(blocks, format="csr"), symmetric=True)

    @staticmethod
    def lift_tensor(
        F: CoefficientTensor,
        grid: SpatialGrid,
        rates_per_node: Optional[Sequence[float]] = None,
    ) -> LiftedTensor:
        if rates_per_node is None:
            scale = np.ones(grid.n_d)
        else:
            scale = np.asarray(rates_per_node, dtype=float)
            if scale.shape != (grid.n_d,):
                raise DomainError(f"node rates must have length {grid.n_d}")
        return LiftedTensor(base=F, grid=grid, node_scale=scale)

    @staticmethod
    def discretize(
        tensors: CoefficientTensors,
        diffusion: Sequence[float],
        grid: SpatialGrid,
        node_rates: Optional[Sequence[float]] = None,
    ) -> DiscretizedSystem:
        diffusion = np.asarray(diffusion, dtype=float)
        if diffusion.shape != (tensors.species,):
            raise DomainError(f"diffusion must have length {tensors.species}")
        S = tensors.species
        diffusive = SpatialService.build_F1(diffusion, np.zeros(S), grid).matrix
        reaction_linear = SpatialService.lift_tensor(tensors[1], grid).full_matrix()
        total = (diffusive + reaction_linear).tocsr()
        F1 = DiscreteOperator(matrix=total, symmetric=(total - total.T).count_nonzero() == 0)
        lifted = {0: SpatialService.lift_tensor(tensors[0], grid)}
        for order in range(2, tensors.max_order + 1):
            lifted[order] = SpatialService.lift_tensor(tensors[order], grid, node_rates)
        logger.debug("Discretized %d species on %d nodes", S, grid.n_d)
        return DiscretizedSystem(tensors, diffusion, grid, F1, lifted)
