import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from exceptions import DomainError, ResourceLimitError
from models import CarlemanMode
from services.reaction_network_service import ReactionNetworkService
from services.spatial_service import DiscretizedSystem
from settings import Settings
from utils.linalg import block_edges, block_nnz, kron_chain, sparse_identity

logger = logging.getLogger(__name__)

NodeBlock = Tuple[int, int, sp.csr_matrix]


@dataclass(frozen=True)
class CarlemanSystem:
    """Truncated linear system dZ/dt = M Z + b over Z = (Z_1, ..., Z_k)"""

    k: int
    M: sp.csr_matrix
    b: np.ndarray
    block_offsets: np.ndarray
    mode: CarlemanMode
    species: int
    n_d: int
    source_coupling: bool = False

    @property
    def dim(self) -> int:
        return int(self.block_offsets[-1])

    def block(self, vector: np.ndarray, i: int) -> np.ndarray:
        return vector[self.block_offsets[i - 1]:self.block_offsets[i]]


class CarlemanService:
    @staticmethod
    def block_dims(mode: CarlemanMode, S: int, n_d: int, k: int) -> List[int]:
        mode = CarlemanMode(mode)
        if mode is CarlemanMode.FULL:
            return [(S * n_d) ** i for i in range(1, k + 1)]
        return [S ** i * n_d for i in range(1, k + 1)]

    @staticmethod
    def _node_blocks(system: DiscretizedSystem, order: int) -> List[NodeBlock]:
        """Grouped form of F_order: (row species, species column, n_d x n_d block)"""
        S, n_d = system.species, system.grid.n_d
        blocks: List[NodeBlock] = []
        if order == 1:
            F1 = system.F1.matrix
            for a in range(S):
                for c in range(S):
                    blk = F1[a * n_d:(a + 1) * n_d, c * n_d:(c + 1) * n_d]
                    if blk.nnz:
                        blocks.append((a, c, sp.csr_matrix(blk)))
            return blocks
        lifted = system.lifted.get(order)
        if lifted is None:
            return blocks
        for row, col, value in zip(lifted.base.rows, lifted.base.cols, lifted.base.values):
            blocks.append((int(row), int(col), sp.diags(value * lifted.node_scale, format="csr")))
        return blocks

    @staticmethod
    def _full_factor(system: DiscretizedSystem, order: int) -> sp.csr_matrix:
        if order == 1:
            return system.F1.matrix
        N = system.state_dim
        lifted = system.lifted.get(order)
        if lifted is None:
            return sp.csr_matrix((N, N ** order))
        return lifted.full_matrix()

    @staticmethod
    def transfer_block(system: DiscretizedSystem, i: int, j: int, mode: CarlemanMode) -> sp.csr_matrix:
        """Leibniz block B_j^i mapping Carleman block i+j-1 into the derivative of block i"""
        if i < 1 or j < 0:
            raise DomainError("transfer_block requires i >= 1 and j >= 0")
        mode = CarlemanMode(mode)
        S, n_d = system.species, system.grid.n_d
        if mode is CarlemanMode.FULL:
            N = S * n_d
            factor = CarlemanService._full_factor(system, j)
            total = sp.csr_matrix((N ** i, N ** (i + j - 1)))
            for v in range(1, i + 1):
                total = total + kron_chain([
                    sparse_identity(N ** (v - 1)), factor, sparse_identity(N ** (i - v))
                ])
            return total.tocsr()

        shape = (S ** i * n_d, S ** (i + j - 1) * n_d)
        total = sp.csr_matrix(shape)
        for a, col, blk in CarlemanService._node_blocks(system, j):
            unit = sp.csr_matrix(([1.0], ([a], [col])), shape=(S, S ** j))
            species_part = sp.csr_matrix((S ** i, S ** (i + j - 1)))
            for v in range(1, i + 1):
                species_part = species_part + kron_chain([
                    sparse_identity(S ** (v - 1)), unit, sparse_identity(S ** (i - v))
                ])
            total = total + sp.kron(species_part, blk, format="csr")
        return total.tocsr()

    @staticmethod
    def assemble(
        system: DiscretizedSystem,
        k: int,
        mode: CarlemanMode = CarlemanMode.GROUPED,
        source_coupling: bool = False,
    ) -> CarlemanSystem:
        if k < 1:
            raise DomainError("truncation order must be at least 1")
        mode = CarlemanMode(mode)
        S, n_d = system.species, system.grid.n_d
        dims = CarlemanService.block_dims(mode, S, n_d, k)
        total = sum(dims)
        cap = Settings.get().max_carleman_dim
        if total > cap:
            raise ResourceLimitError(
                f"Carleman system of dimension {total} ({mode.value}, k={k}) exceeds the limit of {cap}"
            )

        grid: List[List[Optional[sp.csr_matrix]]] = [[None] * k for _ in range(k)]
        for i in range(1, k + 1):
            for j in range(1, system.max_order + 1):
                col = i + j - 1
                if col > k:
                    break
                block = CarlemanService.transfer_block(system, i, j, mode)
                if block.nnz or col == i:
                    grid[i - 1][col - 1] = block
            if source_coupling and i >= 2:
                grid[i - 1][i - 2] = CarlemanService.transfer_block(system, i, 0, mode)

        M = sp.bmat(grid, format="csr")
        b = np.zeros(total)
        b[:dims[0]] = system.source_vector()
        offsets = np.concatenate([[0], np.cumsum(dims)]).astype(np.int64)
        logger.info("Assembled %s Carleman system k=%d with dimension %d (nnz=%d)", mode.value, k, total, M.nnz)
        return CarlemanSystem(
            k=k, M=M, b=b, block_offsets=offsets, mode=mode,
            species=S, n_d=n_d, source_coupling=source_coupling,
        )

    @staticmethod
    def embed(Y0: np.ndarray, k: int, mode: CarlemanMode, S: int, n_d: int) -> np.ndarray:
        Y0 = np.asarray(Y0, dtype=float)
        if Y0.shape != (S * n_d,):
            raise DomainError(f"initial state must have length {S * n_d}")
        mode = CarlemanMode(mode)
        if mode is CarlemanMode.FULL:
            return np.concatenate([ReactionNetworkService.tensor_power(Y0, i) for i in range(1, k + 1)])
        species_rows = Y0.reshape(S, n_d)
        blocks = [species_rows]
        for _ in range(1, k):
            # species multi-index major, node minor
            blocks.append((blocks[-1][:, None, :] * species_rows[None, :, :]).reshape(-1, n_d))
        return np.concatenate([block.ravel() for block in blocks])

    @staticmethod
    def extract(Z: np.ndarray, system: CarlemanSystem) -> np.ndarray:
        Z = np.asarray(Z)
        if Z.shape[-1] != system.dim:
            raise DomainError(f"state has length {Z.shape[-1]}, system dimension is {system.dim}")
        return Z[..., :system.block_offsets[1]].copy()

    @staticmethod
    def norm_bound(
        system: DiscretizedSystem,
        k: int,
        mode: CarlemanMode = CarlemanMode.GROUPED,
        variant: str = "general",
        source_coupling: bool = False,
    ) -> float:
        """k [4 d n^2 max D + ||F_1|| + sum_{j>=2} bound(F~_j)]"""
        grid = system.grid
        linear = 4.0 * grid.d * grid.n ** 2 * float(np.max(system.diffusion, initial=0.0))
        linear += ReactionNetworkService.tensor_norms(system.tensors[1]).two_norm

        nonlinear_tensors = [system.lifted[j] for j in range(2, system.max_order + 1) if j in system.lifted]
        if variant == "general":
            nonlinear = sum(t.two_bound for t in nonlinear_tensors)
        elif variant == "autocatalytic":
            rate_sum = sum(t.base.max_rate * float(np.abs(t.node_scale).max()) for t in nonlinear_tensors)
            nonlinear = ReactionNetworkService.autocatalytic_norm_bound(system.species, rate_sum)
        else:
            raise DomainError(f"unknown norm-bound variant '{variant}'")

        bracket = linear + nonlinear
        if source_coupling:
            f0_norm = float(np.linalg.norm(system.tensors[0].values))
            if CarlemanMode(mode) is CarlemanMode.FULL:
                f0_norm *= float(np.sqrt(grid.n_d))
            bracket += f0_norm
        return k * bracket

    @staticmethod
    def block_pattern(system: CarlemanSystem) -> List[Tuple[int, int, int]]:
        """Nonzeros per block: n_d-sized node blocks when grouped, Carleman blocks when full"""
        if system.mode is CarlemanMode.GROUPED:
            n_blocks = system.dim // system.n_d
            edges = block_edges([system.n_d] * n_blocks)
        else:
            edges = system.block_offsets[1:-1]
        return block_nnz(system.M, edges, edges)
