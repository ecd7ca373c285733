from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp


def sparse_identity(dim: int) -> sp.csr_matrix:
    return sp.identity(dim, format="csr", dtype=float)


def kron_chain(factors: Sequence[sp.spmatrix]) -> sp.csr_matrix:
    """Kronecker product of the factors from left to right"""
    result = sp.csr_matrix(np.ones((1, 1)))
    for factor in factors:
        result = sp.kron(result, factor, format="csr")
    return result


def spectral_norm_estimate(matrix, iterations: int = 500, seed: int = 0, tol: float = 1e-12) -> float:
    """Power iteration on A^T A.

    Every iterate is a unit vector v and the estimate is ||A v||, so the
    returned value never exceeds the true spectral norm.
    """
    if matrix.shape[0] == 0 or matrix.shape[1] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(matrix.shape[1])
    v /= np.linalg.norm(v)
    estimate = float(np.linalg.norm(matrix @ v))
    for _ in range(iterations):
        w = matrix.T @ (matrix @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            break
        v = w / norm_w
        new_estimate = float(np.linalg.norm(matrix @ v))
        converged = abs(new_estimate - estimate) <= tol * max(new_estimate, 1.0)
        estimate = max(estimate, new_estimate)
        if converged:
            break
    return estimate


def block_edges(sizes: Sequence[int]) -> np.ndarray:
    """Interior block boundaries for consecutive blocks of the given sizes"""
    return np.cumsum(np.asarray(sizes, dtype=np.int64))[:-1]


def block_nnz(matrix: sp.spmatrix, row_edges: np.ndarray, col_edges: np.ndarray) -> List[Tuple[int, int, int]]:
    """Count nonzeros per (row block, col block), 1-based, skipping empty blocks"""
    coo = sp.coo_matrix(matrix)
    mask = coo.data != 0
    if not np.any(mask):
        return []
    row_block = np.searchsorted(row_edges, coo.row[mask], side="right")
    col_block = np.searchsorted(col_edges, coo.col[mask], side="right")
    n_col_blocks = len(col_edges) + 1
    keys, counts = np.unique(row_block * n_col_blocks + col_block, return_counts=True)
    return [
        (int(key // n_col_blocks) + 1, int(key % n_col_blocks) + 1, int(count))
        for key, count in zip(keys, counts)
    ]
