import logging
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm

from exceptions import DomainError, ResourceLimitError, StabilityError
from models import LCHSConfig
from settings import Settings

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10
EIG_CHUNK = 256


@dataclass(frozen=True)
class CartesianPair:
    L: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class LCUCoefficients:
    nodes: np.ndarray
    weights: np.ndarray
    coefficients: np.ndarray
    one_norm: float


class LCHSService:
    @staticmethod
    def cartesian_decompose(M: np.ndarray) -> CartesianPair:
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DomainError("cartesian_decompose needs a square matrix")
        adjoint = M.conj().T
        return CartesianPair(L=(M + adjoint) / 2.0, H=(M - adjoint) / 2.0j)

    @staticmethod
    def kernel(z, beta: float):
        """1 / (2 pi e^{-2^beta} e^{(1+iz)^beta}) with the principal branch"""
        if not 0.0 < beta < 1.0:
            raise DomainError("kernel requires 0 < beta < 1")
        c_beta = 2.0 * np.pi * np.exp(-(2.0 ** beta))
        return 1.0 / (c_beta * np.exp((1.0 + 1j * np.asarray(z, dtype=complex)) ** beta))

    @staticmethod
    def gauss_legendre(a: float, b: float, panels: int, points: int) -> Tuple[np.ndarray, np.ndarray]:
        """Composite Gauss-Legendre rule on [a, b] with equal panels"""
        x, w = leggauss(points)
        edges = np.linspace(a, b, panels + 1)
        half = np.diff(edges) / 2.0
        mid = (edges[:-1] + edges[1:]) / 2.0
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return nodes, weights

    @staticmethod
    def lcu_coefficients(cfg: LCHSConfig) -> LCUCoefficients:
        panels = cfg.nodes // cfg.panel_points
        k, w = LCHSService.gauss_legendre(-cfg.K, cfg.K, panels, cfg.panel_points)
        c = w * LCHSService.kernel(k, cfg.beta) / (1.0 - 1j * k)
        return LCUCoefficients(nodes=k, weights=w, coefficients=c, one_norm=float(np.abs(c).sum()))

    @staticmethod
    def truncation_threshold(beta: float, eps: float, g: float = 1.0) -> float:
        """K = ceil((ln(g/eps))^(1/beta)) with unit constant"""
        if eps <= 0:
            raise DomainError("eps must be positive")
        return float(math.ceil(max(math.log(g / eps), 0.0) ** (1.0 / beta)))

    @staticmethod
    def _prepare(A: np.ndarray) -> CartesianPair:
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DomainError("propagator generator must be square")
        cap = Settings.get().max_dense_dim
        if A.shape[0] > cap:
            raise ResourceLimitError(f"dense verifier limited to dimension {cap}, got {A.shape[0]}")
        pair = LCHSService.cartesian_decompose(A)
        eigenvalues = np.linalg.eigvalsh(pair.L)
        scale = max(1.0, float(np.abs(eigenvalues).max(initial=0.0)))
        if eigenvalues.min(initial=0.0) < -PSD_TOLERANCE * scale:
            raise StabilityError(
                f"Hermitian part has eigenvalue {eigenvalues.min():.3e} < 0; "
                "pass A = -M (or a shifted variant) so that e^(-At) is contractive"
            )
        return pair

    @staticmethod
    def _eigensystems(pair: CartesianPair, k_nodes: np.ndarray) -> Iterator[Tuple[slice, np.ndarray, np.ndarray]]:
        """Batched eigendecompositions of k L + H, ascending node order"""
        for start in range(0, k_nodes.size, EIG_CHUNK):
            chunk = slice(start, min(start + EIG_CHUNK, k_nodes.size))
            stack = k_nodes[chunk, None, None] * pair.L[None, :, :] + pair.H[None, :, :]
            lam, vecs = np.linalg.eigh(stack)
            yield chunk, lam, vecs

    @staticmethod
    def reconstruct_propagator(A: np.ndarray, cfg: LCHSConfig) -> np.ndarray:
        """sum_j c_j exp(-i t (k_j L + H)), approximating exp(-A t)"""
        pair = LCHSService._prepare(A)
        lcu = LCHSService.lcu_coefficients(cfg)
        dim = pair.L.shape[0]
        result = np.zeros((dim, dim), dtype=complex)
        for chunk, lam, vecs in LCHSService._eigensystems(pair, lcu.nodes):
            phases = np.exp(-1j * cfg.t * lam)
            result += np.einsum(
                "j,jab,jb,jcb->ac", lcu.coefficients[chunk], vecs, phases, vecs.conj()
            )
        return result

    @staticmethod
    def solve_inhomogeneous(A: np.ndarray, b: np.ndarray, z0: np.ndarray, cfg: LCHSConfig) -> np.ndarray:
        """z(t) for dz/dt = -A z + b: propagated z0 plus the (s, k) double quadrature of the source"""
        b = np.asarray(b, dtype=complex)
        z0 = np.asarray(z0, dtype=complex)
        homogeneous = LCHSService.reconstruct_propagator(A, cfg) @ z0
        if cfg.t == 0.0 or not np.any(b):
            return homogeneous

        pair = LCHSService._prepare(A)
        lcu = LCHSService.lcu_coefficients(cfg)
        s_panels = cfg.s_nodes // cfg.panel_points
        s_nodes, s_weights = LCHSService.gauss_legendre(0.0, cfg.t, s_panels, cfg.panel_points)
        elapsed = cfg.t - s_nodes
        source = np.zeros_like(homogeneous)
        for chunk, lam, vecs in LCHSService._eigensystems(pair, lcu.nodes):
            projected = np.einsum("jba,b->ja", vecs.conj(), b)
            phases = np.exp(-1j * elapsed[None, :, None] * lam[:, None, :])
            integrated = np.einsum("s,jsa->ja", s_weights, phases) * projected
            source += np.einsum("j,jab,jb->a", lcu.coefficients[chunk], vecs, integrated)
        return homogeneous + source

    @staticmethod
    def reference_propagator(A: np.ndarray, t: float) -> np.ndarray:
        return expm(-np.asarray(A) * t)

    @staticmethod
    def reference_solution(A: np.ndarray, b: np.ndarray, z0: np.ndarray, t: float) -> np.ndarray:
        """Variation of constants through the augmented exponential (valid for singular A)"""
        A = np.asarray(A)
        dim = A.shape[0]
        augmented = np.zeros((dim + 1, dim + 1), dtype=np.result_type(A, b, complex))
        augmented[:dim, :dim] = -A
        augmented[:dim, dim] = b
        propagator = expm(augmented * t)
        return propagator[:dim, :dim] @ np.asarray(z0) + propagator[:dim, dim]

    @staticmethod
    def random_dissipative_matrix(dim: int, seed: int = 0) -> np.ndarray:
        """A = L + iH with L positive semi-definite and ||L||, ||H|| of order one"""
        if dim < 1:
            raise DomainError("dim must be positive")
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((dim, dim))
        L = G @ G.T / (2.0 * dim)
        X = rng.standard_normal((dim, dim))
        H = (X + X.T) / (4.0 * np.sqrt(dim))
        return L + 1j * H

    @staticmethod
    def reconstruction_error(A: np.ndarray, cfg: LCHSConfig) -> float:
        approx = LCHSService.reconstruct_propagator(A, cfg)
        return float(np.linalg.norm(approx - LCHSService.reference_propagator(A, cfg.t), "fro"))

    @staticmethod
    def convergence_table(A: np.ndarray, cfg: LCHSConfig, node_counts: Sequence[int]) -> pd.DataFrame:
        rows = []
        for nodes in node_counts:
            run_cfg = LCHSConfig.model_validate({**cfg.model_dump(), "nodes": int(nodes)})
            rows.append({"K": cfg.K, "nodes": run_cfg.nodes, "error_fro": LCHSService.reconstruction_error(A, run_cfg)})
        return pd.DataFrame(rows, columns=["K", "nodes", "error_fro"])
