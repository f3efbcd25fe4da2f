import abc

import numpy as np
import structlog
from scipy import linalg, sparse
from scipy.sparse import linalg as spla

from app.errors import EigenSolverError, ParameterError

logger = structlog.get_logger(__name__)

# 自由度不超过该值时直接做稠密广义特征分解
DENSE_LIMIT = 3000
EIGEN_RESIDUAL_TOL = 1e-8
# ARPACK 起始向量的固定种子，保证多次运行逐位一致
_START_VECTOR_SEED = 20240601


class EigenSolver(abc.ABC):
    """受限广义特征问题 K x = λ M x 低端谱的求解器抽象基类。"""

    name: str = "abstract"

    @abc.abstractmethod
    def solve(
        self, K: sparse.spmatrix, M: sparse.spmatrix, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        计算最小的 count 个特征对。

        参数:
            K: 对称正定（受限）刚度矩阵。
            M: 对称正定（受限）质量矩阵。
            count: 需要的特征对个数。

        返回:
            (lambdas, vectors): 升序特征值与按列排列的特征向量。
        """
        raise NotImplementedError


class DenseEigenSolver(EigenSolver):
    """LAPACK 稠密广义对称特征分解，只取最低的 count 个。"""

    name = "dense"

    def solve(self, K, M, count):
        lambdas, vectors = linalg.eigh(
            _dense(K), _dense(M), subset_by_index=[0, count - 1], driver="gvx"
        )
        return lambdas, vectors


class ShiftInvertEigenSolver(EigenSolver):
    """ARPACK 在 σ=0 处做移位求逆 Lanczos，起始向量由固定种子生成。"""

    name = "shift-invert"

    def __init__(self, tol: float = 0.0, maxiter: int | None = None):
        self.tol = tol
        self.maxiter = maxiter

    def solve(self, K, M, count):
        n = K.shape[0]
        v0 = np.random.default_rng(_START_VECTOR_SEED).standard_normal(n)
        try:
            lambdas, vectors = spla.eigsh(
                sparse.csc_matrix(K),
                k=count,
                M=sparse.csc_matrix(M),
                sigma=0.0,
                which="LM",
                v0=v0,
                tol=self.tol,
                maxiter=self.maxiter,
            )
        except spla.ArpackNoConvergence as e:
            residuals = residual_norms(K, M, e.eigenvalues, e.eigenvectors)
            raise EigenSolverError(
                f"ARPACK 未收敛，仅得到 {len(e.eigenvalues)}/{count} 个特征对",
                residuals=residuals,
            ) from e
        order = np.argsort(lambdas)
        return lambdas[order], vectors[:, order]


def _dense(matrix) -> np.ndarray:
    return matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix)


def select_eigensolver(size: int, count: int) -> EigenSolver:
    """小规模或需要几乎全部特征对时用稠密分解，否则用移位求逆。"""
    if size <= DENSE_LIMIT or count >= size - 1:
        return DenseEigenSolver()
    return ShiftInvertEigenSolver()


def rayleigh_ritz(K, M, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """在给定子空间内重新求解投影问题，恢复精确的 M-正交归一性。"""
    KV = K @ vectors
    MV = M @ vectors
    reduced_k = vectors.T @ KV
    reduced_m = vectors.T @ MV
    reduced_k = 0.5 * (reduced_k + reduced_k.T)
    reduced_m = 0.5 * (reduced_m + reduced_m.T)
    lambdas, coeffs = linalg.eigh(reduced_k, reduced_m)
    return lambdas, vectors @ coeffs


def residual_norms(K, M, lambdas: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """相对残差 ‖K x − λ M x‖ / (|λ|·‖M x‖)。"""
    MV = M @ vectors
    res = K @ vectors - MV * lambdas[None, :]
    scale = np.abs(lambdas) * np.linalg.norm(MV, axis=0)
    return np.linalg.norm(res, axis=0) / np.maximum(scale, np.finfo(float).tiny)


def solve_pencil(
    K: sparse.spmatrix,
    M: sparse.spmatrix,
    count: int,
    solver: EigenSolver | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    求解受限特征问题并做 Rayleigh–Ritz 清理与残差校验。

    返回:
        (lambdas, vectors, residuals)
    """
    n = K.shape[0]
    if not 1 <= count <= n:
        raise ParameterError(f"特征对个数必须在 [1, {n}] 内，实际为 {count}")
    solver = solver or select_eigensolver(n, count)
    log = logger.bind(solver=solver.name, dofs=n, count=count)

    _, raw_vectors = solver.solve(K, M, count)
    lambdas, vectors = rayleigh_ritz(K, M, raw_vectors)
    residuals = residual_norms(K, M, lambdas, vectors)
    worst = float(residuals.max())
    if worst > EIGEN_RESIDUAL_TOL:
        raise EigenSolverError(
            f"特征残差 {worst:.3e} 超过 {EIGEN_RESIDUAL_TOL:g}", residuals=residuals
        )
    if np.any(lambdas <= 0):
        raise EigenSolverError("受限问题出现非正特征值", residuals=residuals)

    log.debug("特征求解完成", lambda_min=float(lambdas[0]), max_residual=worst)
    return lambdas, vectors, residuals
