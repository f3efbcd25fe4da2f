import abc

import numpy as np
import structlog
from scipy import sparse
from scipy.sparse import linalg as spla

from app.errors import SolverError

logger = structlog.get_logger(__name__)

# 超过该自由度数时改用预条件共轭梯度
DIRECT_SOLVER_LIMIT = 200_000


class LinearSolver(abc.ABC):
    """对称正定稀疏系统 A x = b 的求解器抽象基类。"""

    @abc.abstractmethod
    def __init__(self, matrix: sparse.spmatrix):
        """
        初始化求解器。
        具体实现应在此处完成分解或预条件子的构造，之后的 solve 调用可重复使用。
        """
        raise NotImplementedError

    @abc.abstractmethod
    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        求解 A x = rhs。

        参数:
            rhs (np.ndarray): 右端项，一维或二维（多个右端项按列排列）。

        返回:
            np.ndarray: 与 rhs 同形状的解。
        """
        raise NotImplementedError


class DirectSolver(LinearSolver):
    """稀疏 LU 分解，分解一次、求解多次。"""

    def __init__(self, matrix: sparse.spmatrix):
        self.size = matrix.shape[0]
        try:
            self._lu = spla.splu(sparse.csc_matrix(matrix))
        except RuntimeError as e:
            # 连通网格上限制后的刚度矩阵不会奇异，出现即说明网格有问题
            raise SolverError(f"稀疏 LU 分解失败，受限系统奇异: {e}") from e
        logger.debug("稀疏 LU 分解完成", dofs=self.size)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverError("稀疏 LU 回代得到非有限值")
        return x


class JacobiCGSolver(LinearSolver):
    """对角（Jacobi）预条件共轭梯度，用于超出直接法规模的系统。"""

    def __init__(self, matrix: sparse.spmatrix, rtol: float = 1e-12, maxiter: int | None = None):
        self.matrix = sparse.csr_matrix(matrix)
        self.size = self.matrix.shape[0]
        diagonal = self.matrix.diagonal()
        if np.any(diagonal <= 0):
            raise SolverError("矩阵对角元非正，无法构造 Jacobi 预条件子")
        inv_diag = 1.0 / diagonal
        self._preconditioner = spla.LinearOperator(
            self.matrix.shape, matvec=lambda v: inv_diag * v, dtype=float
        )
        self.rtol = rtol
        self.maxiter = maxiter or 10 * self.size

    def _solve_one(self, rhs: np.ndarray) -> np.ndarray:
        x, info = spla.cg(
            self.matrix, rhs, rtol=self.rtol, maxiter=self.maxiter, M=self._preconditioner
        )
        if info != 0:
            raise SolverError(f"共轭梯度未收敛 (info={info})")
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim == 1:
            return self._solve_one(rhs)
        return np.column_stack([self._solve_one(rhs[:, j]) for j in range(rhs.shape[1])])


def select_solver(matrix: sparse.spmatrix) -> LinearSolver:
    """按自由度数选择求解器：2·10⁵ 以内用直接法，之外用 Jacobi-CG。"""
    if matrix.shape[0] <= DIRECT_SOLVER_LIMIT:
        return DirectSolver(matrix)
    logger.info("自由度超过直接法上限，改用 Jacobi-CG", dofs=matrix.shape[0])
    return JacobiCGSolver(matrix)
