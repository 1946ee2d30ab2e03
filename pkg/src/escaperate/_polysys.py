"""Monotone quadratic fixed-point systems ``x = z * phi(x)``.

``phi(x) = b + A @ x + sum_t c_t * x[j_t] * x[k_t]`` (accumulated into row
``i_t``) with non-negative coefficients.  First-passage generating functions
are the least non-negative solution of such a system; iterating from zero
converges to it monotonically.  Newton steps are taken once the iterates
are close, and only accepted when they move upwards, which keeps the
iterates below the least solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import NoConvergence, SingularSystem


@dataclass
class QuadraticSystem:
    const: np.ndarray
    linear: np.ndarray
    qi: np.ndarray
    qj: np.ndarray
    qk: np.ndarray
    qc: np.ndarray

    @property
    def size(self) -> int:
        return self.const.shape[0]

    def phi(self, x):
        out = self.const + self.linear @ x
        if self.qc.size:
            out = out + np.bincount(self.qi, self.qc * x[self.qj] * x[self.qk], minlength=self.size)
        return out

    def jacobian(self, x):
        J = self.linear.copy()
        if self.qc.size:
            np.add.at(J, (self.qi, self.qj), self.qc * x[self.qk])
            np.add.at(J, (self.qi, self.qk), self.qc * x[self.qj])
        return J


class SystemBuilder:
    """Accumulates the terms of a :class:`QuadraticSystem`."""

    def __init__(self, size):
        self.const = np.zeros(size)
        self.linear = np.zeros((size, size))
        self._quad = []

    def add_const(self, i, c):
        self.const[i] += c

    def add_linear(self, i, j, c):
        self.linear[i, j] += c

    def add_quad(self, i, j, k, c):
        self._quad.append((i, j, k, c))

    def build(self) -> QuadraticSystem:
        if self._quad:
            q = np.array(self._quad, dtype=float)
            qi, qj, qk = (q[:, m].astype(np.intp) for m in range(3))
            qc = q[:, 3]
        else:
            qi = qj = qk = np.zeros(0, dtype=np.intp)
            qc = np.zeros(0)
        return QuadraticSystem(self.const, self.linear, qi, qj, qk, qc)


@dataclass
class FixedPoint:
    x: np.ndarray
    residual: float
    iterations: int


def iterate(system: QuadraticSystem, n_iter: int, z: float = 1.0):
    """Yield the plain fixed-point iterates starting from zero."""
    x = np.zeros(system.size)
    for _ in range(n_iter):
        x = z * system.phi(x)
        yield x


def least_solution(system: QuadraticSystem, z: float = 1.0, tol: float = 1e-14,
                   max_iter: int = 10**6, accelerate: bool = True) -> FixedPoint:
    m = system.size
    x = np.zeros(m)
    if m == 0:
        return FixedPoint(x, 0.0, 0)
    eye = np.eye(m)
    newton_ok = accelerate
    for it in range(1, max_iter + 1):
        fx = z * system.phi(x)
        step = fx - x
        res = float(np.max(np.abs(step)))
        if not np.isfinite(res):
            raise NoConvergence(f"fixed-point iteration diverged after {it} iterations")
        if res < tol:
            return FixedPoint(x, res, it - 1)
        if newton_ok and res < 1e-2:
            try:
                delta = np.linalg.solve(eye - z * system.jacobian(x), step)
            except np.linalg.LinAlgError:
                delta = None
            # upward Newton steps stay below the least solution
            if delta is not None and np.all(np.isfinite(delta)) and delta.min() >= -1e-13:
                xn = x + np.maximum(delta, 0.0)
                if float(np.max(np.abs(z * system.phi(xn) - xn))) <= res:
                    x = xn
                    continue
            newton_ok = False
        x = fx
    fx = z * system.phi(x)
    res = float(np.max(np.abs(fx - x)))
    if res < tol:
        return FixedPoint(x, res, max_iter)
    raise NoConvergence(f"fixed-point residual {res:.3e} after {max_iter} iterations")


def singular_threshold(residual: float) -> float:
    """Smallest singular value below which a system counts as singular.

    An error ``e`` in the solution of a critical system leaves a residual of
    order ``e**2`` and a smallest singular value of order ``e``.
    """
    return max(1e-12, 10.0 * np.sqrt(max(residual, 1e-16)))


def solve_checked(M: np.ndarray, rhs: np.ndarray, threshold: float = 1e-12) -> np.ndarray:
    """Solve ``M x = rhs`` by LU with partial pivoting, refusing singular ``M``."""
    if M.size == 0:
        return np.zeros_like(rhs)
    lu, piv = sla.lu_factor(M, check_finite=True)
    anorm = np.linalg.norm(M, 1)
    rcond, info = sla.lapack.dgecon(lu, anorm, norm="1")
    if not np.isfinite(rcond) or rcond * anorm < threshold or np.any(np.diag(lu) == 0):
        raise SingularSystem(f"linear system is singular (smallest singular value ~ {rcond * anorm:.2e})")
    return sla.lu_solve((lu, piv), rhs)
