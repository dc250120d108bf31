"""Lyapunov and continuous-time algebraic Riccati solvers for LQR synthesis.

The Riccati solver uses the matrix sign function of the Hamiltonian, which
needs nothing but dense linear solves, followed by one Kleinman-Newton
refinement step. Systems here are tiny (12x12 Hamiltonian, 36x36 Kronecker
system) so plain pivoted LU through ``numpy.linalg`` is adequate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

PSD_SHIFT = 1e-12


class RiccatiError(RuntimeError):
    """Raised when the Riccati iteration fails; carries the last residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class LyapunovError(RuntimeError):
    pass


def _require_square(M: np.ndarray, name: str) -> int:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M.shape[0]


def _is_cholesky_pd(M: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class LqrWeights:
    """State and input weights of the quadratic cost."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self) -> None:
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        n = _require_square(Q, "Q")
        _require_square(R, "R")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(R))):
            raise ValueError("weights must be finite")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12) or not np.allclose(R, R.T, rtol=0, atol=1e-12):
            raise ValueError("Q and R must be symmetric")
        if not _is_cholesky_pd(Q + PSD_SHIFT * np.eye(n)):
            raise ValueError("Q must be positive semidefinite")
        if not _is_cholesky_pd(R):
            raise ValueError("R must be positive definite")

    @classmethod
    def default(cls) -> "LqrWeights":
        """Helicopter tuning: Q = diag(200, 150, 100, 200, 50, 50), R = I."""
        return cls(np.diag([200.0, 150.0, 100.0, 200.0, 50.0, 50.0]), np.eye(2))


@dataclass(frozen=True, eq=False)
class CareSolution:
    P: np.ndarray
    K: np.ndarray
    residual_norm: float
    iterations: int
    sign_residual_norm: float = field(default=float("nan"))


def care_residual(A, B, Q, R, P) -> np.ndarray:
    """``A^T P + P A + Q - P B R^-1 B^T P``."""
    return A.T @ P + P @ A + Q - P @ B @ np.linalg.solve(R, B.T @ P)


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``A^T P + P A + Q = 0`` through the n^2 x n^2 Kronecker system.

    With column-major ``vec``, ``vec(A^T P) = (I kron A^T) vec(P)`` and
    ``vec(P A) = (A^T kron I) vec(P)``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = _require_square(A, "A")
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
    eye = np.eye(n)
    L = np.kron(eye, A.T) + np.kron(A.T, eye)
    try:
        vec_p = np.linalg.solve(L, -Q.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise LyapunovError("singular Lyapunov operator: A has eigenvalues summing to zero") from exc
    if not np.all(np.isfinite(vec_p)):
        raise LyapunovError("Lyapunov solve produced non-finite entries")
    P = vec_p.reshape((n, n), order="F")
    return 0.5 * (P + P.T)


def matrix_sign(Z: np.ndarray, tol: float = 1e-12, max_iter: int = 100) -> tuple[np.ndarray, int]:
    """Newton iteration ``Z <- (c Z + (c Z)^-1) / 2`` with determinant scaling.

    Scaling ``c = |det Z|^(-1/N)`` is dropped once the relative step falls
    below 1e-2. Stops when the relative step is ``<= tol`` or stagnates at
    roundoff level (below 1e3 * tol and no longer decreasing).
    """
    N = Z.shape[0]
    eye = np.eye(N)
    scale = True
    prev_change = np.inf
    change = np.inf
    for k in range(1, max_iter + 1):
        sign, logdet = np.linalg.slogdet(Z)
        if sign == 0 or not np.isfinite(logdet):
            raise RiccatiError(
                "singular iterate: Hamiltonian has eigenvalues on the imaginary axis "
                "(data not stabilizable/detectable)",
                residual=change,
            )
        try:
            Z_inv = np.linalg.solve(Z, eye)
        except np.linalg.LinAlgError as exc:
            raise RiccatiError("singular iterate in sign iteration", residual=change) from exc
        c = np.exp(-logdet / N) if scale else 1.0
        Z_next = 0.5 * (c * Z + Z_inv / c)
        change = np.linalg.norm(Z_next - Z) / np.linalg.norm(Z)
        Z = Z_next
        if not np.all(np.isfinite(Z)):
            raise RiccatiError("sign iteration diverged", residual=change)
        if change < 1e-2:
            scale = False
        if change <= tol or (change < 1e3 * tol and change >= prev_change):
            return Z, k
        prev_change = change
    raise RiccatiError(f"sign iteration did not converge in {max_iter} steps", residual=change)


def solve_care(A: np.ndarray, B: np.ndarray, weights: LqrWeights, max_iter: int = 100) -> CareSolution:
    """Stabilizing solution of ``A^T P + P A + Q - P B R^-1 B^T P = 0``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = _require_square(A, "A")
    if B.ndim != 2 or B.shape[0] != n:
        raise ValueError(f"B must have {n} rows, got shape {B.shape}")
    Q, R = weights.Q, weights.R
    if Q.shape != (n, n) or R.shape != (B.shape[1], B.shape[1]):
        raise ValueError("weight dimensions do not match (A, B)")

    G = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])
    W, iterations = matrix_sign(H, max_iter=max_iter)

    # Stable invariant subspace of H is the null space of (W + I).
    W11, W12 = W[:n, :n], W[:n, n:]
    W21, W22 = W[n:, :n], W[n:, n:]
    eye = np.eye(n)
    lhs = np.vstack([W12, W22 + eye])
    rhs = -np.vstack([W11 + eye, W21])
    P, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    P = 0.5 * (P + P.T)
    sign_residual = float(np.linalg.norm(care_residual(A, B, Q, R, P)))

    # One Kleinman-Newton step.
    try:
        P = solve_lyapunov(A - G @ P, Q + P @ G @ P)
    except LyapunovError as exc:
        raise RiccatiError(
            "Newton refinement failed: sign-function solution is not stabilizing",
            residual=sign_residual,
        ) from exc

    residual = float(np.linalg.norm(care_residual(A, B, Q, R, P)))
    if not np.all(np.isfinite(P)):
        raise RiccatiError("non-finite Riccati solution", residual=residual)
    K = lqr_gain(P, B, R)
    logger.debug("CARE: %d sign iterations, residual %.3e -> %.3e", iterations, sign_residual, residual)
    return CareSolution(P=P, K=K, residual_norm=residual, iterations=iterations,
                        sign_residual_norm=sign_residual)


def lqr_gain(solution, B: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``K = R^-1 B^T P``; accepts a ``CareSolution`` or a bare ``P``."""
    P = solution.P if isinstance(solution, CareSolution) else np.asarray(solution, dtype=float)
    B = np.asarray(B, dtype=float)
    R = np.asarray(R, dtype=float)
    if B.shape[0] != P.shape[0] or R.shape != (B.shape[1], B.shape[1]):
        raise ValueError("dimension mismatch between P, B and R")
    return np.linalg.solve(R, B.T @ P)


def is_hurwitz(A: np.ndarray) -> bool:
    """Lyapunov certificate: ``A^T P + P A + I = 0`` has a positive definite P."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        return False
    try:
        P = solve_lyapunov(A, np.eye(A.shape[0]))
    except (LyapunovError, ValueError):
        return False
    return _is_cholesky_pd(P)


def evaluate_lqr_cost(trace, weights: LqrWeights) -> float:
    """Trapezoidal approximation of the quadratic cost along a trace.

    ``trace`` needs ``t`` (N,), ``x`` (N, n) and ``u`` (N, m).
    """
    x = np.asarray(trace.x, dtype=float)
    u = np.asarray(trace.u, dtype=float)
    if x.shape[1] != weights.Q.shape[0] or u.shape[1] != weights.R.shape[0]:
        raise ValueError("trace dimensions do not match the weights")
    integrand = np.einsum("ij,jk,ik->i", x, weights.Q, x) + np.einsum("ij,jk,ik->i", u, weights.R, u)
    return float(np.trapezoid(integrand, np.asarray(trace.t, dtype=float)))
