"""Exact oracle for the cooperative linear estimation problem.

A team of n agents observes a common scalar state through private
noisy channels and each one reports a linear estimate ``K_i * y_i``.
The team objective is a weighted mean-squared error whose first-order
optimality conditions form the linear system ``gamma @ K = eta``.
Updating all gains at once is the Jacobi iteration on that system;
updating them one at a time in index order is Gauss-Seidel. The
module exposes both iterations, their iteration matrices, and the
spectral analysis that decides which of them converges.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import linalg


class InvalidProblemError(ValueError):
    """Raised when problem parameters violate the model assumptions."""


class SplittingError(ValueError):
    """Raised when the diagonal/triangular splitting is not invertible."""


class Mode(enum.Enum):
    """Update order of the best-response iteration.

    IIBR updates every coordinate simultaneously from the previous
    iterate (Jacobi); SIBR updates coordinates one at a time in index
    order, each seeing the freshest values (Gauss-Seidel).
    """

    IIBR = "iibr"
    SIBR = "sibr"


@dataclass(frozen=True, eq=False)
class TeamEstimationProblem:
    """Instance data for the n-agent estimation problem.

    Attributes
    ----------
    p, q : float
        Diagonal and off-diagonal weights of the error-coupling matrix.
    sigma2 : float
        Common observation-noise variance, strictly positive.
    n : int
        Number of agents, at least 2.
    gamma : (n, n) ndarray
        System matrix: ``p * (1 + sigma2)`` on the diagonal, ``q`` off it.
    eta : (n,) ndarray
        Right-hand side, every entry ``p + (n - 1) * q``.
    """

    p: float
    q: float
    sigma2: float
    n: int
    gamma: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class IterationTrace:
    """Record of one run of the best-response iteration.

    ``iterates[0]`` is the initial gain vector and each later entry is
    the result of one full sweep. ``errors[t]`` is the max-norm
    distance of ``iterates[t]`` from the exact solution. ``status`` is
    one of ``"converged"``, ``"diverged"``, ``"max_sweeps"`` and
    ``sweeps`` counts the full sweeps actually performed.
    """

    mode: Mode
    iterates: tuple[np.ndarray, ...]
    errors: tuple[float, ...]
    status: str
    sweeps: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"


def build_problem(p: float, q: float, sigma2: float, n: int) -> TeamEstimationProblem:
    """Construct a validated problem instance.

    Raises
    ------
    InvalidProblemError
        If ``sigma2 <= 0``, ``n < 2``, or the diagonal weight
        ``p * (1 + sigma2)`` vanishes.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise InvalidProblemError(f"agent count must be an integer, got {n!r}")
    if n < 2:
        raise InvalidProblemError(f"need at least 2 agents, got {n}")
    if not (sigma2 > 0):
        raise InvalidProblemError(f"noise variance must be positive, got {sigma2}")
    diag = p * (1.0 + sigma2)
    if diag == 0.0:
        raise InvalidProblemError("zero diagonal: p * (1 + sigma2) must be nonzero")
    if not np.all(np.isfinite([p, q, sigma2])):
        raise InvalidProblemError("parameters must be finite")

    n = int(n)
    gamma = np.full((n, n), float(q))
    np.fill_diagonal(gamma, diag)
    eta = np.full(n, float(p) + (n - 1) * float(q))
    gamma.setflags(write=False)
    eta.setflags(write=False)
    return TeamEstimationProblem(p=float(p), q=float(q), sigma2=float(sigma2),
                                 n=n, gamma=gamma, eta=eta)


def solve_exact(problem: TeamEstimationProblem) -> np.ndarray:
    """Gain vector solving ``gamma @ K = eta`` directly.

    Raises
    ------
    linalg.SingularMatrixError
        If the system matrix is singular.
    """
    return linalg.solve_dense(problem.gamma, problem.eta)


def iteration_matrix(problem: TeamEstimationProblem, mode: Mode) -> np.ndarray:
    """Error-propagation matrix of one sweep.

    With ``gamma = D + L + U`` (diagonal / strict lower / strict upper),
    IIBR yields ``-D^{-1} (L + U)`` and SIBR yields ``-(D + L)^{-1} U``.
    """
    gamma = problem.gamma
    d = np.diag(gamma)
    if np.any(d == 0.0):
        raise SplittingError("gamma has a zero diagonal entry; splitting undefined")
    n = problem.n
    lower = np.tril(gamma, -1)
    upper = np.triu(gamma, 1)
    if mode is Mode.IIBR:
        return -(lower + upper) / d[:, None]
    # Forward substitution column by column: (D + L) X = -U.
    dl = np.diag(d) + lower
    out = np.empty((n, n))
    for j in range(n):
        rhs = -upper[:, j]
        x = np.zeros(n)
        for i in range(n):
            x[i] = (rhs[i] - dl[i, :i] @ x[:i]) / dl[i, i]
        out[:, j] = x
    return out


def spectral_radius(a) -> float:
    """Largest eigenvalue modulus; see :func:`mtlearn.linalg.spectral_radius`."""
    return linalg.spectral_radius(a)


def _sweep(problem: TeamEstimationProblem, mode: Mode, k: np.ndarray) -> np.ndarray:
    gamma, eta, n = problem.gamma, problem.eta, problem.n
    if mode is Mode.IIBR:
        new = np.empty(n)
        for i in range(n):
            new[i] = (eta[i] - gamma[i, :i] @ k[:i] - gamma[i, i + 1:] @ k[i + 1:]) / gamma[i, i]
        return new
    new = k.copy()
    for i in range(n):
        new[i] = (eta[i] - gamma[i, :i] @ new[:i] - gamma[i, i + 1:] @ new[i + 1:]) / gamma[i, i]
    return new


def run_br_iteration(problem: TeamEstimationProblem, mode: Mode, k0,
                     max_sweeps: int = 1000, tol: float = 1e-10) -> IterationTrace:
    """Iterate the best-response sweep from ``k0`` and trace the error.

    The trace records the max-norm distance to the exact solution after
    every sweep (including sweep 0, the initial point). The run stops as
    soon as the error drops to ``tol`` (converged), grows past
    ``1e6 * (1 + initial error)`` or turns non-finite (diverged), or the
    sweep budget runs out.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if max_sweeps < 0:
        raise ValueError(f"max_sweeps must be nonnegative, got {max_sweeps}")
    k = np.asarray(k0, dtype=float).copy()
    if k.shape != (problem.n,):
        raise ValueError(f"initial gains must have shape ({problem.n},), got {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("initial gains must be finite")
    if np.any(np.diag(problem.gamma) == 0.0):
        raise SplittingError("gamma has a zero diagonal entry; sweeps undefined")

    k_star = solve_exact(problem)
    err0 = float(np.max(np.abs(k - k_star)))
    blowup = 1e6 * (1.0 + err0)

    iterates = [k.copy()]
    errors = [err0]
    status = "max_sweeps"
    sweeps = 0
    if err0 <= tol:
        status = "converged"
    else:
        for t in range(1, max_sweeps + 1):
            k = _sweep(problem, mode, k)
            sweeps = t
            if not np.all(np.isfinite(k)):
                iterates.append(k.copy())
                errors.append(float("inf"))
                status = "diverged"
                break
            err = float(np.max(np.abs(k - k_star)))
            iterates.append(k.copy())
            errors.append(err)
            if err <= tol:
                status = "converged"
                break
            if err > blowup:
                status = "diverged"
                break

    return IterationTrace(mode=mode, iterates=tuple(iterates), errors=tuple(errors),
                          status=status, sweeps=sweeps)


def team_mse(problem: TeamEstimationProblem, k) -> float:
    """Expected weighted team estimation error at gains ``k``, in closed form.

    The per-agent errors ``e_i = x - K_i y_i`` are coupled through the
    (p, q) weight matrix and averaged with a ``1 / n**2`` factor, so for
    ``p = q = 1`` this equals the mean-squared error of the averaged
    estimate, ``E[(x - mean_i(K_i y_i))**2]``. Its gradient is
    ``(2 / n**2) * (gamma @ k - eta)``, so the exact solve is its
    stationary point for every parameter choice.
    """
    k = np.asarray(k, dtype=float)
    if k.shape != (problem.n,):
        raise ValueError(f"gains must have shape ({problem.n},), got {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("gains must be finite")
    p, q, s2, n = problem.p, problem.q, problem.sigma2, problem.n
    one_minus = 1.0 - k
    # E[e_i e_j] = (1-K_i)(1-K_j) + sigma2 * K_i^2 * [i == j]
    diag_term = p * float(one_minus @ one_minus + s2 * (k @ k))
    sum_one_minus = float(np.sum(one_minus))
    cross_term = q * float(sum_one_minus * sum_one_minus - one_minus @ one_minus)
    return (diag_term + cross_term) / (n * n)


def team_mse_gradient(problem: TeamEstimationProblem, k) -> np.ndarray:
    """Analytic gradient of :func:`team_mse`: ``(2 / n**2) * (gamma @ k - eta)``."""
    k = np.asarray(k, dtype=float)
    n = problem.n
    return (2.0 / (n * n)) * (problem.gamma @ k - problem.eta)
