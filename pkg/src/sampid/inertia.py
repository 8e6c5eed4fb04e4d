"""Physically feasible rigid-body inertial parameters.

A body is described by its mass ``m``, centre of mass ``r`` and rotational
inertia ``I`` taken about the *link frame origin*.  The 4x4 pseudo-inertia

    J = [[Sigma, h], [h^T, m]],   h = m r,   Sigma = 0.5 tr(I) 1 - I

is positive definite exactly when the parameters are physically realisable.
The log-Cholesky vector ``phi`` (10 unconstrained reals) maps onto the set of
positive-definite pseudo-inertias through ``J = U U^T`` with

    U = exp(alpha) [[exp(d1), s12,     s13,     t1],
                    [0,       exp(d2), s23,     t2],
                    [0,       0,       exp(d3), t3],
                    [0,       0,       0,       1 ]]

With this layout ``mass = exp(2 alpha)``, ``com = t`` and the upper 3x3 block
of the factor is the square root of the mass-normalised second moment about
the centre of mass.

Inertia tensors given about the centre of mass (URDF convention) can be moved
to the origin with :func:`inertia_about_origin`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleParameterError, InvalidArgumentError

FEASIBILITY_FLOOR = 1e-12

# phi index layout
ALPHA = 0
D = slice(1, 4)
S12, S23, S13 = 4, 5, 6
T = slice(7, 10)


@dataclass(frozen=True)
class InertialParams:
    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        com = np.asarray(self.com, dtype=float).reshape(3)
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        if inertia.shape != (3, 3):
            raise InvalidArgumentError(f"inertia must be 3x3, got {inertia.shape}")
        scale = max(np.abs(inertia).max(), 1e-300)
        if np.abs(inertia - inertia.T).max() > 1e-12 * scale:
            raise InvalidArgumentError("inertia tensor is not symmetric")
        com.flags.writeable = False
        inertia = inertia.copy()
        inertia.flags.writeable = False
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", com)
        object.__setattr__(self, "inertia", inertia)

    @property
    def first_moment(self) -> np.ndarray:
        return self.mass * self.com

    def inertia_about_com(self) -> np.ndarray:
        return inertia_about_com(self.mass, self.com, self.inertia)

    def as_dict(self) -> dict:
        return {
            "mass": self.mass,
            "com": self.com.tolist(),
            "inertia": self.inertia.tolist(),
        }


@dataclass(frozen=True)
class PseudoInertia:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise InvalidArgumentError(f"pseudo-inertia must be 4x4, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def inertia_about_origin(mass, com, inertia_com):
    """Parallel-axis shift of a CoM-frame inertia tensor to the link origin."""
    c = np.asarray(com, dtype=float)
    return np.asarray(inertia_com, dtype=float) + mass * (c @ c * np.eye(3) - np.outer(c, c))


def inertia_about_com(mass, com, inertia_origin):
    c = np.asarray(com, dtype=float)
    return np.asarray(inertia_origin, dtype=float) - mass * (c @ c * np.eye(3) - np.outer(c, c))


def inertial_to_pseudo(p: InertialParams) -> PseudoInertia:
    sigma = 0.5 * np.trace(p.inertia) * np.eye(3) - p.inertia
    h = p.mass * p.com
    J = np.empty((4, 4))
    J[:3, :3] = sigma
    J[:3, 3] = h
    J[3, :3] = h
    J[3, 3] = p.mass
    return PseudoInertia(J)


def log_cholesky_factor(phi) -> np.ndarray:
    """Upper-triangular factor U for a log-Cholesky vector."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (10,):
        raise InvalidArgumentError(f"phi must have 10 entries, got shape {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise InvalidArgumentError("phi contains non-finite values")
    U = np.eye(4)
    U[0, 0], U[1, 1], U[2, 2] = np.exp(phi[D])
    U[0, 1], U[1, 2], U[0, 2] = phi[S12], phi[S23], phi[S13]
    U[:3, 3] = phi[T]
    return np.exp(phi[ALPHA]) * U


def phi_to_pseudo(phi) -> PseudoInertia:
    U = log_cholesky_factor(phi)
    J = U @ U.T
    return PseudoInertia(0.5 * (J + J.T))


def pseudo_to_inertial(J: PseudoInertia) -> InertialParams:
    M = J.matrix if isinstance(J, PseudoInertia) else np.asarray(J, dtype=float)
    lam = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    if not lam > 0.0:
        raise InfeasibleParameterError(
            f"pseudo-inertia is not positive definite (min eigenvalue {lam:.3e})", lam
        )
    mass = M[3, 3]
    sigma = 0.5 * (M[:3, :3] + M[:3, :3].T)
    inertia = np.trace(sigma) * np.eye(3) - sigma
    return InertialParams(mass, M[:3, 3] / mass, inertia)


def phi_to_inertial(phi) -> InertialParams:
    """Closed-form decode; avoids the eigen check since phi is always feasible."""
    phi = np.asarray(phi, dtype=float)
    U = log_cholesky_factor(phi) / np.exp(phi[ALPHA])
    mass = float(np.exp(2.0 * phi[ALPHA]))
    com = U[:3, 3].copy()
    U3 = U[:3, :3]
    sigma = mass * (U3 @ U3.T + np.outer(com, com))
    sigma = 0.5 * (sigma + sigma.T)
    return InertialParams(mass, com, np.trace(sigma) * np.eye(3) - sigma)


def inertial_to_phi(p: InertialParams) -> np.ndarray:
    """Inverse of :func:`phi_to_pseudo` for feasible parameters.

    Raises :class:`InfeasibleParameterError` carrying the smallest
    pseudo-inertia eigenvalue when ``p`` is not realisable.
    """
    J = inertial_to_pseudo(p).matrix
    lam = float(np.linalg.eigvalsh(J)[0])
    if not lam > FEASIBILITY_FLOOR:
        raise InfeasibleParameterError(
            f"infeasible inertial parameters: pseudo-inertia eigenvalue {lam:.3e}", lam
        )
    m = J[3, 3]
    r = J[:3, 3] / m
    S = (J[:3, :3] - m * np.outer(r, r)) / m
    # upper-triangular factor S = U3 U3^T via Cholesky of the index-reversed matrix
    L = np.linalg.cholesky(S[::-1, ::-1])
    U3 = L[::-1, ::-1]
    phi = np.empty(10)
    phi[ALPHA] = 0.5 * np.log(m)
    phi[D] = np.log(np.diag(U3))
    phi[S12], phi[S23], phi[S13] = U3[0, 1], U3[1, 2], U3[0, 2]
    phi[T] = r
    return phi


def is_feasible(p: InertialParams, floor: float = FEASIBILITY_FLOOR) -> bool:
    if not (np.isfinite(p.mass) and np.all(np.isfinite(p.com)) and np.all(np.isfinite(p.inertia))):
        return False
    if p.mass <= 0.0:
        return False
    return bool(np.linalg.eigvalsh(inertial_to_pseudo(p).matrix)[0] > floor)
