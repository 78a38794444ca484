"""The symmetric space Sp(4,R)/U(2) as Hermitian matrices, and its flats.

Points are Omega-symplectic, Q-symmetric positive Hermitian matrices of
determinant 1; the harmonic map evaluates the solved metric in a transported
flat frame. Flats asymptotic to the surface are anchored by sector limits,
and Weyl-chamber combinatorics are handled through coordinate Lagrangian
flags of R^4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NonPositiveEigenvalue, ValidationError
from .fields import FieldProvider
from .quartic import HalfPlaneChart, QuarticDifferential
from .transport import (
    OMEGA,
    QMAT,
    SectorLimit,
    TransportMatrix,
    psi0,
    transport_frame,
)


@dataclass
class HermitianPoint:
    """Point of Sp(4,R)/U(2): positive Hermitian, det 1, Omega/Q compatible."""

    P: np.ndarray

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.P - self.P.conj().T)))

    def det_defect(self) -> float:
        return abs(np.linalg.det(self.P) - 1.0)

    def symplectic_defect(self) -> float:
        return float(np.max(np.abs(self.P.T @ OMEGA @ self.P - OMEGA)))

    def q_symmetry_defect(self) -> float:
        # P^t Q P^{-1} = Q, i.e. P^t Q = Q P
        return float(np.max(np.abs(self.P.T @ QMAT - QMAT @ self.P)))

    def max_defect(self) -> float:
        return max(
            self.hermitian_defect(),
            self.det_defect(),
            self.symplectic_defect(),
            self.q_symmetry_defect(),
        )


def metric_diag(provider: FieldProvider, z: complex) -> np.ndarray:
    """H(z) = diag(h1, h2^{-1}, h1^{-1}, h2) with h_i = e^{-u_i}."""
    u1, u2 = provider.u(z)
    return np.array([np.exp(-u1), np.exp(u2), np.exp(u1), np.exp(-u2)])


def harmonic_map(
    q: QuarticDifferential,
    provider: FieldProvider,
    z: complex,
    path=None,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
) -> HermitianPoint:
    """f(z) = P0^H conj((psi^{-1})^t) H(z) psi^{-1} P0, P0 = H(z0)^{-1/2}.

    The result is renormalized to determinant one, absorbing the transport
    scale factor. At the basepoint this is the identity coset.
    """
    if path is None:
        path = [basepoint, z]
    T = transport_frame(q, provider, path, rtol=rtol)
    psi_inv = np.linalg.inv(T.matrix)
    H = metric_diag(provider, z)
    P0 = metric_diag(provider, basepoint) ** (-0.5)
    M = np.diag(P0) @ psi_inv.conj().T @ np.diag(H) @ psi_inv @ np.diag(P0)
    det = np.linalg.det(M)
    if det.real <= 0:
        raise NonPositiveEigenvalue("harmonic map produced non-positive determinant")
    M = M / det.real ** 0.25
    M = 0.5 * (M + M.conj().T)
    return HermitianPoint(M)


def flat_point(M: np.ndarray, w: complex) -> HermitianPoint:
    """Point of the maximal flat anchored by M at natural coordinate w."""
    Y = np.linalg.inv(M @ psi0(w))
    P = Y.conj().T @ Y
    det = np.linalg.det(P).real
    P = P / det**0.25
    return HermitianPoint(0.5 * (P + P.conj().T))


def symmetric_distance(P1: HermitianPoint, P2: HermitianPoint) -> float:
    """sqrt(sum log^2 lambda_i) over generalized eigenvalues of (P2, P1)."""
    lam = scipy.linalg.eigh(P2.P, P1.P, eigvals_only=True)
    if np.any(lam <= 0):
        raise NonPositiveEigenvalue("matrices are not a positive-definite pair")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


@dataclass
class FlatAsymptotics:
    chart_index: int
    sector: str
    anchor: np.ndarray
    s_values: np.ndarray
    distances: np.ndarray


def flat_anchor(
    q: QuarticDifferential,
    provider: FieldProvider,
    chart: HalfPlaneChart,
    limit: SectorLimit,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
) -> np.ndarray:
    """M = H(0)^{1/2} psi(0 -> anchor) L psi0(w_anchor)^{-1}, det-normalized.

    The flat through the sector limit, in the same global gauge as
    harmonic_map with the same basepoint.
    """
    path = [basepoint, limit.anchor_z]
    T = transport_frame(q, provider, path, rtol=rtol)
    psi = T.matrix  # scale absorbed by det normalization
    H0 = metric_diag(provider, basepoint)
    M = np.diag(H0**0.5) @ psi @ limit.L @ np.linalg.inv(psi0(limit.anchor_w))
    det = np.linalg.det(M)
    M = M / det ** (1.0 / 4.0)
    return M


def flat_asymptotics(
    q: QuarticDifferential,
    provider: FieldProvider,
    chart: HalfPlaneChart,
    limit: SectorLimit,
    s_values=None,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
) -> FlatAsymptotics:
    """Distance from the surface to the comparison flat along the sector ray."""
    if s_values is None:
        s_values = np.linspace(0.5, 6.0, 8)
    M = flat_anchor(q, provider, chart, limit, basepoint, rtol)
    theta = limit.theta
    dists = []
    for s in s_values:
        w = limit.anchor_w + s * np.exp(1j * theta)
        z = chart.from_natural(w)
        f = harmonic_map(q, provider, z, path=[basepoint, limit.anchor_z, z], rtol=rtol)
        F = flat_point(M, w)
        dists.append(symmetric_distance(f, F))
    return FlatAsymptotics(
        chart_index=chart.index,
        sector=limit.sector,
        anchor=M,
        s_values=np.asarray(s_values, dtype=float),
        distances=np.asarray(dists),
    )


# ---------------------------------------------------------------------------
# Weyl chamber flags

# coordinate Lagrangians of omega = dx1^dx3 + dx2^dx4 and their 8 flags
_LAGRANGIAN_PAIRS = ((0, 1), (0, 3), (2, 1), (2, 3))
STANDARD_FLAGS = tuple(
    (line, pair) for pair in _LAGRANGIAN_PAIRS for line in pair
)


def _preserves_line(U: np.ndarray, i: int, tol: float) -> bool:
    v = U[:, i]
    off = np.delete(v, i)
    return bool(np.max(np.abs(off)) <= tol * max(1.0, abs(v[i])))


def _preserves_plane(U: np.ndarray, pair, tol: float) -> bool:
    cols = U[:, list(pair)]
    other = [k for k in range(4) if k not in pair]
    return bool(np.max(np.abs(cols[other, :])) <= tol * max(1.0, np.max(np.abs(cols))))


def weyl_flags_preserved(U: np.ndarray, tol: float = 1e-10):
    """Subset of the 8 standard Lagrangian flags mapped to themselves by U.

    Flags are (line index, Lagrangian index pair) over the coordinate
    Lagrangians of the standard symplectic form; U preserves the flag when
    it fixes both subspaces.
    """
    U = np.asarray(U)
    preserved = []
    for line, pair in STANDARD_FLAGS:
        if _preserves_line(U, line, tol) and _preserves_plane(U, pair, tol):
            preserved.append((line, pair))
    return preserved


# ---------------------------------------------------------------------------
# induced metric


def induced_metric_density(
    q: QuarticDifferential, provider: FieldProvider, z: complex
) -> float:
    """g_f = h1^2 |q|^2 + 2 h2 h1^{-1} + h2^{-2} with h_i = e^{-u_i}."""
    u1, u2 = provider.u(z)
    aq2 = abs(complex(q(z))) ** 2
    return float(
        np.exp(-2 * u1) * aq2 + 2 * np.exp(u1 - u2) + np.exp(2 * u2)
    )


def induced_metric_density_grid(q: QuarticDifferential, fields) -> np.ndarray:
    Z = fields.grid.zgrid()
    aq2 = np.abs(q(Z)) ** 2
    return (
        np.exp(-2 * fields.u1) * aq2
        + 2 * np.exp(fields.u1 - fields.u2)
        + np.exp(2 * fields.u2)
    )
