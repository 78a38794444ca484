"""Flat-connection transport, sector limits, and unipotent Stokes factors.

In each half-plane chart the transported frame is compared against the
closed-form constant-differential solution psi0; the difference G = psi
psi0^{-1} satisfies G' = G Theta with Theta exponentially small along stable
rays, so its limits exist sector by sector. Limits are computed relative to
an anchor point on the chart's central ray (initial condition Id there);
consecutive-sector limits differ by unipotent jumps in single symplectic
root slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    LeftGrid,
    OutOfChart,
    PathTooCloseToZero,
    UnstableDirection,
    ValidationError,
)
from .fields import FieldProvider
from .quartic import HalfPlaneChart, QuarticDifferential

# ---------------------------------------------------------------------------
# constant matrices

OMEGA = np.block(
    [[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]]
).astype(complex)

QMAT = np.block(
    [[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]]
).astype(complex)

# unitary diagonalizer of the constant-differential connection
S_INV = 0.5 * np.array(
    [
        [1, 1, 1, 1],
        [1, -1, -1j, 1j],
        [1, 1, -1, -1],
        [1, -1, 1j, -1j],
    ],
    dtype=complex,
)
S = S_INV.conj().T

# SU(4) conjugation between the holomorphic-frame group and standard Sp(4,R)
A_CONJ = (1.0 / np.sqrt(2.0)) * np.array(
    [
        [1, 0, 1j, 0],
        [0, 1, 0, 1j],
        [1, 0, -1j, 0],
        [0, 1, 0, -1j],
    ],
    dtype=complex,
)

SPRIME = S @ np.diag([1.0, (1 - 1j) / np.sqrt(2), 1j, (1 + 1j) / np.sqrt(2)])

U0_MAT = np.array(
    [[0, 0, 1, 0], [0, 0, 0, 1], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=complex
)
V0_MAT = np.array(
    [[0, 0, 0, 1], [0, 0, 1, 0], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=complex
)

STOKES_ANGLES = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4, np.pi)
SECTORS = ("++", "+", "-", "--")
SECTOR_MIDPOINTS = {
    "++": np.pi / 8,
    "+": 3 * np.pi / 8,
    "-": 5 * np.pi / 8,
    "--": 7 * np.pi / 8,
}
# unipotent slot patterns (row, col, coefficient) in the S-conjugated frame;
# tied slots are forced by symplecticity w.r.t. the conjugated form S^T Omega S
UNIPOTENT_SLOTS = {
    ("++", "+"): (((0, 1), 1.0), ((3, 2), 1j)),
    ("+", "-"): (((3, 1), 1.0),),
    ("-", "--"): (((2, 1), 1.0), ((3, 0), -1j)),
}


def sector_of(theta: float) -> str:
    t = theta % np.pi
    for lo, label in zip(STOKES_ANGLES[:-1], SECTORS):
        if lo < t < lo + np.pi / 4:
            return label
    raise UnstableDirection(f"theta={theta} lies on a Stokes direction")


def symplectic_defect(M: np.ndarray) -> float:
    return float(np.max(np.abs(M.T @ OMEGA @ M - OMEGA)))


@dataclass
class TransportMatrix:
    """4x4 transport with an accumulated scalar log-scale: true = e^scale * M."""

    matrix: np.ndarray
    log_scale: float = 0.0

    def unscaled(self) -> np.ndarray:
        return np.exp(self.log_scale) * self.matrix

    def det_defect(self) -> float:
        return abs(np.linalg.det(self.matrix) * np.exp(4 * self.log_scale) - 1.0)

    def symplectic_defect(self) -> float:
        return float(
            np.max(
                np.abs(
                    np.exp(2 * self.log_scale) * self.matrix.T @ OMEGA @ self.matrix
                    - OMEGA
                )
            )
        )


def psi0(w: complex) -> np.ndarray:
    """psi0(w) = S diag(e^{2Re w}, e^{-2Im w}, e^{-2Re w}, e^{2Im w}) S^{-1}."""
    x, y = w.real, w.imag
    d = np.array([np.exp(2 * x), np.exp(-2 * y), np.exp(-2 * x), np.exp(2 * y)])
    return (S * d) @ S_INV


def psi0_diag_exponents(w: complex) -> np.ndarray:
    """Exponents d with psi0 = S diag(e^d) S^{-1}; additive in w."""
    x, y = w.real, w.imag
    return np.array([2 * x, -2 * y, -2 * x, 2 * y])


# ---------------------------------------------------------------------------
# error matrix R'

_I_POW = 1j ** np.arange(4)
_K_PHASE = (-1j) ** np.arange(4)  # i^{1-k} for k = 1..4 equals i * (-i)^k ... computed below


def _rprime_channels(ut1, ut2, du1_w, du2_w, floor):
    """Derivative channels P_m and exponential channels E_m, m = (k-l) mod 4.

    Uses expm1 so the exponentially small far-field values survive; channels
    whose magnitude is below the provider's error floor are zeroed, since
    they would otherwise inject amplified interpolation noise into the
    conjugated ODE.
    """
    s = du1_w + du2_w
    d = du1_w - du2_w
    P = np.array([0.0, (1 + 1j) * s, 2.0 * d, (1 - 1j) * s], dtype=complex)
    a = np.expm1(-2.0 * ut1)
    b = np.expm1(2.0 * ut2)
    c = np.expm1(ut1 - ut2)
    E = np.array([a + 2 * c + b, a - b, a + b - 2 * c, a - b], dtype=complex)
    P[np.abs(P) < floor] = 0.0
    E[np.abs(E) < floor] = 0.0
    return P, E


def error_matrix_values(ut1, ut2, du1_w, du2_w, theta, floor=0.0) -> np.ndarray:
    """R' at a point of a chart, from utilde values and d/dw derivatives."""
    P, E = _rprime_channels(ut1, ut2, du1_w, du2_w, floor)
    eip = 0.25 * np.exp(1j * theta)
    eim = 0.25 * np.exp(-1j * theta)
    k = np.arange(4)[:, None]
    l = np.arange(4)[None, :]
    m = (k - l) % 4
    phase = 1j ** (1 - (k + 1))  # i^{1-k} with k = 1..4
    R = eip * P[m] + eim * phase * E[m]
    return R


def error_matrix(
    provider: FieldProvider,
    chart: HalfPlaneChart,
    z: complex,
    theta: float,
    floor: float | None = None,
) -> np.ndarray:
    """R'(z) for a ray of chart-angle theta through the chart point z."""
    if not chart.contains(z):
        raise OutOfChart(f"{z} is not in chart {chart.index}")
    if not provider.contains(z):
        raise LeftGrid(f"{z} outside the field data")
    root = chart.root_at(z)
    ut1, ut2 = provider.utilde(z)
    du1, du2 = provider.grad_utilde(z)
    if floor is None:
        floor = 10.0 * provider.abs_error
    return error_matrix_values(ut1, ut2, du1 / root, du2 / root, theta, floor)


# ---------------------------------------------------------------------------
# sector limits


@dataclass
class SectorLimit:
    chart_index: int
    sector: str
    theta: float
    L: np.ndarray
    K: np.ndarray
    anchor_w: complex
    anchor_z: complex
    s_end: float
    final_theta_norm: float
    theta_trace: list = field(default_factory=list)
    converged: bool = True

    @property
    def mu_slot(self):  # convenience for diagnostics
        return self.K


def _ray_rhs_factory(q, provider, theta, floor, exp_cap=400.0):
    eith = np.exp(1j * theta)
    krange = np.arange(4)

    def rhs(s, y):
        K = y[:32].view(complex).reshape(4, 4)
        z = complex(y[32], y[33])
        root = complex(y[34], y[35])
        ut1, ut2 = provider.utilde(z)
        du1, du2 = provider.grad_utilde(z)
        R = error_matrix_values(ut1, ut2, du1 / root, du2 / root, theta, floor)
        dw = s * eith
        d = psi0_diag_exponents(dw)
        expo = d[:, None] - d[None, :]
        W = np.where(R != 0, np.exp(np.minimum(expo, exp_cap)), 0.0)
        theta_hat = R * W
        dK = K @ theta_hat
        dz = eith / root
        droot = eith * complex(q.derivative(z)) / (4.0 * complex(q(z)))
        out = np.empty(36)
        out[:32] = dK.ravel().view(float)
        out[32], out[33] = dz.real, dz.imag
        out[34], out[35] = droot.real, droot.imag
        return out

    def theta_norm(s, y):
        K = y[:32].view(complex).reshape(4, 4)
        z = complex(y[32], y[33])
        root = complex(y[34], y[35])
        ut1, ut2 = provider.utilde(z)
        du1, du2 = provider.grad_utilde(z)
        R = error_matrix_values(ut1, ut2, du1 / root, du2 / root, theta, floor)
        d = psi0_diag_exponents(s * eith)
        expo = d[:, None] - d[None, :]
        W = np.where(R != 0, np.exp(np.minimum(expo, exp_cap)), 0.0)
        return float(np.linalg.norm(R * W)), z

    return rhs, theta_norm


def integrate_sector_limit(
    q: QuarticDifferential,
    provider: FieldProvider,
    chart: HalfPlaneChart,
    theta: float,
    s_max: float = 30.0,
    tol: float = 1e-9,
    anchor_height: float | None = None,
    rtol: float = 1e-10,
    chunk: float = 1.0,
) -> SectorLimit:
    """Limit of psi psi0^{-1} along the ray w = anchor + s e^{i theta}.

    The initial condition is Id at the anchor on the chart's central ray,
    so the limit is relative to the chart entry frame. Integration runs the
    conjugated generator D(dw) R' D(dw)^{-1} with adaptive RK, stopping when
    its norm drops below ``tol`` or s reaches s_max.
    """
    t = theta % np.pi
    sector = sector_of(theta)  # raises UnstableDirection on Stokes rays
    if anchor_height is None:
        anchor_height = chart.base_height
    w_b = 1j * anchor_height
    z_b = (
        chart.base
        if abs(anchor_height - chart.base_height) < 1e-14
        else chart.from_natural(w_b)
    )
    root_b = chart.root_at(z_b)
    floor = 10.0 * provider.abs_error
    rhs, theta_norm = _ray_rhs_factory(q, provider, t, floor)

    y = np.empty(36)
    y[:32] = np.eye(4, dtype=complex).ravel().view(float)
    y[32], y[33] = z_b.real, z_b.imag
    y[34], y[35] = root_b.real, root_b.imag

    s = 0.0
    trace = []
    norm0, _ = theta_norm(0.0, y)
    trace.append((0.0, norm0))
    converged = norm0 < tol
    while s < s_max and not converged:
        s_next = min(s + chunk, s_max)
        sol = solve_ivp(
            rhs, (s, s_next), y, method="RK45", rtol=rtol, atol=1e-13, dense_output=False
        )
        if not sol.success:
            raise LeftGrid(f"ray integration failed at s={s}: {sol.message}")
        y = sol.y[:, -1]
        # snap the tracked fourth root back onto an exact root of q
        z = complex(y[32], y[33])
        root = complex(y[34], y[35])
        cands = complex(q(z)) ** 0.25 * (1j ** np.arange(4))
        root = complex(cands[np.argmin(np.abs(cands - root))])
        y[34], y[35] = root.real, root.imag
        s = s_next
        nrm, z = theta_norm(s, y)
        trace.append((s, nrm))
        if not provider.contains(z):
            if nrm > tol:
                raise LeftGrid(
                    f"ray left the field data at z={z} with |Theta|={nrm:.2e} > tol"
                )
            converged = True
            break
        if nrm < tol:
            converged = True
    K = y[:32].view(complex).reshape(4, 4).copy()
    L = S @ K @ S_INV
    return SectorLimit(
        chart_index=chart.index,
        sector=sector,
        theta=t,
        L=L,
        K=K,
        anchor_w=w_b,
        anchor_z=z_b,
        s_end=s,
        final_theta_norm=trace[-1][1],
        theta_trace=trace,
        converged=converged,
    )


def unipotent_factor(L_a: np.ndarray, L_b: np.ndarray, adjacency=("+", "-")):
    """Conjugated jump U = S^{-1} L_a^{-1} L_b S and its slot decomposition.

    Returns (mu, offslot_residual): mu read from the adjacency's primary
    slot, residual the Frobenius norm of U - Id - mu * (slot pattern). The
    +/- adjacency jumps in the (4,2) entry alone; the ++/+ and -/-- ones jump
    in a tied pair of entries forced by symplecticity.
    """
    key = tuple(adjacency)
    if key not in UNIPOTENT_SLOTS:
        raise ValidationError(f"unknown adjacency {adjacency}")
    U = S_INV @ np.linalg.solve(L_a, L_b) @ S
    slots = UNIPOTENT_SLOTS[key]
    (r0, c0), coef0 = slots[0]
    mu = U[r0, c0] / coef0
    D = U - np.eye(4)
    for (r, c), coef in slots:
        D[r, c] -= mu * coef
    return complex(mu), float(np.linalg.norm(D)), U


# ---------------------------------------------------------------------------
# full frame transport


def connection_matrix(q: QuarticDifferential, provider: FieldProvider, z: complex, theta: float) -> np.ndarray:
    """M(z) with psi' = psi M along a path of direction theta.

    M = e^{i theta} (D_H + phi) + e^{-i theta} phi^{*H}; D_H is the Chern
    connection of the diagonal metric, phi the Higgs field.
    """
    u1, u2 = provider.u(z)
    du1, du2 = provider.grad_u(z)
    qa = complex(q(z))
    phi = np.zeros((4, 4), dtype=complex)
    phi[0, 2] = qa
    phi[1, 3] = 1.0
    phi[2, 1] = 1.0
    phi[3, 0] = 1.0
    DH = np.diag([-du1, du2, du1, -du2]).astype(complex)
    V = np.zeros((4, 4), dtype=complex)
    e12 = np.exp(u1 - u2)
    V[0, 3] = e12
    V[1, 2] = e12
    V[2, 0] = np.conj(qa) * np.exp(-2.0 * u1)
    V[3, 1] = np.exp(2.0 * u2)
    eith = np.exp(1j * theta)
    return eith * (DH + phi) + np.conj(eith) * V


def transport_frame(
    q: QuarticDifferential,
    provider: FieldProvider,
    path,
    rtol: float = 1e-10,
    renorm_arc: float = 1.0,
    min_zero_clearance: float | None = None,
) -> TransportMatrix:
    """Path-ordered transport psi along a polyline, with renormalization.

    ``path`` is a sequence of waypoints starting at the basepoint. Entries
    grow like e^{2s}, so after every unit of arc length the matrix is
    rescaled by its max modulus and the log factor accumulated. Interior
    path points must keep ``min_zero_clearance`` distance from the zeros of
    q when a clearance is requested.
    """
    path = [complex(p) for p in path]
    if len(path) < 2:
        return TransportMatrix(np.eye(4, dtype=complex), 0.0)
    if min_zero_clearance:
        zeros = q.zeros()
        for a, b in zip(path[:-1], path[1:]):
            for t in np.linspace(0.15, 0.85, 8):
                p = a + (b - a) * t
                if zeros.size and np.min(np.abs(p - zeros)) < min_zero_clearance:
                    raise PathTooCloseToZero(
                        f"path point {p} within {min_zero_clearance} of a zero"
                    )

    psi = np.eye(4, dtype=complex)
    log_scale = 0.0

    for a, b in zip(path[:-1], path[1:]):
        seg = b - a
        length = abs(seg)
        if length == 0:
            continue
        theta = float(np.angle(seg))

        def rhs(s, y, a=a, theta=theta):
            P = y.view(complex).reshape(4, 4)
            z = a + s * np.exp(1j * theta)
            M = connection_matrix(q, provider, z, theta)
            return (P @ M).ravel().view(float)

        s0 = 0.0
        while s0 < length - 1e-15:
            s1 = min(s0 + renorm_arc, length)
            sol = solve_ivp(
                rhs,
                (s0, s1),
                psi.ravel().view(float).copy(),
                method="RK45",
                rtol=rtol,
                atol=1e-13,
            )
            if not sol.success:
                raise LeftGrid(f"transport failed on segment at s={s0}")
            psi = sol.y[:, -1].view(complex).reshape(4, 4).copy()
            m = float(np.max(np.abs(psi)))
            if m > 0:
                psi /= m
                log_scale += np.log(m)
            s0 = s1
    return TransportMatrix(psi, log_scale)
