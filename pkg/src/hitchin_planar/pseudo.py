"""Lambda^2 R^4 with the signature-(3,3) wedge pairing and the H^{2,2} map.

Bivector basis order is fixed once and for all as
(e1^e2, e1^e3, e1^e4, e2^e3, e2^e4, e3^e4); the inner product is defined by
phi ^ psi = -2 <phi, psi> e1^e2^e3^e4. The dual symplectic bivector
omega* = e1^e3 + e2^e4 has <omega*, omega*> = 1; its orthogonal complement
is the R^{2,3} where the maximal surface and the boundary polygons live, and
a fixed isometric dictionary maps it onto the coordinate model used by the
polygons module (pairing x1 y3 + x2 y4 + x3 y1 + x4 y2 - x5 y5).
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .fields import FieldProvider
from .quartic import QuarticDifferential
from .symspace import metric_diag
from .transport import A_CONJ, SPRIME, transport_frame

BASIS_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# Gram matrix of the wedge pairing in the basis above: the only nonzero
# pairings are b1.b6 = -1/2, b2.b5 = +1/2, b3.b4 = -1/2.
WEDGE_GRAM = np.zeros((6, 6))
WEDGE_GRAM[0, 5] = WEDGE_GRAM[5, 0] = -0.5
WEDGE_GRAM[1, 4] = WEDGE_GRAM[4, 1] = 0.5
WEDGE_GRAM[2, 3] = WEDGE_GRAM[3, 2] = -0.5

OMEGA_STAR = np.zeros(6)
OMEGA_STAR[1] = 1.0
OMEGA_STAR[4] = 1.0


def wedge_inner(a, b) -> float:
    """<a, b> with a ^ b = -2 <a, b> e1^e2^e3^e4; symmetric, signature (3,3)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a @ WEDGE_GRAM @ b)


def wedge_square_coefficient(a) -> float:
    """Coefficient of e1^e2^e3^e4 in a ^ a; zero iff a is decomposable."""
    a = np.asarray(a)
    return float(2.0 * (a[0] * a[5] - a[1] * a[4] + a[2] * a[3]))


def wedge_of_vectors(x, y) -> np.ndarray:
    """Components of x ^ y in the fixed bivector basis."""
    x = np.asarray(x)
    y = np.asarray(y)
    return np.array([x[i] * y[j] - x[j] * y[i] for i, j in BASIS_PAIRS])


def lambda2_matrix(g: np.ndarray) -> np.ndarray:
    """Induced action of g in GL(4) on Lambda^2 R^4 (6x6 matrix)."""
    g = np.asarray(g)
    cols = [wedge_of_vectors(g[:, i], g[:, j]) for i, j in BASIS_PAIRS]
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# dictionary (omega*)^perp  <->  R^{2,3} polygon coordinates
#
# In the polygon model the pairing is <x,y> = x1 y3 + x2 y4 + x3 y1 + x4 y2
# - x5 y5. The isometry below sends the standard-flat boundary classes of
# Table "limits of the flat surface" onto the canonical quadrilateral lifts
# (e1, e2, -e3, -e4). The last-coordinate sign is pinned by requiring the
# pentagon extracted for q = z dz^4 to be future-directed.
_X5_SIGN = 1.0


def bivector_to_r23(v6) -> np.ndarray:
    """Coordinates in the polygon model of a bivector orthogonal to omega*."""
    v6 = np.asarray(v6, dtype=float)
    c = v6
    if abs(c[1] + c[4]) > 1e-8 * (1.0 + np.max(np.abs(v6))):
        raise ValidationError("bivector is not orthogonal to omega*")
    sq2 = np.sqrt(2.0)
    return np.array(
        [
            c[0] / sq2,
            -c[2] / sq2,
            -c[5] / sq2,
            c[3] / sq2,
            _X5_SIGN * c[1],
        ]
    )


def r23_to_bivector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sq2 = np.sqrt(2.0)
    c = np.zeros(6)
    c[0] = sq2 * x[0]
    c[2] = -sq2 * x[1]
    c[5] = -sq2 * x[2]
    c[3] = sq2 * x[3]
    c[1] = _X5_SIGN * x[4]
    c[4] = -_X5_SIGN * x[4]
    return c


def r23_inner(x, y) -> float:
    """The polygon-model pairing x1 y3 + x2 y4 + x3 y1 + x4 y2 - x5 y5."""
    x = np.asarray(x)
    y = np.asarray(y)
    return float(
        x[0] * y[2] + x[1] * y[3] + x[2] * y[0] + x[3] * y[1] - x[4] * y[4]
    )


# ---------------------------------------------------------------------------
# the sigma embedding


_SPRIME_INV = np.linalg.inv(SPRIME)


def real_transport(
    q: QuarticDifferential,
    provider: FieldProvider,
    z: complex,
    path=None,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
):
    """T(z) = S'^{-1} H(0)^{1/2} psi(z) H(z)^{-1/2} A, with its log scale.

    Transports the real frame directions at z into the fixed output frame of
    the basepoint fibre (the frame in which the standard flat surface takes
    its tabulated form). The matrix is real up to integration drift.
    """
    if path is None:
        path = [basepoint, z]
    T = transport_frame(q, provider, path, rtol=rtol)
    H0 = metric_diag(provider, basepoint)
    Hz = metric_diag(provider, z)
    M = _SPRIME_INV @ np.diag(H0**0.5) @ T.matrix @ np.diag(Hz**-0.5) @ A_CONJ
    return M, T.log_scale


def surface_bivector(
    q: QuarticDifferential,
    provider: FieldProvider,
    z: complex,
    path=None,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Plucker bivector of the transported symplectic plane at z (unnormalized).

    The surface plane is spanned by the second and fourth columns of the
    real transport (images of the u1/u3 frame directions); realness of the
    transport is asserted to 1e-6 relative drift.
    """
    M, _ = real_transport(q, provider, z, path, basepoint, rtol)
    scale = np.max(np.abs(M))
    if np.max(np.abs(M.imag)) > 1e-6 * scale:
        raise ValidationError(
            f"real transport has imaginary drift {np.max(np.abs(M.imag)):.2e}"
        )
    R = M.real
    return wedge_of_vectors(R[:, 1], R[:, 3])


def sigma_point(
    q: QuarticDifferential,
    provider: FieldProvider,
    z: complex,
    path=None,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
    as_r23: bool = True,
):
    """sigma~(z) = 2 f~(z) - omega*, the maximal-surface lift in H^{2,2}.

    f~ is the surface bivector normalized to <f~, omega*> = 1/2; the result
    satisfies <sigma~, sigma~> = -1 and <sigma~, omega*> = 0 by construction
    up to transport error.
    """
    beta = surface_bivector(q, provider, z, path, basepoint, rtol)
    pairing = wedge_inner(beta, OMEGA_STAR)
    if abs(pairing) < 1e-12 * np.max(np.abs(beta)):
        raise ValidationError("surface bivector is orthogonal to omega*")
    f_norm = beta / (2.0 * pairing)
    sigma6 = 2.0 * f_norm - OMEGA_STAR
    if as_r23:
        return bivector_to_r23(sigma6)
    return sigma6


def sigma_flat_closed_form(z: complex) -> np.ndarray:
    """Closed-form sigma~ for q = dz^4 in polygon coordinates.

    Derived from the explicit standard flat maximal surface: the lift is
    (e^{2x-2y}, e^{2x+2y}, -e^{-2x+2y}, -e^{-2x-2y}, 0)/2, which satisfies
    <.,.> = -1 identically.
    """
    x, y = z.real, z.imag
    return 0.5 * np.array(
        [
            np.exp(2 * x - 2 * y),
            np.exp(2 * x + 2 * y),
            -np.exp(-2 * x + 2 * y),
            -np.exp(-2 * x - 2 * y),
            0.0,
        ]
    )


# ---------------------------------------------------------------------------
# surface checks


def conformality_check(
    q: QuarticDifferential,
    provider: FieldProvider,
    z: complex,
    h_fd: float = 1e-3,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
):
    """Finite-difference first fundamental form of sigma~ at z.

    Returns (offdiag, diag_mismatch, expected) where expected = 4 h1^{-1} h2;
    conformality means <s_x, s_y> = 0 and <s_x,s_x> = <s_y,s_y> = expected.
    """
    pts = {
        "xp": z + h_fd,
        "xm": z - h_fd,
        "yp": z + 1j * h_fd,
        "ym": z - 1j * h_fd,
    }
    vals = {
        k: sigma_point(q, provider, p, path=[basepoint, z, p], rtol=rtol, as_r23=False)
        for k, p in pts.items()
    }
    sx = (vals["xp"] - vals["xm"]) / (2 * h_fd)
    sy = (vals["yp"] - vals["ym"]) / (2 * h_fd)
    u1, u2 = provider.u(z)
    expected = 4.0 * np.exp(u1 - u2)
    offdiag = wedge_inner(sx, sy)
    gxx = wedge_inner(sx, sx)
    gyy = wedge_inner(sy, sy)
    return (
        float(offdiag),
        float(abs(gxx - gyy)),
        float(expected),
        float(gxx),
        float(gyy),
    )


def harmonicity_check(
    q: QuarticDifferential,
    provider: FieldProvider,
    z: complex,
    h_fd: float = 1e-3,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
) -> float:
    """|| (s_xx + s_yy)/4 - 2 h1^{-1} h2 sigma~ || in the wedge norm.

    The coefficient is half the conformal factor: d_z d_zbar sigma = (e/2)
    sigma for a maximal surface with induced metric e |dz|^2 in H^{2,2},
    which the constant-differential closed form confirms exactly.
    """
    pts = {
        "c": z,
        "xp": z + h_fd,
        "xm": z - h_fd,
        "yp": z + 1j * h_fd,
        "ym": z - 1j * h_fd,
    }
    vals = {
        k: sigma_point(q, provider, p, path=[basepoint, z, p] if p != z else [basepoint, z],
                       rtol=rtol, as_r23=False)
        for k, p in pts.items()
    }
    lap = (
        vals["xp"] + vals["xm"] + vals["yp"] + vals["ym"] - 4 * vals["c"]
    ) / (h_fd**2) / 4.0
    u1, u2 = provider.u(z)
    resid = lap - 2.0 * np.exp(u1 - u2) * vals["c"]
    return float(np.sqrt(abs(wedge_inner(resid, resid))))


def convexity_B(provider: FieldProvider, z: complex):
    """Tangent maps B_x, B_y of the Grassmannian immersion, and determinants.

    B_x = h1^{-1/2} h2^{1/2} diag(1,-1), B_y = h1^{-1/2} h2^{1/2} antidiag(-1,-1);
    both invertible with det = -h1^{-1} h2, and both intertwine the complex
    structures J1 = [[0,-1],[1,0]] and J2 = [[0,1],[-1,0]].
    """
    u1, u2 = provider.u(z)
    c = np.exp(0.5 * (u1 - u2))
    Bx = c * np.array([[1.0, 0.0], [0.0, -1.0]])
    By = c * np.array([[0.0, -1.0], [-1.0, 0.0]])
    return Bx, By, float(np.linalg.det(Bx)), float(np.linalg.det(By))
