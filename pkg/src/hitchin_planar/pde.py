"""Solvers for the coupled planar self-duality system.

    Delta u1 = e^{u1-u2} - e^{-2 u1} |q|^2
    Delta u2 = e^{2 u2}  - e^{u1-u2}

with Delta = d_z d_zbar = (d_xx + d_yy)/4, on a truncated square with the
far-field Dirichlet data (3/4 log|q|, 1/4 log|q|). The monotone scheme
follows the two-step iteration bracketed between an explicit sub-solution
(flat data cut off by a hyperbolic barrier near the zeros) and super-solution
(3/8 log(|q|^2+C), 1/8 log(|q|^2+3C)); a damped Newton solver provides the
fast path and is cross-checked against the monotone one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    BoundaryHitsZero,
    Diverged,
    MaxIterationsExceeded,
    NotMonomial,
    SupersolutionConstantTooSmall,
    ValidationError,
)
from .fields import FieldPair, Grid, SolverConfig, log_abs_q
from .quartic import QuarticDifferential, q_distance_grid

# ---------------------------------------------------------------------------
# right-hand sides


def F1(u1, u2, absq2):
    return np.exp(u1 - u2) - np.exp(-2.0 * u1) * absq2


def F2(u1, u2):
    return np.exp(2.0 * u2) - np.exp(u1 - u2)


def dF1_du1(u1, u2, absq2):
    return np.exp(u1 - u2) + 2.0 * np.exp(-2.0 * u1) * absq2


def dF2_du2(u1, u2):
    return 2.0 * np.exp(2.0 * u2) + np.exp(u1 - u2)


# ---------------------------------------------------------------------------
# sub/super solutions


def barrier_radius(q: QuarticDifferential) -> float:
    """Smallest d > 4/3 with all zeros and the |q| <= 1 region in |z| < d.

    Uses coefficient bounds: the Cauchy root bound for the zeros and a
    lower bound |q(z)| >= |a_n| d^n - sum |a_i| d^i >= 1 for the unit-|q|
    region, refined by geometric search.
    """
    a = np.abs(q.coeffs)
    n = q.degree
    d = 4.0 / 3.0 + 1e-2
    if n == 0:
        return d
    d = max(d, 1.0 + np.max(a[:-1]) / a[-1])

    def min_mod(r):
        return a[-1] * r**n - sum(a[i] * r**i for i in range(n))

    while min_mod(d) < 1.0:
        d *= 1.1
    return float(d)


def hyperbolic_density(z: np.ndarray, d: float) -> np.ndarray:
    """Density of the curvature -2 metric on B(0, 2d): (4d/(4d^2-|z|^2))^2 / 2."""
    return 0.5 * (4.0 * d / (4.0 * d * d - np.abs(z) ** 2)) ** 2


def sub_super(q: QuarticDifferential, grid: Grid, C: float):
    """Explicit sub/super-solution bracket; validates the constant C.

    Returns (lower, upper) FieldPairs. Raises SupersolutionConstantTooSmall
    when the differential inequalities for the super-solution family fail at
    any node, in which case the caller doubles C and retries.
    """
    if C <= 1:
        raise ValidationError("supersolution constant must exceed 1")
    Z = grid.zgrid()
    absq = np.abs(q(Z))
    absq2 = absq**2
    lq = log_abs_q(q, Z)

    d = barrier_radius(q)
    lower1 = 0.75 * lq.copy()
    lower2 = 0.25 * lq.copy()
    inside = np.abs(Z) <= d
    g = hyperbolic_density(Z[inside], d)
    lower1[inside] = np.maximum(lower1[inside], 1.5 * np.log(g))
    lower2[inside] = np.maximum(lower2[inside], 0.5 * np.log(g))

    upper1 = 0.375 * np.log(absq2 + C)
    upper2 = 0.125 * np.log(absq2 + 3.0 * C)

    # super-solution inequalities, multiplied through to polynomial form
    dq2 = np.abs(q.derivative(Z)) ** 2
    fC = (
        (absq2 + C) ** 2.375 * (absq2 + 3 * C) ** -0.125
        - (absq2 + C) ** 1.25 * absq2
        - 0.375 * dq2 * C
    )
    gC = (
        (absq2 + 3 * C) ** 2.25
        - (absq2 + C) ** 0.375 * (absq2 + 3 * C) ** 1.875
        - 0.375 * dq2 * C
    )
    if fC.min() < 0 or gC.min() < 0:
        raise SupersolutionConstantTooSmall(
            f"C={C}: min f_C={fC.min():.3e}, min g_C={gC.min():.3e}"
        )
    if np.any(lower1 > upper1) or np.any(lower2 > upper2):
        raise SupersolutionConstantTooSmall(f"C={C}: bracket ordering fails")
    lo = FieldPair(grid, lower1, lower2, {"kind": "sub", "C": C, "d": d})
    hi = FieldPair(grid, upper1, upper2, {"kind": "super", "C": C, "d": d})
    return lo, hi


def find_supersolution_C(q: QuarticDifferential, grid: Grid, C0: float = 4.0):
    C = max(C0, 1.5)
    for _ in range(60):
        try:
            return C, sub_super(q, grid, C)
        except SupersolutionConstantTooSmall:
            C *= 2.0
    raise SupersolutionConstantTooSmall("no admissible C up to 2^60")


# ---------------------------------------------------------------------------
# discrete operators


class HelmholtzSolver:
    """Prefactorized solver for (omega*I - Delta_h) u = rhs on interior nodes.

    Delta_h is the five-point stencil of (d_xx + d_yy)/4. The matrix is
    symmetric positive definite and extremely well conditioned thanks to the
    omega shift; the LU factorization is reused across all iterations and
    every solve is verified against the 1e-10 relative-residual contract.
    """

    def __init__(self, grid: Grid, omega: float, linear_tol: float = 1e-10):
        self.grid = grid
        self.omega = omega
        self.linear_tol = linear_tol
        n = grid.N - 2
        h2 = grid.h**2
        k = 1.0 / (4.0 * h2)
        main = np.full(n * n, omega + 4.0 * k)
        offx = np.full(n * n - 1, -k)
        offx[np.arange(1, n * n) % n == 0] = 0.0
        offy = np.full(n * n - n, -k)
        self._A = sp.diags(
            [main, offx, offx, offy, offy], [0, 1, -1, n, -n], format="csc"
        )
        self._lu = spla.splu(self._A)
        self._n = n
        self._k = k

    def solve(self, rhs_interior: np.ndarray, boundary: np.ndarray) -> np.ndarray:
        """Solve with Dirichlet data; returns full-grid array including boundary."""
        n, k = self._n, self._k
        b = rhs_interior.copy()
        b[0, :] += k * boundary[0, 1:-1]
        b[-1, :] += k * boundary[-1, 1:-1]
        b[:, 0] += k * boundary[1:-1, 0]
        b[:, -1] += k * boundary[1:-1, -1]
        x = self._lu.solve(b.ravel())
        res = self._A @ x - b.ravel()
        rel = np.linalg.norm(res) / max(np.linalg.norm(b), 1e-300)
        if rel > self.linear_tol:
            raise Diverged(f"linear solve residual {rel:.2e} above {self.linear_tol}")
        out = boundary.copy()
        out[1:-1, 1:-1] = x.reshape(n, n)
        return out


def laplacian_interior(u: np.ndarray, h: float) -> np.ndarray:
    """Delta u = (d_xx + d_yy)/4 by the five-point stencil, interior nodes."""
    return (
        u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]
    ) / (4.0 * h * h)


def _check_boundary_clear(q: QuarticDifferential, grid: Grid):
    zeros = q.zeros()
    if zeros.size == 0:
        return
    dist = np.minimum(
        grid.R - np.abs(zeros.real), grid.R - np.abs(zeros.imag)
    )
    if np.min(dist) < grid.h:
        raise BoundaryHitsZero("a zero of q lies within one grid cell of the boundary")


def _omegas_from_bracket(lo: FieldPair, hi: FieldPair, absq2: np.ndarray):
    corners1 = [
        dF1_du1(a, b, absq2)
        for a in (lo.u1, hi.u1)
        for b in (lo.u2, hi.u2)
    ]
    corners2 = [
        dF2_du2(a, b)
        for a in (lo.u1, hi.u1)
        for b in (lo.u2, hi.u2)
    ]
    return float(np.max(corners1)), float(np.max(corners2))


@dataclass
class MonotoneDiagnostics:
    iterations: int = 0
    converged: bool = False
    C: float = 0.0
    omega1: float = 0.0
    omega2: float = 0.0
    chain_violation: float = 0.0
    bracket_gap: float = np.inf
    sup_changes: list = field(default_factory=list)
    recorded_gaps: list = field(default_factory=list)


def solve_monotone(q: QuarticDifferential, grid: Grid, config: SolverConfig | None = None):
    """Monotone two-step iteration between the sub/super bracket.

    Runs the ascending chain from the sub-solution and the descending chain
    from the super-solution simultaneously; stops when both chains move less
    than the tolerance in sup norm and returns the bracket midpoint. The
    per-iterate monotonicity violations and the final bracket gap are
    recorded in the diagnostics (fields.meta['diagnostics']).
    """
    config = config or SolverConfig()
    grid.validate_for(q)
    _check_boundary_clear(q, grid)

    Z = grid.zgrid()
    absq2 = np.abs(q(Z)) ** 2
    lq = log_abs_q(q, Z)
    boundary1 = 0.75 * lq
    boundary2 = 0.25 * lq

    C, (lo, hi) = find_supersolution_C(q, grid, config.supersolution_C)
    om1 = config.omega1 or 0.0
    om2 = config.omega2 or 0.0
    ob1, ob2 = _omegas_from_bracket(lo, hi, absq2)
    om1, om2 = max(om1, ob1), max(om2, ob2)

    solver1 = HelmholtzSolver(grid, om1, config.linear_tol)
    solver2 = HelmholtzSolver(grid, om2, config.linear_tol)
    aq2_int = absq2[1:-1, 1:-1]

    def step(u1, u2):
        """One iterate of Eq-scheme: u1 first, then u2 with the fresh u1."""
        rhs1 = om1 * u1[1:-1, 1:-1] - F1(u1[1:-1, 1:-1], u2[1:-1, 1:-1], aq2_int)
        new1 = solver1.solve(rhs1, boundary1)
        rhs2 = om2 * u2[1:-1, 1:-1] - F2(new1[1:-1, 1:-1], u2[1:-1, 1:-1])
        new2 = solver2.solve(rhs2, boundary2)
        return new1, new2

    diag = MonotoneDiagnostics(C=C, omega1=om1, omega2=om2)
    lo1, lo2 = lo.u1, lo.u2
    hi1, hi2 = hi.u1, hi.u2
    # Dirichlet data replaces the bracket values on the boundary ring
    for arr, bnd in ((lo1, boundary1), (lo2, boundary2), (hi1, boundary1), (hi2, boundary2)):
        arr[0, :], arr[-1, :], arr[:, 0], arr[:, -1] = (
            bnd[0, :], bnd[-1, :], bnd[:, 0], bnd[:, -1],
        )

    for it in range(1, config.max_iterations + 1):
        n_lo1, n_lo2 = step(lo1, lo2)
        n_hi1, n_hi2 = step(hi1, hi2)
        viol = max(
            float(np.max(lo1 - n_lo1)), float(np.max(lo2 - n_lo2)),
            float(np.max(n_hi1 - hi1)), float(np.max(n_hi2 - hi2)),
        )
        diag.chain_violation = max(diag.chain_violation, viol)
        change = max(
            float(np.max(np.abs(n_lo1 - lo1))), float(np.max(np.abs(n_lo2 - lo2))),
            float(np.max(np.abs(n_hi1 - hi1))), float(np.max(np.abs(n_hi2 - hi2))),
        )
        lo1, lo2, hi1, hi2 = n_lo1, n_lo2, n_hi1, n_hi2
        gap = max(float(np.max(hi1 - lo1)), float(np.max(hi2 - lo2)))
        if it % config.record_every == 0:
            diag.sup_changes.append(change)
            diag.recorded_gaps.append(gap)
        diag.iterations = it
        diag.bracket_gap = gap
        if change < config.tolerance:
            diag.converged = True
            break
    if not diag.converged:
        raise MaxIterationsExceeded(
            f"monotone scheme: {config.max_iterations} iterations, "
            f"last change {change:.3e}, bracket gap {diag.bracket_gap:.3e}"
        )
    u1 = 0.5 * (lo1 + hi1)
    u2 = 0.5 * (lo2 + hi2)
    meta = {
        "method": "monotone",
        "C": C,
        "omega1": om1,
        "omega2": om2,
        "diagnostics": diag,
        "abs_error": max(diag.bracket_gap, 10 * config.tolerance),
    }
    return FieldPair(grid, u1, u2, meta)


# ---------------------------------------------------------------------------
# Newton solver


def _newton_jacobian(grid: Grid, u1, u2, absq2):
    n = grid.N - 2
    h2 = grid.h**2
    k = 1.0 / (4.0 * h2)
    offx = np.full(n * n - 1, k)
    offx[np.arange(1, n * n) % n == 0] = 0.0
    offy = np.full(n * n - n, k)
    i1, i2 = u1[1:-1, 1:-1].ravel(), u2[1:-1, 1:-1].ravel()
    aq = absq2[1:-1, 1:-1].ravel()
    lap_main = -4.0 * k
    A11 = sp.diags(
        [lap_main - dF1_du1(i1, i2, aq), offx, offx, offy, offy],
        [0, 1, -1, n, -n],
    )
    A22 = sp.diags(
        [lap_main - dF2_du2(i1, i2), offx, offx, offy, offy],
        [0, 1, -1, n, -n],
    )
    e12 = np.exp(i1 - i2)
    D12 = sp.diags(e12)   # -dF1/du2
    D21 = sp.diags(e12)   # -dF2/du1
    return sp.bmat([[A11, D12], [D21, A22]], format="csc")


def residual(q: QuarticDifferential, fields: FieldPair):
    """(Delta u1 - F1, Delta u2 - F2) on interior nodes (zero on the border)."""
    grid = fields.grid
    Z = grid.zgrid()
    absq2 = np.abs(q(Z)) ** 2
    r1 = np.zeros_like(fields.u1)
    r2 = np.zeros_like(fields.u2)
    i1, i2 = fields.u1[1:-1, 1:-1], fields.u2[1:-1, 1:-1]
    r1[1:-1, 1:-1] = laplacian_interior(fields.u1, grid.h) - F1(i1, i2, absq2[1:-1, 1:-1])
    r2[1:-1, 1:-1] = laplacian_interior(fields.u2, grid.h) - F2(i1, i2)
    return r1, r2


def solve_newton(
    q: QuarticDifferential,
    grid: Grid,
    config: SolverConfig | None = None,
    init: FieldPair | None = None,
):
    """Damped Newton on the discretized system; fast path.

    The monotone scheme is the correctness oracle: both must agree to 1e-6
    in sup norm. Stops when the interior residual drops below the
    configured tolerance. Raises Diverged when the line search stalls.
    """
    config = config or SolverConfig(tolerance=1e-11)
    grid.validate_for(q)
    _check_boundary_clear(q, grid)

    Z = grid.zgrid()
    absq2 = np.abs(q(Z)) ** 2
    lq = log_abs_q(q, Z)
    if init is None:
        C, (lo, hi) = find_supersolution_C(q, grid, config.supersolution_C)
        u1 = 0.5 * (lo.u1 + hi.u1)
        u2 = 0.5 * (lo.u2 + hi.u2)
    else:
        u1, u2 = init.u1.copy(), init.u2.copy()
    u1[0, :], u1[-1, :], u1[:, 0], u1[:, -1] = (
        0.75 * lq[0, :], 0.75 * lq[-1, :], 0.75 * lq[:, 0], 0.75 * lq[:, -1],
    )
    u2[0, :], u2[-1, :], u2[:, 0], u2[:, -1] = (
        0.25 * lq[0, :], 0.25 * lq[-1, :], 0.25 * lq[:, 0], 0.25 * lq[:, -1],
    )

    fields = FieldPair(grid, u1, u2)
    r1, r2 = residual(q, fields)
    rnorm = max(np.max(np.abs(r1)), np.max(np.abs(r2)))
    tol = max(config.tolerance, 1e-12)
    for it in range(60):
        if rnorm < tol:
            break
        J = _newton_jacobian(grid, u1, u2, absq2)
        lu = spla.splu(J)
        rhs = np.concatenate([-r1[1:-1, 1:-1].ravel(), -r2[1:-1, 1:-1].ravel()])
        delta = lu.solve(rhs)
        n = grid.N - 2
        d1 = delta[: n * n].reshape(n, n)
        d2 = delta[n * n:].reshape(n, n)
        t = config.newton_damping
        for _ in range(40):
            t1 = u1.copy(); t2 = u2.copy()
            t1[1:-1, 1:-1] += t * d1
            t2[1:-1, 1:-1] += t * d2
            trial = FieldPair(grid, t1, t2)
            tr1, tr2 = residual(q, trial)
            tnorm = max(np.max(np.abs(tr1)), np.max(np.abs(tr2)))
            if np.isfinite(tnorm) and tnorm < rnorm * (1.0 - 0.25 * t):
                break
            t *= 0.5
        else:
            raise Diverged(f"Newton line search stalled at residual {rnorm:.3e}")
        u1, u2, r1, r2, rnorm = t1, t2, tr1, tr2, tnorm
    else:
        raise Diverged(f"Newton did not reach tolerance, residual {rnorm:.3e}")
    meta = {
        "method": "newton",
        "iterations": it,
        "residual": rnorm,
        "abs_error": max(10 * rnorm, 1e-10),
    }
    return FieldPair(grid, u1, u2, meta)


# ---------------------------------------------------------------------------
# derived quantities


@dataclass
class DecayProfile:
    r: np.ndarray
    ut1: np.ndarray
    ut2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    power_exponent_ut1: float
    rate_w1: float
    rate_w2: float


def _power_fit_last_decade(r, v, floor):
    """Log-binned least-squares slope of log v vs log r, last decade above floor.

    Samples below the reliability floor are discarded; the fit window is the
    final factor of 10 in r. Binning uniformly in log r keeps the dense
    large-r samples from dominating the fit.
    """
    m = (v > floor) & (r > 0)
    if np.count_nonzero(m) < 8:
        return np.nan
    r, v = r[m], v[m]
    rmax = r.max()
    m2 = r >= rmax / 10.0
    r, v = r[m2], v[m2]
    bins = np.geomspace(r.min(), r.max() * (1 + 1e-12), 18)
    idx = np.digitize(r, bins)
    xs, ys = [], []
    for b in np.unique(idx):
        sel = idx == b
        if np.count_nonzero(sel):
            xs.append(np.log(r[sel]).mean())
            ys.append(np.log(v[sel]).mean())
    if len(xs) < 4:
        return np.nan
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)


def _exp_rate_fit(r, v, floor, r_min=0.75):
    """Rate c in v ~ a e^{-c r}/sqrt(r): LS slope of log(v sqrt(r)) vs r."""
    m = (v > floor) & (r > r_min)
    if np.count_nonzero(m) < 8:
        return np.nan
    x, y = r[m], np.log(v[m] * np.sqrt(r[m]))
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def decay_profile(
    q: QuarticDifferential,
    fields: FieldPair,
    floor: float = 1e-5,
    max_samples: int = 6000,
) -> DecayProfile:
    """Tabulate the normalized differences against the |q|^{1/2} distance.

    utilde_1 = u1 - (3/8) log|q|^2, utilde_2 = u2 - (1/8) log|q|^2,
    w1 = utilde_1 + utilde_2, w2 = 2 (utilde_1 - utilde_2). Fits the
    power-law exponent of utilde_1 over the last reliable decade and the
    exponential rates of w1, w2. ``floor`` is the reliability cutoff below
    which samples are considered drowned by discretization error.
    """
    grid = fields.grid
    Z = grid.zgrid()[1:-1, 1:-1]
    lq = log_abs_q(q, grid.zgrid())[1:-1, 1:-1]
    ut1 = fields.u1[1:-1, 1:-1] - 0.75 * lq
    ut2 = fields.u2[1:-1, 1:-1] - 0.25 * lq
    mask = np.isfinite(ut1) & np.isfinite(ut2)
    z, ut1, ut2 = Z[mask].ravel(), ut1[mask].ravel(), ut2[mask].ravel()
    if z.size > max_samples:
        stride = z.size // max_samples + 1
        z, ut1, ut2 = z[::stride], ut1[::stride], ut2[::stride]
    r = q_distance_grid(q, z)
    w1 = ut1 + ut2
    w2 = 2.0 * (ut1 - ut2)
    return DecayProfile(
        r=r,
        ut1=ut1,
        ut2=ut2,
        w1=w1,
        w2=w2,
        power_exponent_ut1=_power_fit_last_decade(r, ut1, floor),
        rate_w1=_exp_rate_fit(r, w1, floor),
        rate_w2=_exp_rate_fit(r, np.abs(w2), floor),
    )


def scaling_pushforward(
    q: QuarticDifferential, fields: FieldPair, s: float
) -> tuple[QuarticDifferential, FieldPair]:
    """Exact solution for s*z^k dz^4 from the solution for z^k dz^4.

    With lambda = s^{1/(k+4)}, the pair u1_s(z) = u1(lambda z) + 3 log lambda,
    u2_s(z) = u2(lambda z) + log lambda solves the system for s q; by
    uniqueness of the diagonal solution this IS the solution. Returned on
    the shrunken grid [-R/lambda, R/lambda]^2 carrying the same nodes.
    """
    if not q.is_monomial():
        raise NotMonomial("scaling pushforward requires a pure monomial z^k dz^4")
    if s <= 0:
        raise ValidationError("scale must be positive")
    k = q.degree
    lam = s ** (1.0 / (k + 4))
    new_grid = Grid(fields.grid.R / lam, fields.grid.N)
    u1 = fields.u1 + 3.0 * np.log(lam)
    u2 = fields.u2 + np.log(lam)
    meta = dict(fields.meta)
    meta["pushforward_scale"] = s
    return q.scaled(s), FieldPair(new_grid, u1, u2, meta)
