"""Polynomial quartic differentials q(z) dz^4 on the complex plane.

Provides normalization to monic centered form, the residual cyclic symmetry,
the singular flat metric |q|^{1/2} |dz|^2 and distances in it, natural
coordinates w with q = dw^4, and the half-plane sector decomposition used by
the transport machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotNormalizable, PathCrossesZero

_COEFF_TOL = 1e-12

# Gauss-Legendre nodes/weights on [0, 1], reused by the quadratures below.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class AffineMap:
    """z -> b*z + c on the complex plane."""

    b: complex
    c: complex

    def __call__(self, z):
        return self.b * z + self.c

    def inverse(self) -> "AffineMap":
        return AffineMap(1.0 / self.b, -self.c / self.b)


class QuarticDifferential:
    """q = (a_n z^n + ... + a_0) dz^4 with a_n != 0.

    Coefficients are stored low-to-high degree; trailing (near-)zero
    coefficients are stripped so ``degree`` is the index of the last
    nonzero one.
    """

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        if c.size == 0:
            raise NotNormalizable("empty coefficient list")
        scale = np.max(np.abs(c))
        if scale == 0.0:
            raise NotNormalizable("identically zero differential")
        last = np.max(np.nonzero(np.abs(c) > _COEFF_TOL * scale)[0])
        self.coeffs = c[: last + 1].copy()
        self.degree = int(last)

    # -- basic queries ----------------------------------------------------
    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    @property
    def is_monic(self) -> bool:
        return abs(self.leading - 1.0) <= _COEFF_TOL * 10

    @property
    def is_centered(self) -> bool:
        if self.degree == 0:
            return True
        return abs(self.coeffs[self.degree - 1]) <= _COEFF_TOL * 10

    def __call__(self, z):
        """Evaluate the polynomial q(z)."""
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    def derivative(self, z):
        dc = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(z, dc)

    def zeros(self) -> np.ndarray:
        """Roots of q, with multiplicity, as a complex array."""
        if self.degree == 0:
            return np.empty(0, dtype=complex)
        return np.polynomial.polynomial.polyroots(self.coeffs)

    def abs_q(self, z):
        return np.abs(self(z))

    def is_monomial(self, tol: float = 1e-12) -> bool:
        if self.degree == 0:
            return True
        lower = self.coeffs[: self.degree]
        return bool(np.all(np.abs(lower) <= tol * abs(self.leading)))

    def scaled(self, s: complex) -> "QuarticDifferential":
        """s * q as a differential (same z coordinate)."""
        return QuarticDifferential(self.coeffs * s)

    def __repr__(self):
        return f"QuarticDifferential(degree={self.degree}, coeffs={self.coeffs})"

    def to_json_dict(self) -> dict:
        return {"coeffs": [[float(a.real), float(a.imag)] for a in self.coeffs]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "QuarticDifferential":
        return cls([complex(re, im) for re, im in d["coeffs"]])


def pushforward(q: QuarticDifferential, T: AffineMap) -> QuarticDifferential:
    """Coefficients of b^4 * q(b z + c), the action of z -> bz+c on q dz^4."""
    comp = np.polynomial.polynomial.Polynomial(q.coeffs)(
        np.polynomial.polynomial.Polynomial([T.c, T.b])
    )
    return QuarticDifferential(T.b**4 * comp.coef)


def normalize_monic_centered(q: QuarticDifferential):
    """Return (q', T) with q' = T_* q monic and centered, T(z) = b z + c.

    b is the principal root a_n^{-1/(n+4)}; c recenters so the z^{n-1}
    coefficient vanishes. Degree-0 differentials are rejected: the moduli
    space in degree 0 is a single point and carries no normal form.
    """
    n = q.degree
    if n < 1:
        raise NotNormalizable("degree-0 differential has no monic-centered normal form")
    b = complex(q.leading) ** (-1.0 / (n + 4))
    c = -q.coeffs[n - 1] / (n * q.coeffs[n])
    T = AffineMap(b, c)
    qn = pushforward(q, T)
    if not (qn.is_monic and qn.is_centered):  # pragma: no cover - arithmetic identity
        raise NotNormalizable("normalization failed to produce monic centered form")
    return qn, T


def cyclic_action(q: QuarticDifferential, j: int) -> QuarticDifferential:
    """Push-forward of a monic centered q under T(z) = zeta^{-j} z.

    zeta is the primitive (n+4)-th root of unity; coefficient m picks up the
    phase zeta^{-j (m+4)}, which fixes the leading coefficient.
    """
    if not (q.is_monic and q.is_centered):
        raise NotNormalizable("cyclic action is defined on monic centered differentials")
    n = q.degree
    m = np.arange(n + 1)
    phase = np.exp(-2j * np.pi * j * (m + 4) / (n + 4))
    return QuarticDifferential(q.coeffs * phase)


# geometric panels toward t=0 absorb the |z - z0|^{m/4} singularity at the zero
_PANELS = np.concatenate([[0.0], np.geomspace(1e-10, 1.0, 14)])


def _segment_length(q: QuarticDifferential, a: complex, b: complex) -> float:
    """Integral of |q|^{1/4} |dz| along the straight segment [a, b].

    ``a`` is expected to be the zero of q; panels graded toward it keep the
    quadrature accurate despite the integrable singularity there.
    """
    t0 = _PANELS[:-1, None]
    t1 = _PANELS[1:, None]
    t = t0 + (t1 - t0) * _GL_X[None, :]
    z = a + (b - a) * t
    vals = np.abs(q(z)) ** 0.25
    per_panel = (t1[:, 0] - t0[:, 0]) * (vals @ _GL_W)
    return float(abs(b - a) * np.sum(per_panel))


def q_distance(q: QuarticDifferential, p) -> float:
    """Distance from p to the zero set of q in the flat metric |q|^{1/2}|dz|^2.

    Approximated as the minimum of the straight-segment length integral
    min_z0 int_0^1 |q|^{1/4} |p - z0| dt over the zeros z0 of q. For a
    zero-free q (degree 0) the distance is measured from the origin; decay
    statements need some basepoint and this is the documented convention.
    """
    p = complex(p)
    if q.degree == 0:
        return abs(q.leading) ** 0.25 * abs(p)
    best = np.inf
    for z0 in q.zeros():
        best = min(best, _segment_length(q, complex(z0), p))
    return float(best)


def q_distance_grid(q: QuarticDifferential, z: np.ndarray) -> np.ndarray:
    """Vectorized q_distance over an array of sample points."""
    z = np.asarray(z, dtype=complex)
    if q.degree == 0:
        return abs(q.leading) ** 0.25 * np.abs(z)
    flat = z.ravel()
    out = np.full(flat.shape, np.inf)
    t0 = _PANELS[:-1]
    t1 = _PANELS[1:]
    t = (t0[:, None] + (t1 - t0)[:, None] * _GL_X[None, :]).ravel()
    w = ((t1 - t0)[:, None] * _GL_W[None, :]).ravel()
    for z0 in q.zeros():
        seg = flat - complex(z0)
        pts = complex(z0) + seg[:, None] * t[None, :]
        vals = np.abs(q(pts)) ** 0.25
        out = np.minimum(out, np.abs(seg) * (vals @ w))
    return out.reshape(z.shape)


class _BranchTracker:
    """Continuation of a branch of q^{1/4} along a path.

    Keeps the previously selected root and picks, among the four fourth
    roots, the one closest to it. This avoids branch cuts without any
    symbolic monodromy bookkeeping.
    """

    def __init__(self, q: QuarticDifferential, z0: complex, value0: complex):
        self.q = q
        self.prev = complex(value0)
        v = self._principal(z0)
        if abs(v) > 0 and min(abs(value0 - v * 1j**m) for m in range(4)) > 1e-6 * abs(v):
            raise ValueError("value0 is not a fourth root of q(z0)")

    def _principal(self, z: complex) -> complex:
        return complex(self.q(z)) ** 0.25

    def __call__(self, z: complex) -> complex:
        base = self._principal(z)
        cands = base * (1j ** np.arange(4))
        self.prev = complex(cands[np.argmin(np.abs(cands - self.prev))])
        return self.prev


def branch_root_near(q: QuarticDifferential, z: complex, target: complex) -> complex:
    """The fourth root of q(z) closest in angle to ``target`` (a unit hint)."""
    base = complex(q(z)) ** 0.25
    cands = base * (1j ** np.arange(4))
    return complex(cands[np.argmin(np.abs(cands / np.abs(cands) - target))])


@dataclass
class HalfPlaneChart:
    """Sector chart on which the natural coordinate maps into {Im w > 0}.

    The sector is {|arg z - center| < half_width, |z| > inner_radius}. The
    branch of q^{1/4} is pinned by its value at ``base`` (on the central ray
    at radius inner_radius); w(base) = i * base_height, so Im w tracks the
    |q|^{1/2}-distance into the chart.
    """

    index: int
    n_charts: int
    center_angle: float
    half_width: float
    inner_radius: float
    base: complex
    root_at_base: complex
    base_height: float
    q: QuarticDifferential = field(repr=False)

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        if abs(z) <= self.inner_radius * (1.0 - 1e-12) - margin:
            return False
        d = np.angle(np.exp(1j * (np.angle(z) - self.center_angle)))
        return bool(abs(d) < self.half_width - margin)

    # -- natural coordinate ------------------------------------------------
    def _integrate_root(self, z0: complex, root0: complex, z1: complex,
                        max_depth: int = 24):
        """Branch-tracked int of q^{1/4} along the log-spiral from z0 to z1.

        The log-spiral path z(t) = exp((1-t) log z0 + t log z1) (short angle)
        never dips below min(|z0|, |z1|), so it stays inside the sector.
        Subdivides until the branch rotates < pi/4 per piece.
        """
        la, lb = np.log(complex(z0)), np.log(complex(z1))
        # take the short way around in angle
        dang = np.angle(np.exp(1j * (lb.imag - la.imag)))
        lb = complex(lb.real, la.imag + dang)

        def point(t: float) -> complex:
            return np.exp((1 - t) * la + t * lb)

        tracker = _BranchTracker(self.q, z0, root0)

        def piece(t0, f0, t1, depth):
            tm = 0.5 * (t0 + t1)
            fm = tracker(point(tm))
            f1 = tracker(point(t1))
            rot = abs(np.angle(fm / f0)) + abs(np.angle(f1 / fm))
            if rot > np.pi / 4 and depth < max_depth:
                tracker.prev = f0
                left, _ = piece(t0, f0, tm, depth + 1)
                tracker.prev = fm
                right, f1 = piece(tm, fm, t1, depth + 1)
                return left + right, f1
            ts = t0 + (t1 - t0) * _GL_X
            zs = point(ts)
            qv = np.asarray([_BranchTracker(self.q, point(t0), f0)(zz) for zz in zs])
            if np.min(np.abs(qv)) < 1e-10:
                raise PathCrossesZero("integration path meets a zero of q")
            dz = zs * (lb - la)
            return (t1 - t0) * np.sum(_GL_W * qv * dz), f1

        val, f_end = piece(0.0, tracker.prev, 1.0, 0)
        return val, f_end

    def to_natural(self, z: complex) -> complex:
        """w(z) = i*base_height + int_base^z q^{1/4} with the chart branch."""
        val, _ = self._integrate_root(self.base, self.root_at_base, complex(z))
        return 1j * self.base_height + val

    def root_at(self, z: complex) -> complex:
        """Chart branch of q^{1/4} continued from the base to z."""
        _, f = self._integrate_root(self.base, self.root_at_base, complex(z))
        return f

    def from_natural(self, w: complex, tol: float = 1e-12, max_iter: int = 60) -> complex:
        """Invert the natural coordinate by Newton iteration."""
        z = self.base + (complex(w) - 1j * self.base_height) / self.root_at_base
        if abs(z) < self.inner_radius:
            z = z / abs(z) * self.inner_radius
        w_target = complex(w)
        for _ in range(max_iter):
            wz = self.to_natural(z)
            err = wz - w_target
            if abs(err) < tol * max(1.0, abs(w_target)):
                return z
            z = z - err / self.root_at(z)
        raise PathCrossesZero(f"natural-coordinate inversion did not converge at w={w}")


def natural_coordinate(chart: HalfPlaneChart, z: complex) -> complex:
    if not chart.contains(z):
        raise PathCrossesZero(f"{z} outside chart {chart.index} sector")
    return chart.to_natural(z)


def half_planes(q: QuarticDifferential, inner_radius_hint: float = 0.0):
    """The n+4 sector charts of a monic q, plus the 4 Euclidean ones for n=0.

    Chart k is the sector {|arg z - 2 pi k/(n+4)| < 2 pi/(n+4) - delta,
    |z| > R0} with delta a 10% angular margin and R0 chosen so all zeros lie
    inside |z| < R0/2. The branch at the base is rotated so the central ray
    maps to the vertical direction, making the sector image an upper
    half-plane with Im w > 0.
    """
    if not q.is_monic:
        raise NotNormalizable("half-plane decomposition expects a monic differential")
    n = q.degree
    m = n + 4
    zeros = q.zeros()
    zero_rad = float(np.max(np.abs(zeros))) if zeros.size else 0.0
    r0 = max(2.0 * zero_rad * 1.05, inner_radius_hint, 1.0)
    step = 2 * np.pi / m
    delta = 0.1 * step
    charts = []
    for k in range(m):
        ang = k * step
        base = r0 * np.exp(1j * ang)
        root = branch_root_near(q, base, np.exp(1j * (np.pi / 2 - ang)))
        height = q_distance(q, base) if n >= 1 else abs(q.leading) ** 0.25 * r0
        charts.append(
            HalfPlaneChart(
                index=k,
                n_charts=m,
                center_angle=ang,
                half_width=step - delta,
                inner_radius=r0,
                base=base,
                root_at_base=root,
                base_height=height,
                q=q,
            )
        )
    return charts
