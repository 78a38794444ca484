"""Light-like polygons in Ein^{1,2}: validation, normal forms, extraction.

Vertex lifts live in R^{2,3} with the pairing <x,y> = x1 y3 + x2 y4 + x3 y1
+ x4 y2 - x5 y5. Orientation data: dVol = dx1^...^dx5 and the time-like
3-plane W = span(e1-e3, e2-e4, e5). The canonical quadrilateral lift cycle
is (e1, e2, -e3, -e4); pentagons and hexagons are normalized by the shear
and diagonal stabilizer moves, hexagons landing on the (s, t) chart with
s >= 0, s t != 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChartLimitMissing,
    ClusteringAmbiguous,
    DomainViolation,
    NotNormalizable,
    NumericalDegeneracy,
    ValidationError,
    ZeroVector,
)
from .pseudo import bivector_to_r23, lambda2_matrix, r23_inner, wedge_of_vectors
from .transport import S, SPRIME

# pairing Gram matrix of <x,y> = x1 y3 + x2 y4 + x3 y1 + x4 y2 - x5 y5
PAIRING = np.zeros((5, 5))
PAIRING[0, 2] = PAIRING[2, 0] = 1.0
PAIRING[1, 3] = PAIRING[3, 1] = 1.0
PAIRING[4, 4] = -1.0

W_TIMELIKE = np.array(
    [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0], [0, 0, 1]], dtype=float
)

_E = np.eye(5)


def inner(x, y) -> float:
    return r23_inner(x, y)


@dataclass
class LightlikePolygon:
    """Cyclically ordered isotropic vertex lifts with a marked vertex."""

    lifts: np.ndarray  # (k, 5)
    marked: int = 0

    def __post_init__(self):
        self.lifts = np.atleast_2d(np.asarray(self.lifts, dtype=float))
        if self.lifts.shape[1] != 5:
            raise ValidationError("vertex lifts must be 5-vectors")
        self.marked = int(self.marked) % len(self)

    def __len__(self):
        return self.lifts.shape[0]

    def rolled(self, j: int) -> "LightlikePolygon":
        """Cyclic re-marking: vertex j becomes the first."""
        return LightlikePolygon(np.roll(self.lifts, -j, axis=0), 0)

    def to_json_dict(self) -> dict:
        return {
            "vertices": [[float(c) for c in v] for v in self.lifts],
            "marked": self.marked,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LightlikePolygon":
        return cls(np.asarray(d["vertices"], dtype=float), d.get("marked", 0))


@dataclass
class ValidationReport:
    isotropy: bool
    edge_orthogonality: bool
    negativity: bool
    future_directed: bool
    max_isotropy_defect: float
    max_edge_defect: float
    max_nonconsecutive_product: float
    min_edge_volume: float

    @property
    def ok(self) -> bool:
        return (
            self.isotropy
            and self.edge_orthogonality
            and self.negativity
            and self.future_directed
        )


def validate(poly: LightlikePolygon, tol: float = 1e-8) -> ValidationReport:
    """Check isotropy, photon edges, negativity, and future-directedness.

    Negativity only needs checking between non-consecutive vertices; the
    future condition is the sign of det(v_i, v_{i+1}, w1, w2, w3) per edge.
    """
    V = poly.lifts
    k = len(poly)
    if k < 4:
        raise ValidationError("a light-like polygon needs at least 4 vertices")
    scales = np.array([max(np.linalg.norm(v) ** 2, 1e-300) for v in V])
    iso = np.array([abs(inner(v, v)) for v in V]) / scales
    edge = np.array(
        [abs(inner(V[i], V[(i + 1) % k])) for i in range(k)]
    ) / np.sqrt(scales * np.roll(scales, -1))
    noncons = []
    for i in range(k):
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue
            noncons.append(inner(V[i], V[j]))
    noncons = np.asarray(noncons) if noncons else np.array([-np.inf])
    vols = np.array(
        [
            np.linalg.det(
                np.column_stack([V[i], V[(i + 1) % k], W_TIMELIKE])
            )
            for i in range(k)
        ]
    )
    return ValidationReport(
        isotropy=bool(np.max(iso) <= tol),
        edge_orthogonality=bool(np.max(edge) <= tol),
        negativity=bool(np.max(noncons) < 0),
        future_directed=bool(np.min(vols) > 0),
        max_isotropy_defect=float(np.max(iso)),
        max_edge_defect=float(np.max(edge)),
        max_nonconsecutive_product=float(np.max(noncons)),
        min_edge_volume=float(np.min(vols)),
    )


# ---------------------------------------------------------------------------
# the (s, t) hexagon chart


@dataclass(frozen=True)
class HexParams:
    s: float
    t: float

    def __post_init__(self):
        if self.s < 0:
            raise DomainViolation("hexagon parameter s must be nonnegative")
        if abs(self.s * self.t - 2.0) < 1e-12:
            raise DomainViolation("hexagon parameters must satisfy s t != 2")


def hexagon_from_params(p: HexParams) -> LightlikePolygon:
    """Canonical hexagon lifts for chart parameters (s, t)."""
    s, t = p.s, p.t
    v5 = np.array([1.0, -1.0, -1.0, -1.0 - s * s / 2.0, s])
    v6 = np.array(
        [1.0 + t * t / 2.0 + t * t * s * s / 4.0 - s * t, -t * t / 2.0, 0.0, -1.0, t]
    )
    lifts = np.stack(
        [_E[0], _E[1], -_E[2], -_E[2] - _E[3], v5, v6]
    )
    return LightlikePolygon(lifts, 0)


CANONICAL_QUAD = LightlikePolygon(np.stack([_E[0], _E[1], -_E[2], -_E[3]]))
CANONICAL_PENTAGON = LightlikePolygon(
    np.stack(
        [
            _E[0],
            _E[1],
            -_E[2],
            -_E[2] - _E[3],
            np.array([1.0, -1.0, 0.0, -1.0, np.sqrt(2.0)]),
        ]
    )
)


# ---------------------------------------------------------------------------
# normalization


def _shear(tau: float) -> np.ndarray:
    """The stabilizer shear A_tau: e4 += tau^2/2 e2 + tau e5, e5 += tau e2."""
    A = np.eye(5)
    A[1, 3] = tau * tau / 2.0
    A[4, 3] = tau
    A[1, 4] = tau
    return A


def _diag_move(d1: float, d2: float) -> np.ndarray:
    return np.diag([d1, d2, 1.0 / d1, 1.0 / d2, 1.0])


_DTILDE = np.diag([-1.0, -1.0, -1.0, -1.0, 1.0])


def _triple_isometry(v1, v2, v3, u5_sign: float) -> np.ndarray:
    """Isometry g with g v1 = e1, g v2 = e2, g v3 = -e3.

    Completes (v1, v2, v3) by a dual isotropic partner for v2 and a negative
    unit vector for the last direction, mirroring the reference completion
    (e1, e2, -e3, e4, +-e5).
    """
    B = PAIRING
    # w with <w,v1> = 0, <w,v3> = 0, <w,v2> = 1 (min-norm), made isotropic
    Mrows = np.stack([v1 @ B, v3 @ B, v2 @ B])
    w, *_ = np.linalg.lstsq(Mrows, np.array([0.0, 0.0, 1.0]), rcond=None)
    w = w - 0.5 * inner(w, w) * v2
    # orthogonal complement of the four: one dimensional, negative
    Mrows = np.stack([v1 @ B, v2 @ B, v3 @ B, w @ B])
    _, sing, vh = np.linalg.svd(Mrows)
    if sing.min() < 1e-12 * sing.max():
        raise NumericalDegeneracy("degenerate vertex configuration")
    u5 = vh[-1]
    n5 = inner(u5, u5)
    if n5 >= 0:
        raise NumericalDegeneracy("completion vector is not timelike")
    u5 = u5_sign * u5 / np.sqrt(-n5)
    Vmat = np.column_stack([v1, v2, v3, w, u5])
    cond = np.linalg.cond(Vmat)
    if cond > 1e8:
        raise NumericalDegeneracy(f"frame extension condition number {cond:.2e}")
    ref = np.column_stack([_E[0], _E[1], -_E[2], _E[3], _E[4]])
    return ref @ np.linalg.inv(Vmat)


@dataclass
class NormalForm:
    polygon: LightlikePolygon
    group_element: np.ndarray
    params: HexParams | None
    cone_flipped: bool = False
    residuals: dict = field(default_factory=dict)


def _apply(g, V):
    return (g @ V.T).T


def _normalize_with_sign(poly: LightlikePolygon, u5_sign: float, tol: float) -> NormalForm:
    k = len(poly)
    V = poly.lifts.copy()
    g_total = np.eye(5)
    flipped = False

    def apply_move(g):
        nonlocal V, g_total
        V = _apply(g, V)
        g_total = g @ g_total

    def dtilde_flip():
        # diag(-1,-1,-1,-1,1) followed by the cone flip: restores v1..v4 lifts
        nonlocal V, g_total, flipped
        V = -_apply(_DTILDE, V)
        g_total = _DTILDE @ g_total
        flipped = not flipped

    # lift scalings so <v1,v3> = <v2,v4> = -1
    p13, p24 = inner(V[0], V[2]), inner(V[1], V[3])
    if p13 >= 0 or p24 >= 0:
        raise NotNormalizable("non-consecutive products must be negative")
    V[0] *= np.sqrt(-1.0 / p13)
    V[2] *= np.sqrt(-1.0 / p13)
    V[1] *= np.sqrt(-1.0 / p24)
    V[3] *= np.sqrt(-1.0 / p24)

    apply_move(_triple_isometry(V[0], V[1], V[2], u5_sign))
    # v1, v2, v3 are now e1, e2, -e3 up to numerical residue
    res_triple = max(
        np.max(np.abs(V[0] - _E[0])),
        np.max(np.abs(V[1] - _E[1])),
        np.max(np.abs(V[2] + _E[2])),
    )

    v4 = V[3]
    if abs(v4[0]) > 100 * tol or (k == 4 and abs(v4[2]) > 100 * tol):
        raise NotNormalizable(f"fourth vertex violates photon constraints: {v4}")
    if v4[3] >= 0:
        raise NotNormalizable("fourth vertex has nonnegative e4 pairing")
    apply_move(_shear(-v4[4] / v4[3]))

    params = None
    if k == 4:
        V[3] = V[3] / (-V[3][3])
        V[3][np.abs(V[3]) < 50 * tol] = 0.0
        if np.max(np.abs(V[3] + _E[3])) > 1e-6:
            raise NotNormalizable(f"quadrilateral failed to reach -e4: {V[3]}")
        V[3] = -_E[3]
    else:
        v4 = V[3]
        if v4[2] >= 0:
            raise NotNormalizable("fourth vertex has nonnegative e1 pairing")
        apply_move(_diag_move(1.0, v4[3] / v4[2]))
        V[3] = V[3] / (-V[3][2])
        if np.max(np.abs(V[3] - (-_E[2] - _E[3]))) > 1e-6:
            raise NotNormalizable(f"pentagon/hexagon v4 normalization failed: {V[3]}")
        V[3] = -_E[2] - _E[3]

        v5 = V[4]
        if k == 5:
            # v5 closes the pentagon: orthogonal to v1, so x3 = 0 here
            if v5[0] <= 0 or v5[3] >= 0:
                raise NotNormalizable("fifth vertex violates sign constraints")
            lam = 1.0 / np.sqrt(-v5[0] * v5[3])
            a = 1.0 / (lam * v5[0])
            apply_move(_diag_move(a, a))
            V[4] = V[4] / V[4][0]
            if V[4][4] < 0:
                dtilde_flip()
            if np.max(np.abs(V[4] - CANONICAL_PENTAGON.lifts[4])) > 1e-6:
                raise NotNormalizable(f"pentagon v5 normalization failed: {V[4]}")
            V[4] = CANONICAL_PENTAGON.lifts[4].copy()
        else:
            if v5[0] <= 0 or v5[2] >= 0:
                raise NotNormalizable("fifth vertex violates sign constraints")
            a = np.sqrt(-v5[2] / v5[0])
            apply_move(_diag_move(a, a))
            V[4] = V[4] / V[4][0]
            if V[4][4] < 0:
                dtilde_flip()
            s = float(V[4][4])
            target5 = np.array([1.0, -1.0, -1.0, -1.0 - s * s / 2.0, s])
            if np.max(np.abs(V[4] - target5)) > 1e-6:
                raise NotNormalizable(f"hexagon v5 normalization failed: {V[4]}")
            V[4] = target5

            v6 = V[5]
            if v6[3] >= 0:
                raise NotNormalizable("sixth vertex has nonnegative e2 pairing")
            V[5] = V[5] / (-V[5][3])
            if s < 50 * tol and V[5][4] < 0:
                dtilde_flip()
                s = float(V[4][4])
            t = float(V[5][4])
            target6 = np.array(
                [1 + t * t / 2 + t * t * s * s / 4 - s * t, -t * t / 2, 0.0, -1.0, t]
            )
            if np.max(np.abs(V[5] - target6)) > 1e-6:
                raise NotNormalizable(f"hexagon v6 normalization failed: {V[5]}")
            V[5] = target6
            params = HexParams(max(s, 0.0), t)

    out = LightlikePolygon(V, 0)
    report = validate(out, tol=1e-6)
    if not report.ok:
        raise NotNormalizable(
            f"normalized polygon failed validation: {report}"
        )
    return NormalForm(
        polygon=out,
        group_element=g_total,
        params=params,
        cone_flipped=flipped,
        residuals={"triple": float(res_triple)},
    )


def normalize(poly: LightlikePolygon, tol: float = 1e-10) -> NormalForm:
    """Canonical form of a validated polygon with 4, 5, or 6 vertices.

    Applies the constructive moves of the uniqueness proofs: map the first
    three lifts onto (e1, e2, -e3), shear the fourth onto its normal slot,
    then use diagonal stabilizer moves (and the sign move diag(-1,..,1) with
    a cone flip) for the remaining vertices. For hexagons the recovered
    (s, t) parameters are returned.
    """
    k = len(poly)
    if k > 6:
        raise NotNormalizable(
            "no canonical chart beyond hexagons; compare gauge-fixed Gram data"
        )
    report = validate(poly)
    if not report.ok:
        raise NotNormalizable(f"input polygon is not valid: {report}")
    last_err: Exception | None = None
    for sign in (1.0, -1.0):
        try:
            return _normalize_with_sign(poly, sign, tol)
        except NotNormalizable as exc:
            last_err = exc
    raise NotNormalizable(f"normalization failed for both completions: {last_err}")


# ---------------------------------------------------------------------------
# extraction from Stokes data


def stokes_vertex_classes(transport_to_anchor: np.ndarray, limit_L: np.ndarray):
    """Complex bivectors of the two boundary classes seen from one chart.

    G = S'^{-1} psi(0 -> anchor) L S maps the model classes [e3^e4] (the
    J-/J-- limit) and [e1^e4] (the J+/J++ limit) to the chart's boundary
    points; the H(0)^{1/2} dressing and psi0(anchor)^{-1} collapse
    projectively into the diagonal and are omitted.
    """
    G = np.linalg.inv(SPRIME) @ transport_to_anchor @ limit_L @ S
    L2 = lambda2_complex(G)
    e34 = np.zeros(6, dtype=complex)
    e34[5] = 1.0
    e14 = np.zeros(6, dtype=complex)
    e14[2] = 1.0
    return L2 @ e34, L2 @ e14


def lambda2_complex(g: np.ndarray) -> np.ndarray:
    from .pseudo import BASIS_PAIRS

    cols = []
    for i, j in BASIS_PAIRS:
        x, y = g[:, i], g[:, j]
        cols.append(
            np.array([x[a] * y[b] - x[b] * y[a] for a, b in BASIS_PAIRS])
        )
    return np.stack(cols, axis=1)


def _realify(v: np.ndarray, tol: float = 1e-4):
    """Rotate a complex line representative to its real representative."""
    idx = int(np.argmax(np.abs(v)))
    phase = v[idx] / abs(v[idx])
    w = v / phase
    drift = float(np.max(np.abs(w.imag)) / np.max(np.abs(w.real)))
    return w.real.copy(), drift


def polygon_from_stokes(
    q,
    provider,
    charts,
    limits: dict,
    basepoint: complex = 0.0,
    rtol: float = 1e-10,
):
    """Boundary polygon from per-chart sector limits.

    ``limits`` maps chart index -> SectorLimit for the J+ sector (others are
    redundant for the vertex classes). Vertex j is the J-/J-- class of chart
    j, which the chart-to-chart identifications equate with the J+/J++ class
    of chart j-1; the residual of that identification is returned in the
    diagnostics. Lift signs are fixed by the negativity chain and the global
    cone by future-directedness.
    """
    from .symspace import metric_diag
    from .transport import transport_frame

    n_charts = len(charts)
    minus_cls = []
    plus_cls = []
    drifts = []
    H0 = metric_diag(provider, basepoint)
    for chart in charts:
        if chart.index not in limits:
            raise ChartLimitMissing(f"no sector limit for chart {chart.index}")
        lim = limits[chart.index]
        T = transport_frame(q, provider, [basepoint, lim.anchor_z], rtol=rtol)
        psi = np.diag(H0**0.5) @ T.matrix
        vm_c, vp_c = stokes_vertex_classes(psi, lim.L)
        vm, dm = _realify(vm_c)
        vp, dp = _realify(vp_c)
        drifts.extend([dm, dp])
        minus_cls.append(vm / np.linalg.norm(vm))
        plus_cls.append(vp / np.linalg.norm(vp))

    # identification quality: [plus of chart k] vs [minus of chart k+1]
    ident = []
    for k in range(n_charts):
        a = plus_cls[k]
        b = minus_cls[(k + 1) % n_charts]
        ident.append(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))

    lifts = []
    for k in range(n_charts):
        v6 = minus_cls[k]
        x = bivector_to_r23(_project_omega_perp(v6))
        lifts.append(x / np.linalg.norm(x))
    lifts = np.stack(lifts)
    lifts = _fix_signs(lifts)
    poly = LightlikePolygon(lifts, 0)
    diag = {
        "identification_residuals": ident,
        "realify_drifts": drifts,
    }
    return poly, diag


def _project_omega_perp(v6: np.ndarray) -> np.ndarray:
    from .pseudo import OMEGA_STAR, wedge_inner

    return v6 - wedge_inner(v6, OMEGA_STAR) * OMEGA_STAR


def _fix_signs(lifts: np.ndarray) -> np.ndarray:
    """Orient lifts into one cone: non-consecutive products negative,
    future-directed overall (the two cones give the same sign pattern)."""
    k = lifts.shape[0]
    out = lifts.copy()
    for i in range(2, k - 1):
        if inner(out[i], out[0]) > 0:
            out[i] = -out[i]
    if k >= 4:
        if inner(out[1], out[3]) > 0:
            out[1] = -out[1]
        if inner(out[k - 1], out[1]) > 0:
            out[k - 1] = -out[k - 1]
    rep = validate(LightlikePolygon(out), tol=np.inf)
    if not rep.future_directed:
        vols = [
            np.linalg.det(np.column_stack([out[i], out[(i + 1) % k], W_TIMELIKE]))
            for i in range(k)
        ]
        if np.max(vols) < 0:
            out = out[::-1].copy()  # orientation convention mismatch
    return out


# ---------------------------------------------------------------------------
# extraction from the sigma embedding


def polygon_from_embedding(
    q,
    provider,
    charts,
    radius_schedule=None,
    dirs_per_sector: int = 7,
    basepoint: complex = 0.0,
    rtol: float = 1e-9,
    cluster_tol: float = 5e-3,
):
    """Boundary polygon from projective limits of the sigma embedding.

    For a fan of directions in each vertex basin (the angular sector between
    consecutive canonical rays), sigma~ is evaluated along the radius
    schedule, normalized to unit Euclidean norm, and the final values are
    clustered into vertex groups.
    """
    from .pseudo import sigma_point

    n = len(charts)
    if radius_schedule is None:
        rmax = 0.95 * getattr(provider, "rho_max", provider.fields.grid.R if hasattr(provider, "fields") else 8.0)
        radius_schedule = np.geomspace(max(1.0, rmax / 4), rmax, 4)
    step = 2 * np.pi / n
    eps = step / (dirs_per_sector + 1)
    samples = []
    for k in range(n):
        for m in range(1, dirs_per_sector + 1):
            phi = k * step + m * eps
            samples.append((k, phi))

    limit_pts = []
    for k, phi in samples:
        prev = None
        conv = None
        for rho in radius_schedule:
            z = rho * np.exp(1j * phi)
            if not provider.contains(z):
                break
            s = sigma_point(q, provider, z, path=[basepoint, z], rtol=rtol)
            s = s / np.linalg.norm(s)
            if prev is not None:
                conv = np.linalg.norm(s - prev)
            prev = s
        limit_pts.append((k, phi, prev, conv))

    lifts = []
    spreads = []
    for k in range(n):
        group = [p for kk, phi, p, c in limit_pts if kk == k and p is not None]
        if len(group) < max(2, dirs_per_sector // 2):
            raise ClusteringAmbiguous(f"insufficient radius coverage in basin {k}")
        G = np.stack(group)
        mean = G.mean(axis=0)
        mean /= np.linalg.norm(mean)
        spread = float(np.max(np.linalg.norm(G - mean, axis=1)))
        spreads.append(spread)
        if spread > cluster_tol:
            raise ClusteringAmbiguous(
                f"basin {k} spread {spread:.2e} above {cluster_tol}"
            )
        lifts.append(mean)
    lifts = np.stack(lifts)
    # cross-basin separation
    for k in range(n):
        d = np.linalg.norm(lifts[k] - lifts[(k + 1) % n])
        if d < 10 * max(spreads[k], spreads[(k + 1) % n], 1e-12):
            raise ClusteringAmbiguous(
                f"vertex clusters {k} and {k+1} are not separated"
            )
    poly = LightlikePolygon(lifts, 0)
    return poly, {"spreads": spreads}


# ---------------------------------------------------------------------------
# the Lipschitz-graph model


def graph_model(v) -> tuple[float, np.ndarray]:
    """Coordinates (theta, p) in the S^1 x S^2 boundary model.

    Splits R^{2,3} into the positive plane spanned by (e1+e3, e2+e4)/sqrt2
    and the negative 3-space spanned by ((e1-e3)/sqrt2, (e2-e4)/sqrt2, e5);
    an isotropic lift scales to (cos theta, sin theta; p) with |p| = 1.
    """
    v = np.asarray(v, dtype=float)
    if np.max(np.abs(v)) == 0:
        raise ZeroVector("cannot project the zero vector")
    sq2 = np.sqrt(2.0)
    a = np.array(
        [
            (v[0] + v[2]) / sq2,
            (v[1] + v[3]) / sq2,
            (v[0] - v[2]) / sq2,
            (v[1] - v[3]) / sq2,
            v[4],
        ]
    )
    nrm = np.hypot(a[0], a[1])
    if nrm < 1e-14 * np.max(np.abs(a)):
        raise ZeroVector("lift has no positive-plane component")
    a = a / nrm
    theta = float(np.arctan2(a[1], a[0]))
    p = a[2:]
    return theta, p


def s1_distance(t1: float, t2: float) -> float:
    d = abs(t1 - t2) % (2 * np.pi)
    return min(d, 2 * np.pi - d)


def s2_distance(p1, p2) -> float:
    c = float(np.clip(np.dot(p1, p2) / (np.linalg.norm(p1) * np.linalg.norm(p2)), -1, 1))
    return float(np.arccos(c))
