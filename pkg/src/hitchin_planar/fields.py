"""Grids, discretized field pairs (u1, u2), and interpolating providers.

The fields u_i = log(1/h_i) live on a square [-R, R]^2 with N x N nodes.
Arrays are indexed u[ix, iy] with x = -R + ix*h, y = -R + iy*h.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ValidationError
from .quartic import QuarticDifferential


@dataclass(frozen=True)
class Grid:
    """Uniform N x N grid on [-R, R]^2, spacing h = 2R/(N-1)."""

    R: float
    N: int

    def __post_init__(self):
        if self.N < 33:
            raise ValidationError(f"grid resolution N={self.N} below minimum 33")
        if self.R <= 0:
            raise ValidationError("grid half-width must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.N - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.N)

    def meshgrid(self):
        x = self.axis
        return np.meshgrid(x, x, indexing="ij")

    def zgrid(self) -> np.ndarray:
        X, Y = self.meshgrid()
        return X + 1j * Y

    def validate_for(self, q: QuarticDifferential):
        zeros = q.zeros()
        if zeros.size and np.max(np.abs(zeros)) >= self.R / 2:
            raise ValidationError(
                f"zeros of q must satisfy |zero| < R/2 = {self.R / 2}"
            )


@dataclass
class FieldPair:
    """Scalar fields (u1, u2) on a grid; immutable once returned by a solver."""

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.grid.N, self.grid.N)
        if self.u1.shape != shape or self.u2.shape != shape:
            raise ValidationError("field arrays must match the grid shape")

    def copy(self) -> "FieldPair":
        return FieldPair(self.grid, self.u1.copy(), self.u2.copy(), dict(self.meta))

    # -- export -----------------------------------------------------------
    def to_csv(self, path):
        X, Y = self.grid.meshgrid()
        data = np.column_stack(
            [X.ravel(), Y.ravel(), self.u1.ravel(), self.u2.ravel()]
        )
        header = "x,y,u1,u2"
        np.savetxt(path, data, delimiter=",", header=header, comments="")

    def to_binary(self, path):
        """Binary grid format: header (R: f64, N: i64), then u1, u2 row-major."""
        with open(path, "wb") as f:
            f.write(struct.pack("<dq", self.grid.R, self.grid.N))
            f.write(self.u1.astype("<f8").tobytes())
            f.write(self.u2.astype("<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "FieldPair":
        with open(path, "rb") as f:
            R, N = struct.unpack("<dq", f.read(16))
            grid = Grid(R, int(N))
            count = grid.N * grid.N
            u1 = np.frombuffer(f.read(8 * count), dtype="<f8").reshape(grid.N, grid.N)
            u2 = np.frombuffer(f.read(8 * count), dtype="<f8").reshape(grid.N, grid.N)
        return cls(grid, u1.copy(), u2.copy())


@dataclass
class SolverConfig:
    """Knobs for the monotone and Newton solvers.

    omega1/omega2 are the monotone coupling constants; when left at 0 they
    are computed as the sup of |dF_i/du_i| over the sub/super bracket
    (evaluated at the bracket corners, where the sup is attained).
    """

    tolerance: float = 1e-9
    max_iterations: int = 20000
    omega1: float = 0.0
    omega2: float = 0.0
    linear_tol: float = 1e-10
    supersolution_C: float = 4.0
    record_every: int = 1
    newton_damping: float = 1.0

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations <= 0:
            raise ValidationError("tolerance and max_iterations must be positive")


def log_abs_q(q: QuarticDifferential, z: np.ndarray) -> np.ndarray:
    """log|q(z)| with -inf at zeros (callers clamp as needed)."""
    with np.errstate(divide="ignore"):
        return np.log(np.abs(q(z)))


class FieldProvider:
    """Interpolation interface used by the transport layer.

    Provides u_i, the normalized differences
    utilde_1 = u1 - (3/8) log|q|^2 and utilde_2 = u2 - (1/8) log|q|^2,
    and their holomorphic derivative d/dz. ``abs_error`` is the caller-facing
    estimate of the absolute accuracy of utilde values; channels below it are
    treated as numerically zero by consumers.
    """

    abs_error: float = 1e-6

    def u(self, z: complex):  # pragma: no cover - interface
        raise NotImplementedError

    def utilde(self, z: complex):
        raise NotImplementedError

    def grad_utilde(self, z: complex):
        raise NotImplementedError

    def contains(self, z: complex) -> bool:
        raise NotImplementedError


class GridFieldProvider(FieldProvider):
    """Bicubic interpolation of solved grid fields.

    u is interpolated directly (it is smooth); utilde subtracts the exact
    log-term at the evaluation point, which keeps accuracy away from zeros
    of q. Derivative grids use centered differences, then bicubic
    interpolation to off-grid points.
    """

    def __init__(self, q: QuarticDifferential, fields: FieldPair, abs_error: float | None = None):
        self.q = q
        self.fields = fields
        ax = fields.grid.axis
        self._sp_u1 = RectBivariateSpline(ax, ax, fields.u1)
        self._sp_u2 = RectBivariateSpline(ax, ax, fields.u2)
        h = fields.grid.h
        gx1, gy1 = np.gradient(fields.u1, h, edge_order=2)
        gx2, gy2 = np.gradient(fields.u2, h, edge_order=2)
        self._sp_g = [RectBivariateSpline(ax, ax, g) for g in (gx1, gy1, gx2, gy2)]
        if abs_error is None:
            abs_error = float(fields.meta.get("abs_error", 1e-6))
        self.abs_error = abs_error

    def contains(self, z: complex) -> bool:
        R = self.fields.grid.R
        return abs(z.real) <= R and abs(z.imag) <= R

    def u(self, z: complex):
        x, y = z.real, z.imag
        return (
            float(self._sp_u1(x, y, grid=False)),
            float(self._sp_u2(x, y, grid=False)),
        )

    def utilde(self, z: complex):
        u1, u2 = self.u(z)
        lq = float(np.log(abs(complex(self.q(z)))))
        return u1 - 0.75 * lq, u2 - 0.25 * lq

    def grad_utilde(self, z: complex):
        """(d/dz utilde_1, d/dz utilde_2) with d/dz = (d/dx - i d/dy)/2."""
        x, y = z.real, z.imag
        gx1, gy1, gx2, gy2 = (float(sp(x, y, grid=False)) for sp in self._sp_g)
        du1 = 0.5 * (gx1 - 1j * gy1)
        du2 = 0.5 * (gx2 - 1j * gy2)
        dlog = 0.5 * complex(self.q.derivative(z)) / complex(self.q(z))
        return du1 - 0.75 * dlog, du2 - 0.25 * dlog
