"""Periodic grids, Fourier transforms and multiplier operators.

Coefficients are stored in the full (``fftn``) layout and normalised by the
number of grid points, so a constant field ``c`` has a single mode-0
coefficient equal to ``c``.  Wavenumbers are physical: mode index ``m`` on an
axis of length ``L`` has wavenumber ``2*pi*m_signed/L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, GridError, NonFiniteError, SymmetryError, WindowError

HERMITIAN_RTOL = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic box discretising a patch of R^n."""

    n_dims: int
    points: tuple[int, ...]
    side_length: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.n_dims not in (2, 3):
            raise GridError(f"n_dims must be 2 or 3, got {self.n_dims}")
        for name in ("points", "side_length", "origin"):
            if len(getattr(self, name)) != self.n_dims:
                raise GridError(
                    f"{name} has length {len(getattr(self, name))}, expected {self.n_dims}")
        for n in self.points:
            if int(n) != n or not _is_power_of_two(int(n)) or n < 8:
                raise GridError(f"points per axis must be powers of two >= 8, got {n}")
        for length in self.side_length:
            if not (length > 0 and math.isfinite(length)):
                raise GridError(f"side lengths must be positive, got {length}")

    # geometry -----------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.side_length, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_length))

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Broadcastable sample coordinates, ``x_m = m * dx`` on each axis."""
        out = []
        for axis, (n, dx) in enumerate(zip(self.shape, self.spacing)):
            shape = [1] * self.n_dims
            shape[axis] = n
            out.append((np.arange(n) * dx).reshape(shape))
        return tuple(out)

    @cached_property
    def centered_coordinates(self) -> tuple[np.ndarray, ...]:
        """Coordinates relative to ``origin``."""
        return tuple(x - o for x, o in zip(self.coordinates, self.origin))

    @cached_property
    def radius(self) -> np.ndarray:
        """Distance of each sample point from ``origin``."""
        r2 = sum(np.broadcast_to(x, self.shape) ** 2 for x in self.centered_coordinates)
        return np.sqrt(r2)

    # spectral tables ----------------------------------------------------
    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable physical wavenumbers in the full fftn layout."""
        out = []
        for axis, (n, length) in enumerate(zip(self.shape, self.side_length)):
            shape = [1] * self.n_dims
            shape[axis] = n
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def kmag(self) -> np.ndarray:
        k2 = sum(np.broadcast_to(k, self.shape) ** 2 for k in self.wavenumbers)
        return np.sqrt(k2)

    @cached_property
    def mode_indices(self) -> tuple[np.ndarray, ...]:
        """Signed integer mode indices (numpy alias convention: N/2 -> -N/2)."""
        out = []
        for axis, n in enumerate(self.shape):
            shape = [1] * self.n_dims
            shape[axis] = n
            out.append(np.round(np.fft.fftfreq(n, d=1.0 / n)).astype(int).reshape(shape))
        return tuple(out)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the 2/3 rule (|m_j| <= N_j/3 on every axis)."""
        mask = np.ones(self.shape, dtype=bool)
        for m, n in zip(self.mode_indices, self.shape):
            mask = mask & (np.abs(m) <= n // 3)
        return mask

    def half(self, array: np.ndarray) -> np.ndarray:
        """Restrict a full-layout spectral array to the rfftn half layout."""
        return array[..., : self.shape[-1] // 2 + 1]

    def reflection_shift(self) -> tuple[int, ...]:
        """Index offsets ``s`` such that reflection about ``origin`` maps m -> (s - m) mod N."""
        shifts = []
        for o, dx, n in zip(self.origin, self.spacing, self.shape):
            s = 2.0 * o / dx
            if abs(s - round(s)) > 1e-9:
                raise GridError("origin must lie on a grid point or half-way between two")
            shifts.append(int(round(s)) % n)
        return tuple(shifts)

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """Sample values at the point reflection ``x -> 2*origin - x``."""
        out = values
        for axis, s in enumerate(self.reflection_shift()):
            n = self.shape[axis]
            idx = (s - np.arange(n)) % n
            out = np.take(out, idx, axis=axis)
        return out


def make_grid(n_dims: int, points: Sequence[int], side_length: Sequence[float],
              origin: Sequence[float] | None = None) -> Grid:
    """Build a validated Grid; ``origin`` defaults to the box centre."""
    if isinstance(points, (int, np.integer)):
        points = [int(points)] * n_dims
    if isinstance(side_length, (int, float)):
        side_length = [float(side_length)] * n_dims
    if len(points) != n_dims or len(side_length) != n_dims:
        raise GridError(f"expected {n_dims} entries for points and side_length")
    if origin is None:
        origin = [0.5 * float(length) for length in side_length]
    if len(origin) != n_dims:
        raise GridError(f"origin has length {len(origin)}, expected {n_dims}")
    for n in points:
        if int(n) != n:
            raise GridError(f"points must be integers, got {n}")
    return Grid(int(n_dims), tuple(int(n) for n in points),
                tuple(float(x) for x in side_length), tuple(float(x) for x in origin))


def reflect_modes(coefficients: np.ndarray) -> np.ndarray:
    """Return ``c(-k)`` for a full-layout coefficient array."""
    out = coefficients
    for axis, n in enumerate(coefficients.shape):
        out = np.take(out, (-np.arange(n)) % n, axis=axis)
    return out


def hermitian_projection(multiplier: np.ndarray) -> np.ndarray:
    """Symmetrise a multiplier so it maps real fields to real fields.

    Away from the Nyquist planes a conjugate-symmetric symbol is unchanged;
    on them odd symbols such as ``i*k`` are averaged to zero.
    """
    multiplier = np.asarray(multiplier)
    if not np.iscomplexobj(multiplier):
        return 0.5 * (multiplier + reflect_modes(multiplier))
    return 0.5 * (multiplier + np.conj(reflect_modes(multiplier)))


class ScalarField:
    """Real samples on a Grid together with their Fourier coefficients.

    Either representation may be supplied; the other is computed on first
    access.  Instances are treated as immutable.
    """

    __slots__ = ("grid", "_values", "_coefficients")

    def __init__(self, grid: Grid, values=None, coefficients=None):
        if values is None and coefficients is None:
            raise ValueError("ScalarField needs values or coefficients")
        self.grid = grid
        self._values = None
        self._coefficients = None
        if values is not None:
            values = np.asarray(values, dtype=float)
            if values.shape != grid.shape:
                values = values.reshape(grid.shape)
            self._values = values
        if coefficients is not None:
            coefficients = np.asarray(coefficients, dtype=complex)
            if coefficients.shape != grid.shape:
                raise GridError(f"coefficient shape {coefficients.shape} != grid {grid.shape}")
            self._coefficients = coefficients

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ScalarField":
        """Sample ``func(*coordinates)`` on the grid."""
        values = np.broadcast_to(func(*grid.coordinates), grid.shape)
        return cls(grid, values=np.array(values, dtype=float))

    @property
    def has_values(self) -> bool:
        return self._values is not None

    @property
    def has_coefficients(self) -> bool:
        return self._coefficients is not None

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = inverse_transform(self)._values
        return self._values

    @property
    def coefficients(self) -> np.ndarray:
        if self._coefficients is None:
            self._coefficients = forward_transform(self)._coefficients
        return self._coefficients

    @property
    def mean(self) -> float:
        return float(self.coefficients.flat[0].real)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, values=self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, values=self.values - other.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, values=self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return self * -1.0

    def __repr__(self):
        return f"ScalarField(grid={self.grid.shape}, values={self.has_values}, coefficients={self.has_coefficients})"


@dataclass(frozen=True)
class VectorField:
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        grids = {c.grid for c in self.components}
        if len(grids) != 1:
            raise GridError("all components of a VectorField must share one Grid")

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def __getitem__(self, j: int) -> ScalarField:
        return self.components[j]

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)


def _check_finite(array: np.ndarray, what: str):
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"non-finite values in {what}")


def forward_transform(f: ScalarField) -> ScalarField:
    if not f.has_values:
        raise ValueError("forward_transform needs sample values")
    values = f._values
    coefficients = np.fft.fftn(values) / f.grid.size
    _check_finite(coefficients, "forward transform")
    return ScalarField(f.grid, values=values, coefficients=coefficients)


def hermitian_defect(coefficients: np.ndarray) -> float:
    """Relative size of ``c(k) - conj(c(-k))``."""
    scale = np.max(np.abs(coefficients))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(coefficients - np.conj(reflect_modes(coefficients)))) / scale)


def inverse_transform(f: ScalarField) -> ScalarField:
    if not f.has_coefficients:
        raise ValueError("inverse_transform needs coefficients")
    c = f._coefficients
    _check_finite(c, "coefficients")
    defect = hermitian_defect(c)
    if defect > HERMITIAN_RTOL:
        raise SymmetryError(f"coefficients are not Hermitian (relative defect {defect:.3e})")
    values = np.fft.ifftn(c).real * f.grid.size
    return ScalarField(f.grid, values=values, coefficients=c)


def apply_multiplier(f: ScalarField, multiplier: np.ndarray) -> ScalarField:
    """Multiply the coefficients of ``f`` by a (Hermitian-projected) symbol."""
    return ScalarField(f.grid, coefficients=f.coefficients * hermitian_projection(multiplier))


def fractional_power(f: ScalarField, s: float) -> ScalarField:
    """Apply Lambda^s, i.e. multiply the coefficient at k by |k|^s."""
    if s == 0:
        return ScalarField(f.grid, values=f._values, coefficients=f.coefficients.copy())
    c = f.coefficients
    if s < 0:
        c0 = abs(c.flat[0])
        if c0 > 1e-12 * max(np.max(np.abs(c)), 1e-300):
            raise DomainError(
                f"negative power {s} needs a mean-free field (mode-0 coefficient {c0:.3e})")
    kmag = f.grid.kmag
    symbol = np.zeros_like(kmag)
    nonzero = kmag > 0
    symbol[nonzero] = kmag[nonzero] ** s
    return ScalarField(f.grid, coefficients=c * symbol)


def riesz_symbol(grid: Grid, axis: int) -> np.ndarray:
    kmag = grid.kmag
    safe = np.where(kmag > 0, kmag, 1.0)
    symbol = np.where(kmag > 0, -1j * grid.wavenumbers[axis] / safe, 0.0)
    return hermitian_projection(symbol)


def riesz_transform(f: ScalarField, axis: int) -> ScalarField:
    """R_i with symbol -i k_i/|k|; mode 0 is mapped to 0."""
    if not 0 <= axis < f.grid.n_dims:
        raise DomainError(f"axis {axis} out of range for {f.grid.n_dims}-d grid")
    return ScalarField(f.grid, coefficients=f.coefficients * riesz_symbol(f.grid, axis))


def derivative_symbol(grid: Grid, axis: int) -> np.ndarray:
    return hermitian_projection(1j * np.broadcast_to(grid.wavenumbers[axis], grid.shape))


def gradient(f: ScalarField) -> VectorField:
    c = f.coefficients
    return VectorField(tuple(ScalarField(f.grid, coefficients=c * derivative_symbol(f.grid, j))
                             for j in range(f.grid.n_dims)))


def semigroup_factor(grid: Grid, t: float, gamma: float, kappa: float = 1.0) -> np.ndarray:
    """exp(-kappa * t * |k|^(2 gamma)) on the full layout."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    if gamma <= 0 or kappa <= 0:
        raise DomainError("gamma and kappa must be positive")
    return np.exp(-kappa * t * grid.kmag ** (2.0 * gamma))


def apply_semigroup(f: ScalarField, t: float, gamma: float, kappa: float = 1.0) -> ScalarField:
    """The dissipative semigroup G(t) = exp(-t kappa (-Delta)^gamma)."""
    factor = semigroup_factor(f.grid, t, gamma, kappa)
    return ScalarField(f.grid, coefficients=f.coefficients * factor)


def dealias(f: ScalarField) -> ScalarField:
    """Zero every mode with some |m_j| > N_j/3 (2/3 rule)."""
    return ScalarField(f.grid, coefficients=np.where(f.grid.dealias_mask, f.coefficients, 0.0))


def diffusive_length(t: float, gamma: float, kappa: float = 1.0) -> float:
    return (kappa * t) ** (1.0 / (2.0 * gamma))


def safe_time(grid: Grid, gamma: float, kappa: float = 1.0, fraction: float = 0.25) -> float:
    """Largest t with (kappa t)^(1/2 gamma) <= fraction * (smallest side length)."""
    return (fraction * min(grid.side_length)) ** (2.0 * gamma) / kappa


def check_window(grid: Grid, times, gamma: float, kappa: float = 1.0):
    t_max = safe_time(grid, gamma, kappa)
    bad = [t for t in times if t > t_max * (1 + 1e-12)]
    if bad:
        raise WindowError(
            f"times up to {max(bad):.4g} exceed the wrap-around-safe bound {t_max:.4g}")


@dataclass(frozen=True)
class ProbeResult:
    p: float
    q: float
    gamma: float
    slope: float
    intercept: float
    residual: float
    predicted_slope: float
    times: tuple[float, ...]
    norms: tuple[float, ...]

    @property
    def relative_error(self) -> float:
        if self.predicted_slope == 0:
            return abs(self.slope)
        return abs(self.slope - self.predicted_slope) / abs(self.predicted_slope)


def lp_lq_exponent(n: int, gamma: float, p: float, q: float) -> float:
    """Exponent -(n/2 gamma)(1/p - 1/q) of the L^p -> L^q smoothing estimate."""
    return -(n / (2.0 * gamma)) * (1.0 / p - (0.0 if math.isinf(q) else 1.0 / q))


def probe_lp_lq_decay(f: ScalarField, p: float, q: float, gamma: float, kappa: float,
                      times: Sequence[float]) -> ProbeResult:
    """Fit the log-log slope of ||G(t) f||_q over ``times``.

    The times must be positive, increasing and inside the wrap-around-safe
    window; the slope is compared against the L^p -> L^q exponent.
    """
    from .diagnostics import loglog_fit, lq_norm

    if not (1 <= p <= q):
        raise DomainError(f"need 1 <= p <= q, got p={p}, q={q}")
    times = [float(t) for t in times]
    if any(t <= 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise DomainError("probe times must be positive and increasing")
    check_window(f.grid, times, gamma, kappa)
    norms = [lq_norm(apply_semigroup(f, t, gamma, kappa), q) for t in times]
    slope, intercept, residual = loglog_fit(times, norms)
    return ProbeResult(p, q, gamma, slope, intercept, residual,
                       lp_lq_exponent(f.grid.n_dims, gamma, p, q), tuple(times), tuple(norms))
