"""Velocity couplings u = P[theta] given by Fourier multipliers.

A coupling is described by scalar symbols P_i(xi) and a constant matrix A;
the velocity symbol is

    Ptilde_j(xi) = sum_i a_ij * (i xi_i / |xi|^2) * P_i(xi),

with Ptilde(0) = 0.  The default A for n = 2 is the perp arrangement
a_12 = -1, a_21 = 1, which for P_i = |xi| reproduces u = (-R_2 theta, R_1 theta)
with the Riesz symbol -i xi_j/|xi|.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .spectral import Grid, ScalarField, VectorField, derivative_symbol, hermitian_projection

FAMILIES = ("sqg", "modified_sqg", "log_field", "log_power", "loglog_power", "custom")
PERP_FAMILIES = ("sqg", "modified_sqg", "log_field", "log_power", "loglog_power")

PERP_MATRIX = ((0.0, -1.0), (1.0, 0.0))

# symbol callables receive (xi_1, ..., xi_n) as broadcastable arrays
Symbol = Callable[..., np.ndarray]


@dataclass(frozen=True)
class CouplingSpec:
    """Description of P(xi).

    ``beta`` is the declared order.  For ``modified_sqg`` it is also the
    symbol exponent; for the log families it defaults to ``sigma + epsilon``
    (``1 + epsilon`` for ``log_field``) when ``chi > 0``.
    """

    family: str = "sqg"
    beta: float | None = None
    sigma: float = 1.0
    chi: float = 0.0
    epsilon: float = 0.05
    matrix_a: tuple[tuple[float, ...], ...] | None = None
    custom_symbols: tuple[Symbol, ...] | None = field(default=None, compare=True)
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown coupling family {self.family!r}")
        if self.chi < 0:
            raise ConfigurationError(f"chi must be >= 0, got {self.chi}")
        if self.family == "modified_sqg" and self.beta is None:
            raise ConfigurationError("modified_sqg needs beta")
        if self.family == "custom":
            if not self.custom_symbols:
                raise ConfigurationError("custom coupling family needs symbol evaluators")
            if self.beta is None:
                raise ConfigurationError("custom coupling needs a declared beta")
        if self.beta is not None and self.beta < 0:
            raise ConfigurationError(f"beta must be >= 0, got {self.beta}")
        if self.matrix_a is not None:
            object.__setattr__(self, "matrix_a",
                               tuple(tuple(float(a) for a in row) for row in self.matrix_a))

    @property
    def order(self) -> float:
        """Declared order beta used for admissibility and Kato exponents."""
        if self.beta is not None:
            return float(self.beta)
        if self.family == "sqg":
            return 1.0
        if self.family == "log_field":
            return 1.0 + (self.epsilon if self.chi > 0 else 0.0)
        return self.sigma + (self.epsilon if self.chi > 0 else 0.0)

    @property
    def is_homogeneous(self) -> bool:
        return self.family in ("sqg", "modified_sqg") or (
            self.family in ("log_field", "log_power", "loglog_power") and self.chi == 0)

    def matrix(self, n: int) -> np.ndarray:
        if self.matrix_a is not None:
            a = np.array(self.matrix_a, dtype=float)
            if a.shape != (n, n):
                raise ConfigurationError(f"matrix_a has shape {a.shape}, expected {(n, n)}")
            return a
        if n != 2:
            raise ConfigurationError(
                f"family {self.family!r} uses the 2-d perp arrangement; supply matrix_a for n={n}")
        return np.array(PERP_MATRIX)

    def describe(self) -> dict:
        out = {"family": self.family, "beta": self.order, "sigma": self.sigma,
               "chi": self.chi, "epsilon": self.epsilon}
        if self.matrix_a is not None:
            out["matrix"] = [list(r) for r in self.matrix_a]
        if self.name:
            out["name"] = self.name
        return out


def scalar_symbols(spec: CouplingSpec, xi: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Evaluate P_1..P_n at the (broadcastable) frequency arrays ``xi``."""
    n = len(xi)
    mag = np.sqrt(sum(np.asarray(x, dtype=float) ** 2 for x in xi))
    fam = spec.family
    if fam == "custom":
        if len(spec.custom_symbols) != n:
            raise ConfigurationError(
                f"custom coupling has {len(spec.custom_symbols)} symbols for n={n}")
        return [np.asarray(s(*xi), dtype=complex) * np.ones_like(mag) for s in spec.custom_symbols]
    log1 = np.log1p(mag ** 2)
    if fam == "sqg":
        p = mag
    elif fam == "modified_sqg":
        p = mag ** spec.beta
    elif fam == "log_field":
        p = mag * log1 ** spec.chi
    elif fam == "log_power":
        p = mag ** spec.sigma * log1 ** spec.chi
    else:
        p = mag ** spec.sigma * np.log1p(log1) ** spec.chi
    return [p] * n


def vector_symbol(spec: CouplingSpec, xi: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Components Ptilde_j of the velocity symbol, zero at xi = 0."""
    xi = [np.asarray(x, dtype=float) for x in xi]
    n = len(xi)
    a = spec.matrix(n)
    mag2 = sum(x ** 2 for x in xi)
    shape = np.broadcast(*xi).shape
    mag2 = np.broadcast_to(mag2, shape)
    nonzero = mag2 > 0
    safe = np.where(nonzero, mag2, 1.0)
    p = scalar_symbols(spec, xi)
    terms = [1j * xi[i] / safe * p[i] for i in range(n)]
    out = []
    for j in range(n):
        comp = np.zeros(shape, dtype=complex)
        for i in range(n):
            if a[i, j] != 0.0:
                comp = comp + a[i, j] * terms[i]
        out.append(np.where(nonzero, comp, 0.0))
    return out


def evaluate_symbol(spec: CouplingSpec, xi: Sequence[float]) -> np.ndarray:
    """P(xi) = (Ptilde_1(xi), ..., Ptilde_n(xi)) at a single frequency."""
    comps = vector_symbol(spec, [np.array(float(x)) for x in xi])
    return np.array([complex(c) for c in comps])


@lru_cache(maxsize=32)
def grid_velocity_symbols(spec: CouplingSpec, grid: Grid) -> tuple[np.ndarray, ...]:
    """Velocity symbols on the full layout of ``grid``, made real-preserving."""
    comps = vector_symbol(spec, grid.wavenumbers)
    return tuple(hermitian_projection(np.broadcast_to(c, grid.shape)) for c in comps)


def velocity(spec: CouplingSpec, theta: ScalarField) -> VectorField:
    """u = P[theta], computed mode by mode."""
    symbols = grid_velocity_symbols(spec, theta.grid)
    c = theta.coefficients
    return VectorField(tuple(ScalarField(theta.grid, coefficients=c * s) for s in symbols))


def check_divergence_free(u: VectorField) -> float:
    """max_k |(div u)_hat(k)| / max(1, ||u_hat||); a diagnostic, never raises.

    The divergence uses the real-preserving derivative symbols, so Nyquist
    planes are differentiated the same way the solver differentiates them.
    """
    grid = u.grid
    div = sum(derivative_symbol(grid, j) * comp.coefficients
              for j, comp in enumerate(u.components))
    norm = math.sqrt(sum(float(np.sum(np.abs(comp.coefficients) ** 2)) for comp in u.components))
    return float(np.max(np.abs(div))) / max(1.0, norm)


# order bound ------------------------------------------------------------

_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    return [a for a in itertools.product(range(order + 1), repeat=n) if sum(a) == order]


def symbol_derivative(func: Callable[[np.ndarray], complex], xi: np.ndarray,
                      alpha: Sequence[int], h: float) -> complex:
    """Central finite-difference approximation of d^alpha func at xi."""
    total = 0.0 + 0.0j
    stencils = [_STENCILS[a] for a in alpha]
    for combo in itertools.product(*[range(len(s[0])) for s in stencils]):
        offset = np.array([stencils[d][0][c] for d, c in enumerate(combo)], dtype=float)
        weight = np.prod([stencils[d][1][c] for d, c in enumerate(combo)])
        total += weight * func(xi + h * offset)
    return total / h ** sum(alpha)


def dyadic_shell_samples(n: int, shells: Sequence[int] = tuple(range(11)),
                         per_shell: int = 12, seed: int = 0) -> np.ndarray:
    """Random frequencies with |xi| in [2^j, 2^(j+1)) for each j in ``shells``."""
    rng = np.random.default_rng(seed)
    out = []
    for j in shells:
        direction = rng.normal(size=(per_shell, n))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = 2.0 ** (j + rng.uniform(0, 1, size=(per_shell, 1)))
        out.append(direction * radius)
    return np.concatenate(out)


@dataclass
class SymbolOrderReport:
    beta: float
    max_alpha: int
    constants: dict[int, float]
    shell_constants: dict[int, dict[int, float]]
    growth_slopes: dict[int, float]
    flagged: bool

    GROWTH_THRESHOLD = 0.02


def verify_symbol_order(spec: CouplingSpec, beta: float, sample_xis,
                        max_alpha: int) -> SymbolOrderReport:
    """Measure sup |d^alpha P_i(xi)| |xi|^(|alpha| - beta) over the samples.

    Constants are collected per |alpha| and per dyadic shell.  The growth
    slope is the least-squares slope of log C against log |xi| over the outer
    three shells; a slope above ``GROWTH_THRESHOLD`` flags the declared order
    as too small.
    """
    samples = np.atleast_2d(np.asarray(sample_xis, dtype=float))
    n = samples.shape[1]
    limit = n // 2 + 1
    if max_alpha > min(limit, 3):
        raise ConfigurationError(f"max_alpha must be <= {min(limit, 3)} for n={n}")
    mags = np.linalg.norm(samples, axis=1)
    if np.any(mags == 0):
        raise ConfigurationError("sample frequencies must avoid xi = 0")

    def component(i):
        return lambda x: complex(scalar_symbols(spec, [np.array(v) for v in x])[i])

    funcs = [component(i) for i in range(n)]
    constants: dict[int, float] = {}
    shell_constants: dict[int, dict[int, float]] = {}
    for order in range(max_alpha + 1):
        per_shell: dict[int, float] = {}
        for xi, mag in zip(samples, mags):
            h = 1e-4 * mag
            worst = 0.0
            for alpha in multi_indices(n, order):
                for f in funcs:
                    d = abs(symbol_derivative(f, xi, alpha, h))
                    worst = max(worst, d * mag ** (order - beta))
            shell = int(math.floor(math.log2(mag)))
            per_shell[shell] = max(per_shell.get(shell, 0.0), worst)
        shell_constants[order] = dict(sorted(per_shell.items()))
        constants[order] = max(per_shell.values())

    slopes = {}
    for order, table in shell_constants.items():
        keys = list(table)[-3:]
        vals = [table[k] for k in keys]
        if len(keys) < 2 or min(vals) <= 0:
            slopes[order] = 0.0
            continue
        x = np.log(2.0 ** (np.array(keys) + 0.5))
        slopes[order] = float(np.polyfit(x, np.log(vals), 1)[0])
    flagged = any(s > SymbolOrderReport.GROWTH_THRESHOLD for s in slopes.values())
    return SymbolOrderReport(beta, max_alpha, constants, shell_constants, slopes, flagged)


# admissibility ----------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityReport:
    n: int
    gamma: float
    beta: float
    lower: float          # 2 beta - 1
    two_gamma: float
    upper: float          # min{(2/3)(n + beta + 1), n + 1}
    verdict: str
    failed: tuple[str, ...]
    notes: str = ""

    @property
    def admissible(self) -> bool:
        return self.verdict == "admissible"


def check_admissibility(n: int, gamma: float, beta: float) -> AdmissibilityReport:
    """Test 1 <= 2 beta - 1 < 2 gamma < min{(2/3)(n + beta + 1), n + 1}."""
    lower = 2.0 * beta - 1.0
    upper = min(2.0 / 3.0 * (n + beta + 1.0), n + 1.0)
    two_gamma = 2.0 * gamma
    failed = []
    if not lower >= 1.0:
        failed.append(f"1 <= 2*beta-1 fails: 2*beta-1 = {lower:g}")
    if not lower < two_gamma:
        failed.append(f"2*beta-1 < 2*gamma fails: {lower:g} >= {two_gamma:g}")
    if not two_gamma < upper:
        failed.append(f"2*gamma < min(2(n+beta+1)/3, n+1) fails: {two_gamma:g} >= {upper:g}")
    verdict = "admissible" if not failed else "outside_window"
    notes = "; ".join(failed) if failed else (
        f"1 <= {lower:g} < {two_gamma:g} < {upper:g}")
    return AdmissibilityReport(n, gamma, beta, lower, two_gamma, upper, verdict,
                               tuple(failed), notes)


# extra couplings used by the symmetry studies ---------------------------

def _odd_symbol(x1, x2):
    return 1j * x1


def _even_anisotropic_symbol(x1, x2):
    mag = np.sqrt(x1 ** 2 + x2 ** 2)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > 0, mag + 0.5 * (x1 ** 2 - x2 ** 2) / safe, 0.0)


def _non_solenoidal_symbol(x1, x2):
    return x1 ** 2 + x2 ** 2


def odd_symbol_coupling() -> CouplingSpec:
    """P_1 = P_2 = i xi_1 with the perp matrix: odd symbols, real divergence-free velocity."""
    return CouplingSpec(family="custom", beta=1.0,
                        custom_symbols=(_odd_symbol, _odd_symbol), name="odd_i_xi1")


def even_anisotropic_coupling() -> CouplingSpec:
    """P_1 = P_2 = |xi| + (xi_1^2 - xi_2^2)/(2|xi|): even, anisotropic, order 1."""
    return CouplingSpec(family="custom", beta=1.0,
                        custom_symbols=(_even_anisotropic_symbol, _even_anisotropic_symbol),
                        name="even_anisotropic")


def non_solenoidal_coupling() -> CouplingSpec:
    """u_1 = d_1 theta, u_2 = 0: a deliberately compressible test coupling."""
    return CouplingSpec(family="custom", beta=2.0, matrix_a=((1.0, 0.0), (0.0, 0.0)),
                        custom_symbols=(_non_solenoidal_symbol, _non_solenoidal_symbol),
                        name="non_solenoidal")


def zero_coupling(n: int = 2) -> CouplingSpec:
    """P = 0: the pure-dissipation limit."""
    zero = _zero_symbol
    return CouplingSpec(family="custom", beta=1.0, custom_symbols=(zero,) * n,
                        matrix_a=tuple((0.0,) * n for _ in range(n)), name="zero")


def _zero_symbol(*xi):
    return np.zeros(np.broadcast(*xi).shape)


NAMED_CUSTOM = {
    "odd_i_xi1": odd_symbol_coupling,
    "even_anisotropic": even_anisotropic_coupling,
    "non_solenoidal": non_solenoidal_coupling,
    "zero": zero_coupling,
}
