"""Norms, Kato-weighted norms, decay fits and symmetry monitors."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .coupling import CouplingSpec, check_divergence_free, vector_symbol, velocity
from .errors import DomainError
from .spectral import ScalarField, fractional_power

INF = math.inf


def lq_norm(f: ScalarField, q: float) -> float:
    """Uniform-cell quadrature of the L^q norm; q = inf is the grid maximum."""
    if not q >= 1:
        raise DomainError(f"lq_norm needs q >= 1, got {q}")
    v = np.abs(f.values)
    vmax = float(v.max()) if v.size else 0.0
    if math.isinf(q):
        return vmax
    if vmax == 0.0:
        return 0.0
    total = float(np.sum((v / vmax) ** q)) * f.grid.cell_volume
    return vmax * total ** (1.0 / q)


def sobolev_norm(f: ScalarField, s: float, q: float) -> float:
    """||Lambda^s f||_q, the homogeneous Sobolev norm of order s."""
    if not (1 < q < INF):
        raise DomainError(f"sobolev_norm needs 1 < q < inf, got {q}")
    return lq_norm(fractional_power(f, s), q)


def sobolev_norm_spectral(f: ScalarField, s: float) -> float:
    """q = 2 Sobolev norm from the spectral sum; independent of the physical route."""
    kmag = f.grid.kmag
    weight = np.zeros_like(kmag)
    nonzero = kmag > 0
    weight[nonzero] = kmag[nonzero] ** (2.0 * s)
    if s == 0:
        weight[~nonzero] = 1.0
    return math.sqrt(f.grid.volume * float(np.sum(weight * np.abs(f.coefficients) ** 2)))


def critical_exponent(n: int, gamma: float, beta: float) -> float:
    """n/(2 gamma - beta), the scale-invariant Lebesgue exponent."""
    if 2 * gamma <= beta:
        return INF
    return n / (2.0 * gamma - beta)


def kato_weights(n: int, gamma: float, beta: float, q: float) -> tuple[float, float]:
    """Return (eta_q, eta_tilde_q).

    eta_q = (2 gamma - 1)/(2 gamma) - n/(2 gamma q) weights the Sobolev norm
    of order beta - 1, eta_tilde_q = (2 gamma - beta)/(2 gamma) - n/(2 gamma q)
    weights the plain L^q norm.
    """
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    tail = n * inv_q / (2.0 * gamma)
    return (2 * gamma - 1) / (2 * gamma) - tail, (2 * gamma - beta) / (2 * gamma) - tail


def kato_q_window(n: int, gamma: float, beta: float) -> tuple[float, float]:
    """Open interval of admissible 1/q for the local existence argument."""
    lo = max((beta - 1) / n, (gamma - 1) / n, 0.0)
    hi = min((2 * gamma - beta) / n, (n + beta - 2 * gamma) / n, (n + beta - 1) / (2 * n))
    return lo, hi


def default_kato_q(n: int, gamma: float, beta: float) -> float:
    """Midpoint (in 1/q) of the admissible window.

    When the window is empty the fallback is 1/q = (2 gamma - beta)/(2 n),
    half the critical reciprocal.
    """
    lo, hi = kato_q_window(n, gamma, beta)
    if hi > lo:
        return 2.0 / (lo + hi)
    fallback = (2 * gamma - beta) / (2 * n)
    return 1.0 / fallback if fallback > 0 else 4.0


@dataclass
class DiagnosticsRecord:
    t: float
    l1: float
    l2: float
    lq_critical: float
    linf: float
    sobolev: float
    kato_eta: float
    kato_eta_tilde: float
    mean: float
    div_residual: float

    FIELDS = ("t", "l1", "l2", "lq_critical", "linf", "sobolev", "kato_eta",
              "kato_eta_tilde", "mean", "div_residual")

    def as_row(self) -> list[float]:
        return [getattr(self, name) for name in self.FIELDS]

    def as_dict(self) -> dict:
        return asdict(self)


def record(theta: ScalarField, t: float, spec: CouplingSpec, gamma: float,
           q: float | None = None) -> DiagnosticsRecord:
    """All monitored quantities for one snapshot.

    The Sobolev norm has order beta - 1 and exponent q (default: the Kato
    exponent).  For beta < 1 it is taken on the mean-free part.
    """
    n = theta.grid.n_dims
    beta = spec.order
    if q is None:
        q = default_kato_q(n, gamma, beta)
    eta, eta_tilde = kato_weights(n, gamma, beta, q)
    s = beta - 1.0
    target = theta
    if s < 0:
        c = theta.coefficients.copy()
        c.flat[0] = 0.0
        target = ScalarField(theta.grid, coefficients=c)
    sob = sobolev_norm(target, s, q)
    qc = critical_exponent(n, gamma, beta)
    lq_c = lq_norm(theta, qc) if qc >= 1 else float("nan")
    weight = (lambda e: t ** e if t > 0 else (0.0 if e > 0 else 1.0))
    return DiagnosticsRecord(
        t=float(t),
        l1=lq_norm(theta, 1),
        l2=lq_norm(theta, 2),
        lq_critical=lq_c,
        linf=lq_norm(theta, INF),
        sobolev=sob,
        kato_eta=weight(eta) * sob,
        kato_eta_tilde=weight(eta_tilde) * lq_norm(theta, q),
        mean=theta.mean,
        div_residual=check_divergence_free(velocity(spec, theta)),
    )


# decay fitting ----------------------------------------------------------

def loglog_fit(times: Sequence[float], values: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through (log t, log v): (slope, intercept, rms residual)."""
    x = np.log(np.asarray(times, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid ** 2)))


@dataclass
class DecayFit:
    q: float | None
    window: tuple[float, float]
    slope: float
    intercept: float
    residual: float
    predicted_slope: float | None
    tolerance: float | None
    n_points: int

    @property
    def relative_error(self) -> float | None:
        if self.predicted_slope is None:
            return None
        if self.predicted_slope == 0:
            return abs(self.slope)
        return abs(self.slope - self.predicted_slope) / abs(self.predicted_slope)

    @property
    def verdict(self) -> str:
        if self.predicted_slope is None or self.tolerance is None:
            return "unchecked"
        return "pass" if self.relative_error <= self.tolerance else "fail"


def fit_decay(series, window: tuple[float, float], predicted_slope: float | None = None,
              tolerance: float | None = None, q: float | None = None) -> DecayFit:
    """Fit v ~ C t^slope to the points of ``series`` with t inside ``window``."""
    pts = [(float(t), float(v)) for t, v in series if window[0] <= t <= window[1]]
    if len(pts) < 6:
        raise DomainError(f"decay window {window} holds {len(pts)} points, need >= 6")
    if any(v <= 0 for _, v in pts):
        raise DomainError("decay fit needs positive values")
    t, v = zip(*pts)
    slope, intercept, residual = loglog_fit(t, v)
    return DecayFit(q, (float(window[0]), float(window[1])), slope, intercept, residual,
                    predicted_slope, tolerance, len(pts))


def check_monotone(series, tol_rel: float) -> list[int]:
    """Indices i where value[i] exceeds value[i-1] by more than tol_rel relatively."""
    values = [float(v) for _, v in series]
    return [i for i in range(1, len(values))
            if values[i] - values[i - 1] > tol_rel * abs(values[i - 1])]


# symmetry ---------------------------------------------------------------

def symmetry_defect(f: ScalarField, kind: str, max_radius: float | None = None) -> float:
    """Relative departure from odd, even or radial symmetry about the grid origin.

    The radial defect is the largest standard deviation within annuli one
    grid spacing wide, over annuli inside ``max_radius`` (default: all).
    """
    v = f.values
    scale = float(np.max(np.abs(v)))
    if scale == 0:
        return 0.0
    if kind in ("odd", "even"):
        mirrored = f.grid.reflect(v)
        diff = v + mirrored if kind == "odd" else v - mirrored
        return float(np.max(np.abs(diff))) / scale
    if kind != "radial":
        raise DomainError(f"unknown symmetry kind {kind!r}")
    width = min(f.grid.spacing)
    radius = f.grid.radius.ravel()
    flat = v.ravel()
    if max_radius is not None:
        keep = radius <= max_radius
        radius, flat = radius[keep], flat[keep]
    bins = np.floor(radius / width).astype(int)
    counts = np.bincount(bins)
    sums = np.bincount(bins, weights=flat)
    sq = np.bincount(bins, weights=flat ** 2)
    used = counts > 0
    mean = sums[used] / counts[used]
    var = np.maximum(sq[used] / counts[used] - mean ** 2, 0.0)
    return float(np.sqrt(var.max())) / scale


def circle_samples(radii: Sequence[float], n_angles: int = 24, offset: float = 0.1) -> np.ndarray:
    """Points on circles |xi| = r in 2-d, for shell-wise radiality checks."""
    angles = offset + 2 * np.pi * np.arange(n_angles) / n_angles
    return np.array([[r * math.cos(a), r * math.sin(a)] for r in radii for a in angles])


def divergence_symbol(spec: CouplingSpec, xi: np.ndarray, h: float) -> complex:
    """div_xi Ptilde(xi) by central differences of step h."""
    total = 0.0 + 0.0j
    n = len(xi)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        plus = vector_symbol(spec, [np.array(x) for x in xi + e])[j]
        minus = vector_symbol(spec, [np.array(x) for x in xi - e])[j]
        total += complex(plus - minus) / (2 * h)
    return total


def divergence_symbol_radiality(spec: CouplingSpec, sample_xis) -> float:
    """Largest spread of div_xi Ptilde over a shell of equal |xi|.

    Each shell's spread is normalised by max |Ptilde|/|xi| on that shell, the
    natural size of a first derivative of the symbol.
    """
    samples = np.atleast_2d(np.asarray(sample_xis, dtype=float))
    mags = np.linalg.norm(samples, axis=1)
    if np.any(mags == 0):
        raise DomainError("samples must avoid xi = 0")
    keys = np.round(mags, 9)
    worst = 0.0
    for key in np.unique(keys):
        members = samples[keys == key]
        divs = np.array([divergence_symbol(spec, xi, 1e-4 * key) for xi in members])
        scale = max(np.linalg.norm(np.array([complex(c) for c in vector_symbol(
            spec, [np.array(x) for x in xi])])) for xi in members) / key
        spread = float(np.max(np.abs(divs[:, None] - divs[None, :])))
        worst = max(worst, spread / max(scale, 1e-300))
    return worst
