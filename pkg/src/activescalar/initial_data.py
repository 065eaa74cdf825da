"""Initial data used by the studies.

All constructors are deterministic; randomised data take an explicit seed.
"""
from __future__ import annotations

import math

import numpy as np

from .diagnostics import critical_exponent, lq_norm
from .spectral import Grid, ScalarField, hermitian_projection


def smoothstep(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def f(y):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)

    a = f(x)
    b = f(1.0 - x)
    return a / (a + b)


def bump(grid: Grid, radius: float, amplitude: float = 1.0, aspect: float = 1.0,
         shift: tuple[float, ...] | None = None) -> ScalarField:
    """Compactly supported smooth bump, profile smoothstep(1 - r/radius).

    ``aspect`` stretches the first axis, making the datum non-radial; ``shift``
    moves its centre away from the grid origin.
    """
    xs = list(grid.centered_coordinates)
    if shift is not None:
        xs = [x - s for x, s in zip(xs, shift)]
    xs[0] = xs[0] / aspect
    r = np.sqrt(sum(np.broadcast_to(x, grid.shape) ** 2 for x in xs))
    return ScalarField(grid, values=amplitude * smoothstep(1.0 - r / radius))


def gaussian(grid: Grid, width: float, amplitude: float = 1.0,
             shift: tuple[float, ...] | None = None) -> ScalarField:
    xs = list(grid.centered_coordinates)
    if shift is not None:
        xs = [x - s for x, s in zip(xs, shift)]
    r2 = sum(np.broadcast_to(x, grid.shape) ** 2 for x in xs)
    return ScalarField(grid, values=amplitude * np.exp(-r2 / (2 * width ** 2)))


def profile_datum(grid: Grid, exponent: float, core: float, support: float,
                  amplitude: float = 1.0, anisotropy: float = 0.0) -> ScalarField:
    """Compactly supported datum behaving like |x|^(-exponent) for core << |x| << support.

    The regularised core (core^2 + |x|^2)^(-exponent/2) misses the mass of the
    pure power law by core^(2-exponent)/(2-exponent) (per unit angle, n = 2);
    a Gaussian of width ``core`` puts that mass back so the first correction to
    the self-similar decay vanishes.  ``anisotropy`` in [0, 1) replaces |x|^2
    by x_1^2 (1 - a) + x_2^2 (1 + a), keeping the degree of homogeneity.
    """
    if grid.n_dims != 2:
        raise ValueError("profile_datum is defined for n = 2")
    if not 0 < exponent < 2:
        raise ValueError("exponent must lie in (0, 2)")
    x1, x2 = (np.broadcast_to(x, grid.shape) for x in grid.centered_coordinates)
    rho2 = (1 - anisotropy) * x1 ** 2 + (1 + anisotropy) * x2 ** 2
    r = np.sqrt(x1 ** 2 + x2 ** 2)
    profile = (core ** 2 + rho2) ** (-exponent / 2)
    deficit = core ** (2 - exponent) / (2 - exponent)
    # Gaussian c exp(-r^2/core^2) carries c core^2/2 per unit angle
    compensate = 2 * deficit / core ** 2 * np.exp(-r ** 2 / core ** 2)
    if anisotropy:
        compensate = compensate / math.sqrt(1 - anisotropy ** 2)
    cutoff = smoothstep((support - r) / (0.25 * support))
    return ScalarField(grid, values=amplitude * (profile + compensate) * cutoff)


def scaling_datum(grid: Grid) -> ScalarField:
    """Anisotropic pair of Gaussians of width side/48, off-centre.

    At that width the datum is below 1e-13 outside the central quarter box
    (so a factor-2 dilation stays on the grid), and both it and its
    dilation are spectrally resolved on 256 points.  It is not radial, so
    the nonlinear term does not vanish.
    """
    w = min(grid.side_length) / 48.0
    xs = [np.broadcast_to(x, grid.shape) for x in grid.centered_coordinates]
    x1 = xs[0]
    rest = sum(x ** 2 for x in xs[1:])
    rest_shift = sum((x - 0.3 * w) ** 2 for x in xs[1:2]) + sum(x ** 2 for x in xs[2:])
    v = (np.exp(-((x1 / 1.5) ** 2 + rest_shift) / (2 * w * w))
         + 0.5 * np.exp(-((x1 - w) ** 2 + rest) / (w * w)))
    return ScalarField(grid, values=v)


def rough_datum(grid: Grid, decay: float, seed: int, amplitude: float = 1.0) -> ScalarField:
    """Random-phase field with |theta_hat(k)| proportional to |k|^(-decay), mean zero."""
    rng = np.random.default_rng(seed)
    kmag = grid.kmag
    amp = np.zeros(grid.shape)
    nz = kmag > 0
    amp[nz] = kmag[nz] ** (-decay)
    phase = np.exp(2j * np.pi * rng.uniform(size=grid.shape))
    c = hermitian_projection(amp * phase)
    # Nyquist self-conjugate modes end up real; drop them for a clean spectrum
    for axis, n in enumerate(grid.shape):
        index = [slice(None)] * grid.n_dims
        index[axis] = n // 2
        c[tuple(index)] = 0.0
    field = ScalarField(grid, coefficients=c)
    values = field.values
    return ScalarField(grid, values=amplitude * values / np.abs(values).max())


def antisymmetrize(f: ScalarField) -> ScalarField:
    """(f(x) - f(-x))/2 about the grid origin."""
    return ScalarField(f.grid, values=0.5 * (f.values - f.grid.reflect(f.values)))


def symmetrize(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, values=0.5 * (f.values + f.grid.reflect(f.values)))


def normalize(f: ScalarField, q: float, target: float = 1.0) -> ScalarField:
    """Rescale f so that ||f||_q = target."""
    return f * (target / lq_norm(f, q))


def critical_normalize(f: ScalarField, gamma: float, beta: float) -> ScalarField:
    return normalize(f, critical_exponent(f.grid.n_dims, gamma, beta))


def build_datum(grid: Grid, kind: str, gamma: float, beta: float, seed: int = 0,
                amplitude: float | None = None) -> ScalarField:
    """Named data used by the CLI and the studies.

    ``bump``/``odd``/``even``/``radial``/``nonradial`` are smooth bumps of
    radius min(32 dx, side/8) (odd/even/nonradial off-centre); ``critical`` is the
    |x|^-(2 gamma - beta) profile; ``rough`` the random-phase |k|^-(n/2 + 0.1)
    field; ``scaling`` the Gaussian pair of :func:`scaling_datum`.  Smooth
    data are scaled to unit critical norm unless an ``amplitude`` (peak
    value) is given.
    """
    side = min(grid.side_length)
    # 32 cells per radius keeps the smoothstep spectrum resolved to ~1e-7
    r = min(32 * max(grid.spacing), side / 8)
    if kind == "bump":
        f = bump(grid, r, aspect=1.5)
    elif kind == "radial":
        f = bump(grid, r)
    elif kind == "nonradial":
        f = bump(grid, r, aspect=1.5, shift=(0.3 * r,) + (0.0,) * (grid.n_dims - 1))
    elif kind in ("odd", "even"):
        base = bump(grid, r, aspect=1.3, shift=(0.8 * r,) + (0.4 * r,) * (grid.n_dims - 1))
        f = antisymmetrize(base) if kind == "odd" else symmetrize(base)
    elif kind == "critical":
        dx = max(grid.spacing)
        f = profile_datum(grid, 2 * gamma - beta, core=3 * dx, support=0.45 * side,
                          anisotropy=0.3)
    elif kind == "rough":
        f = rough_datum(grid, grid.n_dims / 2 + 0.1, seed)
    elif kind == "scaling":
        f = scaling_datum(grid)
    else:
        raise ValueError(f"unknown datum kind {kind!r}")
    if amplitude is not None:
        return f * (amplitude / np.abs(f.values).max())
    if kind == "rough":
        return f
    return critical_normalize(f, gamma, beta)
