"""Time evolution of the mild formulation.

Three routes to theta(t) share one spectral model:

* ``step``/``evolve``: exponential time differencing (ETDRK1/ETDRK2) with the
  dissipative part integrated exactly;
* ``duhamel_bilinear``: exponential quadrature of
  B(theta, phi)(t) = -int_0^t G(t - s) div(P[theta] phi)(s) ds on a node set;
* ``picard_iterate``: theta_1 = G(t) theta_0, theta_{k+1} = theta_1 + B(theta_k, theta_k).

Internally states are kept as ``rfftn`` coefficients normalised by the grid
size, the same normalisation as ScalarField.coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .coupling import CouplingSpec, grid_velocity_symbols
from .diagnostics import DiagnosticsRecord, default_kato_q, kato_weights, record
from .errors import BlowUpError, ConfigurationError, DomainError, StepRejected
from .spectral import Grid, ScalarField, derivative_symbol

CFL_LIMIT = 0.5
GROWTH_LIMIT = 1e6
MAX_HALVINGS = 30


@dataclass(frozen=True)
class SolverConfig:
    kappa: float = 1.0
    gamma: float = 1.0
    dt: float = 1e-2
    t_end: float = 1.0
    dealias: bool = True
    integrator: str = "etdrk2"
    snapshot_every: int = 10
    diagnostics_every: int = 1

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigurationError(f"kappa must be > 0, got {self.kappa}")
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be > 0, got {self.gamma}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be > 0, got {self.t_end}")
        if not self.dt <= self.t_end:
            raise ConfigurationError(f"dt = {self.dt} exceeds t_end = {self.t_end}")
        if self.integrator not in ("etdrk1", "etdrk2"):
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if self.snapshot_every < 1 or self.diagnostics_every < 1:
            raise ConfigurationError("snapshot_every and diagnostics_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z, with the removable singularity at 0 filled by a series."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    safe = np.where(small, 1.0, z)
    series = 1 + z / 2 + z ** 2 / 6 + z ** 3 / 24 + z ** 4 / 120 + z ** 5 / 720
    return np.where(small, series, np.expm1(safe) / safe)


def phi2(z: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z)/z^2."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    safe = np.where(small, 1.0, z)
    series = 0.5 + z / 6 + z ** 2 / 24 + z ** 3 / 120 + z ** 4 / 720 + z ** 5 / 5040
    return np.where(small, series, (np.expm1(safe) - safe) / safe ** 2)


class SpectralModel:
    """Precomputed multipliers for one (grid, coupling, gamma, kappa, dealias)."""

    def __init__(self, grid: Grid, spec: CouplingSpec, gamma: float, kappa: float,
                 dealias: bool = True):
        self.grid = grid
        self.spec = spec
        self.gamma = gamma
        self.kappa = kappa
        self.dealias = dealias
        shape = grid.shape
        half = grid.half
        self.velocity_symbols = [np.ascontiguousarray(half(s))
                                 for s in grid_velocity_symbols(spec, grid)]
        self.active = any(np.any(s != 0) for s in self.velocity_symbols)
        self.ik = [np.ascontiguousarray(half(derivative_symbol(grid, j)))
                   for j in range(grid.n_dims)]
        self.kmag = np.ascontiguousarray(half(grid.kmag))
        self.rate = kappa * self.kmag ** (2.0 * gamma)
        self.mask = np.ascontiguousarray(half(grid.dealias_mask)) if dealias else None
        kept = self.kmag[self.mask] if dealias else self.kmag
        self.kmax = float(kept.max())
        self.size = grid.size
        self.axes = tuple(range(grid.n_dims))
        # weights turning half-layout sums into full-layout sums
        w = np.full(self.kmag.shape, 2.0)
        w[..., 0] = 1.0
        if shape[-1] % 2 == 0:
            w[..., -1] = 1.0
        self.half_weights = w
        self._etd_cache: dict[float, tuple] = {}

    # transforms ---------------------------------------------------------
    def to_half(self, f: ScalarField) -> np.ndarray:
        return np.fft.rfftn(f.values) / self.size

    def to_values(self, ch: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(ch * self.size, s=self.grid.shape, axes=self.axes)

    def to_field(self, ch: np.ndarray) -> ScalarField:
        return ScalarField(self.grid, values=self.to_values(ch))

    def semigroup(self, ch: np.ndarray, t: float) -> np.ndarray:
        return np.exp(-self.rate * t) * ch

    # nonlinearity -------------------------------------------------------
    def flux_divergence(self, ch_theta: np.ndarray, ch_phi: np.ndarray,
                        phi_values: np.ndarray | None = None) -> tuple[np.ndarray, float]:
        """div(P[theta] phi) in half layout, plus max |u| in physical space."""
        if phi_values is None:
            phi_values = self.to_values(ch_phi)
        out = np.zeros_like(ch_theta)
        umax2 = np.zeros(self.grid.shape)
        for sym, ik in zip(self.velocity_symbols, self.ik):
            u = self.to_values(sym * ch_theta)
            umax2 += u * u
            out += ik * (np.fft.rfftn(u * phi_values) / self.size)
        if self.mask is not None:
            out *= self.mask
        out.flat[0] = 0.0
        return out, float(np.sqrt(umax2.max()))

    def nonlinear(self, ch: np.ndarray) -> tuple[np.ndarray, float, float]:
        """N(theta) = -div(u theta); also returns max|u| and max|theta|."""
        if not self.active:
            return np.zeros_like(ch), 0.0, float(np.abs(self.to_values(ch)).max())
        values = self.to_values(ch)
        flux, umax = self.flux_divergence(ch, None, values)
        return -flux, umax, float(np.abs(values).max())

    # time stepping ------------------------------------------------------
    def etd_coefficients(self, h: float):
        cached = self._etd_cache.get(h)
        if cached is None:
            z = -self.rate * h
            cached = (np.exp(z), h * phi1(z), h * phi2(z))
            if len(self._etd_cache) > 8:
                self._etd_cache.clear()
            self._etd_cache[h] = cached
        return cached

    def cfl(self, h: float, umax: float) -> float:
        return h * umax * self.kmax

    def step(self, ch: np.ndarray, h: float, integrator: str = "etdrk2",
             guard: bool = True) -> tuple[np.ndarray, float]:
        """Advance ``ch`` by ``h``; returns the new state and max|theta| before the step."""
        expz, p1, p2 = self.etd_coefficients(h)
        n0, umax, thmax = self.nonlinear(ch)
        if not (np.isfinite(umax) and np.isfinite(thmax)):
            raise BlowUpError("non-finite state")
        cfl = self.cfl(h, umax)
        if guard and cfl > CFL_LIMIT:
            raise StepRejected(f"advective number {cfl:.3f} > {CFL_LIMIT}", cfl)
        a = expz * ch + p1 * n0
        if integrator == "etdrk1" or not self.active:
            return a, thmax
        n1, _, _ = self.nonlinear(a)
        return a + p2 * (n1 - n0), thmax

    def energy(self, ch: np.ndarray, s: float = 0.0) -> float:
        """||Lambda^s theta||_2^2 from the half-layout coefficients."""
        if s == 0:
            weight = self.half_weights
        else:
            weight = self.half_weights * np.where(self.kmag > 0, self.kmag, 0.0) ** (2 * s)
        return self.grid.volume * float(np.sum(weight * np.abs(ch) ** 2))


@lru_cache(maxsize=16)
def get_model(grid: Grid, spec: CouplingSpec, gamma: float, kappa: float,
              dealias: bool) -> SpectralModel:
    return SpectralModel(grid, spec, gamma, kappa, dealias)


def model_for(grid: Grid, cfg: SolverConfig, spec: CouplingSpec) -> SpectralModel:
    return get_model(grid, spec, float(cfg.gamma), float(cfg.kappa), bool(cfg.dealias))


def nonlinear_term(theta: ScalarField, spec: CouplingSpec, dealias: bool = True) -> ScalarField:
    """-div(u theta) with u = P[theta]; product in physical space."""
    model = get_model(theta.grid, spec, 1.0, 1.0, bool(dealias))
    n, _, _ = model.nonlinear(model.to_half(theta))
    if not np.all(np.isfinite(n)):
        raise BlowUpError("non-finite nonlinear term")
    values = model.to_values(n)
    c = np.fft.fftn(values) / model.size
    c.flat[0] = 0.0
    return ScalarField(theta.grid, values=values, coefficients=c)


def step(state: ScalarField, t: float, cfg: SolverConfig, spec: CouplingSpec) -> ScalarField:
    """One exponential-integrator step of size cfg.dt.

    Raises StepRejected when dt * max|u| * k_max exceeds the guard; the
    caller is expected to halve dt.
    """
    model = model_for(state.grid, cfg, spec)
    ch = model.to_half(state)
    if not np.all(np.isfinite(ch)):
        raise BlowUpError("non-finite state", time=t, last_good=None)
    new, _ = model.step(ch, cfg.dt, cfg.integrator)
    if not np.all(np.isfinite(new)):
        raise BlowUpError("non-finite state after step", time=t + cfg.dt, last_good=state)
    return model.to_field(new)


@dataclass
class Trajectory:
    times: list[float]
    snapshots: list[ScalarField]
    diagnostics: list[DiagnosticsRecord]
    snapshot_times: list[float] = field(default_factory=list)
    dt_final: float = 0.0
    rejections: int = 0
    steps: int = 0

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1]

    def series(self, name: str) -> list[tuple[float, float]]:
        return [(r.t, getattr(r, name)) for r in self.diagnostics]

    def snapshot_at(self, t: float) -> ScalarField:
        for ts, snap in zip(self.snapshot_times, self.snapshots):
            if abs(ts - t) <= 1e-9 * max(1.0, abs(t)):
                return snap
        raise KeyError(f"no snapshot at t={t}")


def evolve(theta0: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
           diagnostics: bool = True, q: float | None = None,
           step_hook: Callable[[float, np.ndarray, SpectralModel], None] | None = None
           ) -> Trajectory:
    """Integrate from theta0 to cfg.t_end.

    Snapshots and diagnostics are taken on the nominal lattice of multiples
    of ``cfg.dt`` (every ``snapshot_every`` / ``diagnostics_every`` macro
    steps).  A step that violates the advective guard is rejected and dt is
    halved for the remainder of the run; each macro step is then made of
    2^h substeps so the output lattice is unchanged.
    """
    grid = theta0.grid
    model = model_for(grid, cfg, spec)
    ch = model.to_half(theta0)
    if not np.all(np.isfinite(ch)):
        raise BlowUpError("initial datum is not finite", time=0.0)
    init_max = float(np.abs(theta0.values).max())
    growth_cap = GROWTH_LIMIT * max(init_max, 1e-300)

    traj = Trajectory(times=[0.0], snapshots=[theta0], diagnostics=[],
                      snapshot_times=[0.0])
    if diagnostics:
        traj.diagnostics.append(record(theta0, 0.0, spec, cfg.gamma, q))
    if step_hook is not None:
        step_hook(0.0, ch, model)

    n_macro = cfg.n_steps
    substeps = 1
    for m in range(1, n_macro + 1):
        done = 0
        t_base = (m - 1) * cfg.dt
        while done < substeps:
            h = cfg.dt / substeps
            try:
                new, thmax = model.step(ch, h, cfg.integrator)
            except StepRejected:
                traj.rejections += 1
                substeps *= 2
                done *= 2
                if substeps > 2 ** MAX_HALVINGS:
                    raise BlowUpError("time step underflow", time=t_base,
                                      last_good=model.to_field(ch))
                continue
            if not np.all(np.isfinite(new)) or thmax > growth_cap:
                raise BlowUpError(f"blow-up detected near t={t_base + done * h:.6g}",
                                  time=t_base + done * h, last_good=model.to_field(ch))
            ch = new
            done += 1
            traj.steps += 1
            if step_hook is not None:
                step_hook(t_base + done * h, ch, model)
        t = m * cfg.dt
        is_last = m == n_macro
        snap = None
        if m % cfg.snapshot_every == 0 or is_last:
            snap = model.to_field(ch)
            traj.snapshots.append(snap)
            traj.snapshot_times.append(t)
            traj.times.append(t)
        if diagnostics and (m % cfg.diagnostics_every == 0 or is_last):
            traj.diagnostics.append(record(snap or model.to_field(ch), t, spec, cfg.gamma, q))
    traj.dt_final = cfg.dt / substeps
    return traj


def energy_balance_residuals(theta0: ScalarField, cfg: SolverConfig,
                             spec: CouplingSpec) -> np.ndarray:
    """Per-step residual of d/dt ||theta||_2^2 + 2 kappa ||Lambda^gamma theta||_2^2.

    The derivative is the forward difference over one step and the
    dissipation term is the trapezoidal average of its end values, so the
    residual of a second-order scheme is O(dt^2).
    """
    energies: list[tuple[float, float, float]] = []

    def hook(t, ch, model):
        energies.append((t, model.energy(ch), model.energy(ch, cfg.gamma)))

    evolve(theta0, cfg, spec, diagnostics=False, step_hook=hook)
    out = []
    for (t0, e0, d0), (t1, e1, d1) in zip(energies, energies[1:]):
        out.append((e1 - e0) / (t1 - t0) + cfg.kappa * (d0 + d1))
    return np.array(out)


# mild formulation ---------------------------------------------------------

@dataclass
class SampledPath:
    """A field sampled on uniform nodes t_0 = 0 < ... < t_{M-1}."""

    times: np.ndarray
    fields: list[ScalarField]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.fields):
            raise ConfigurationError("path times and fields differ in length")

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid


def _check_nodes(times: np.ndarray):
    if len(times) < 8:
        raise ConfigurationError(f"need at least 8 nodes, got {len(times)}")
    h = np.diff(times)
    if times[0] != 0 or np.any(h <= 0) or np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        raise ConfigurationError("nodes must be uniform and start at t = 0")


def duhamel_path(model: SpectralModel, theta: Sequence[np.ndarray], phi: Sequence[np.ndarray],
                 times: np.ndarray) -> list[np.ndarray]:
    """B(theta, phi) at every node (half layout), by exponential trapezoid quadrature.

    On each interval the flux divergence is interpolated linearly in s and
    integrated exactly against G(t - s).
    """
    h = float(times[1] - times[0])
    expz, p1, p2 = model.etd_coefficients(h)
    w0 = p1 - p2
    w1 = p2
    fluxes = []
    for ch_t, ch_p in zip(theta, phi):
        f, _ = model.flux_divergence(ch_t, ch_p)
        if not np.all(np.isfinite(f)):
            raise BlowUpError("non-finite flux in Duhamel quadrature")
        fluxes.append(f)
    out = [np.zeros_like(theta[0])]
    for m in range(len(times) - 1):
        out.append(expz * out[-1] - (w0 * fluxes[m] + w1 * fluxes[m + 1]))
    return out


def duhamel_bilinear(theta_path: SampledPath, phi_path: SampledPath, t: float,
                     cfg: SolverConfig, spec: CouplingSpec) -> ScalarField:
    """B(theta, phi)(t) = -int_0^t G(t - s) div(P[theta] phi)(s) ds at a node t."""
    times = theta_path.times
    if len(times) != len(phi_path.times) or np.any(np.abs(times - phi_path.times) > 1e-12):
        raise ConfigurationError("theta and phi paths must share one node set")
    _check_nodes(times)
    idx = int(np.argmin(np.abs(times - t)))
    if abs(times[idx] - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigurationError(f"t = {t} is not a quadrature node")
    model = model_for(theta_path.grid, cfg, spec)
    th = [model.to_half(f) for f in theta_path.fields[: idx + 1]]
    ph = [model.to_half(f) for f in phi_path.fields[: idx + 1]]
    if idx < 1:
        return model.to_field(np.zeros_like(th[0]))
    return model.to_field(duhamel_path(model, th, ph, times[: idx + 1])[-1])


@dataclass
class PicardRun:
    nodes: np.ndarray
    q: float
    eta: float
    iterates: list[SampledPath]
    kato_diffs: list[float]
    ratios: list[float]
    discrepancy: float | None = None
    evolve_final: ScalarField | None = None

    @property
    def final(self) -> ScalarField:
        return self.iterates[-1].fields[-1]

    @property
    def contracting(self) -> bool:
        return all(r < 1 for r in self.ratios)


def _sobolev_lq_half(model: SpectralModel, ch: np.ndarray, s: float, q: float) -> float:
    if s != 0:
        sym = np.where(model.kmag > 0, model.kmag, 0.0)
        with np.errstate(divide="ignore"):
            sym = np.where(model.kmag > 0, sym ** s, 0.0)
        ch = ch * sym
    v = np.abs(model.to_values(ch))
    vmax = float(v.max())
    if vmax == 0:
        return 0.0
    if math.isinf(q):
        return vmax
    return vmax * (float(np.sum((v / vmax) ** q)) * model.grid.cell_volume) ** (1 / q)


def kato_norm_path(model: SpectralModel, path: Sequence[np.ndarray], times: np.ndarray,
                   eta: float, s: float, q: float) -> float:
    """max over nodes t > 0 of t^eta ||Lambda^s theta(t)||_q."""
    return max(t ** eta * _sobolev_lq_half(model, ch, s, q)
               for t, ch in zip(times, path) if t > 0)


def picard_iterate(theta0: ScalarField, T: float, k_max: int, M: int, q: float | None,
                   cfg: SolverConfig, spec: CouplingSpec, compare: bool = True,
                   keep_iterates: bool = True) -> PicardRun:
    """Run the Picard sequence on M uniform nodes of [0, T].

    kato_diffs[k-1] is the sampled Kato norm of theta_{k+1} - theta_k (order
    beta - 1, exponent q, weight t^eta_q); ratios are successive quotients.
    With ``compare`` the final iterate is checked against ``evolve`` with
    ``cfg.dt`` up to T.
    """
    if k_max < 3:
        raise DomainError(f"k_max must be >= 3, got {k_max}")
    grid = theta0.grid
    n = grid.n_dims
    beta = spec.order
    if q is None:
        q = default_kato_q(n, cfg.gamma, beta)
    eta, _ = kato_weights(n, cfg.gamma, beta, q)
    nodes = np.linspace(0.0, T, M)
    _check_nodes(nodes)
    model = model_for(grid, cfg, spec)
    c0 = model.to_half(theta0)
    first = [model.semigroup(c0, t) for t in nodes]
    current = first
    paths = [first]
    diffs: list[float] = []
    for _ in range(k_max - 1):
        b = duhamel_path(model, current, current, nodes)
        nxt = [f + bb for f, bb in zip(first, b)]
        if not all(np.all(np.isfinite(x)) for x in nxt):
            raise BlowUpError("Picard iterate became non-finite")
        diffs.append(kato_norm_path(model, [a - c for a, c in zip(nxt, current)],
                                    nodes, eta, beta - 1.0, q))
        current = nxt
        paths.append(nxt)
        if not keep_iterates and len(paths) > 2:
            paths[-3] = None
    ratios = [diffs[i] / diffs[i - 1] if diffs[i - 1] > 0 else 0.0 for i in range(1, len(diffs))]

    def as_path(p):
        return SampledPath(nodes, [model.to_field(ch) for ch in p])

    iterates = [as_path(p) if p is not None else None for p in paths]
    run = PicardRun(nodes, q, eta, iterates, diffs, ratios)
    if compare:
        traj = evolve(theta0, cfg.with_(t_end=T, snapshot_every=10 ** 9), spec, diagnostics=False)
        ref = traj.final
        fin = run.final
        denom = math.sqrt(np.sum(ref.values ** 2))
        run.discrepancy = math.sqrt(np.sum((fin.values - ref.values) ** 2)) / max(denom, 1e-300)
        run.evolve_final = ref
    return run
