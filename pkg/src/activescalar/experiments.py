"""Studies that turn the qualitative statements into pass/fail desk experiments.

Each ``run_*`` function returns a :class:`StudyReport`: measured quantities
paired with predictions and tolerances, the admissibility verdict of the
configuration, and a table of time series that is written next to the
report as CSV.
"""
from __future__ import annotations

import csv
import datetime as _dt
import math
import os
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coupling import (AdmissibilityReport, CouplingSpec, check_admissibility,
                       scalar_symbols, zero_coupling)
from .diagnostics import (DiagnosticsRecord, check_monotone, circle_samples, critical_exponent,
                          default_kato_q, divergence_symbol_radiality, fit_decay,
                          kato_weights, lq_norm, sobolev_norm, symmetry_defect)
from .errors import ConfigurationError, DomainError, WindowError
from .evolve import SolverConfig, evolve, model_for, picard_iterate
from .initial_data import bump, normalize, profile_datum
from .spectral import (Grid, ScalarField, diffusive_length, lp_lq_exponent,
                       probe_lp_lq_decay, safe_time)

INF = math.inf

PASS, FAIL, INFO, EXPECTED = "pass", "fail", "info", "expected_mismatch"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "inf" if math.isinf(x) else format(float(x), ".17g")
    if isinstance(x, (list, tuple)):
        return ", ".join(_fmt(v) for v in x)
    return str(x)


@dataclass
class Check:
    """One measured quantity against its prediction.

    ``mode`` selects the comparison: ``relative`` (|m - p|/|p| <= tol, or
    |m| <= tol when p = 0), ``below`` (m < tol), ``above`` (m > tol) or
    ``info`` (recorded only).
    """

    name: str
    measured: float
    predicted: float | None
    tolerance: float | None
    mode: str = "relative"
    source: str = ""
    verdict: str = ""

    def __post_init__(self):
        if not self.verdict:
            self.verdict = self.evaluate()

    def evaluate(self) -> str:
        m = self.measured
        if self.mode == "info" or self.tolerance is None:
            return INFO
        if m is None or (isinstance(m, float) and not math.isfinite(m)):
            return FAIL
        if self.mode == "relative":
            p = self.predicted
            err = abs(m) if p == 0 else abs(m - p) / abs(p)
            return PASS if err <= self.tolerance else FAIL
        if self.mode == "below":
            return PASS if m < self.tolerance else FAIL
        if self.mode == "above":
            return PASS if m > self.tolerance else FAIL
        raise ValueError(f"unknown check mode {self.mode!r}")

    @property
    def failed(self) -> bool:
        return self.verdict == FAIL


@dataclass
class StudyReport:
    study: str
    config: dict
    admissibility: AdmissibilityReport
    checks: list[Check] = field(default_factory=list)
    quantities: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    table_header: tuple[str, ...] = ()
    table: list[list[float]] = field(default_factory=list)
    runtime: float = 0.0
    config_echo: str = ""

    @property
    def passed(self) -> bool:
        return not any(c.failed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def add(self, *args, **kwargs) -> Check:
        c = Check(*args, **kwargs)
        self.checks.append(c)
        return c

    def to_text(self) -> str:
        lines = [f"study = {self.study}", f"verdict = {'pass' if self.passed else 'fail'}",
                 f"runtime_seconds = {self.runtime:.3f}", "", "[config]"]
        lines += [f"{k} = {_fmt(v)}" for k, v in self.config.items()]
        a = self.admissibility
        lines += ["", "[admissibility]", f"verdict = {a.verdict}", f"n = {a.n}",
                  f"gamma = {_fmt(a.gamma)}", f"beta = {_fmt(a.beta)}", f"notes = {a.notes}"]
        for c in self.checks:
            lines += ["", f"[check {c.name}]", f"measured = {_fmt(c.measured)}",
                      f"predicted = {_fmt(c.predicted) if c.predicted is not None else 'none'}",
                      f"tolerance = {_fmt(c.tolerance) if c.tolerance is not None else 'none'}",
                      f"mode = {c.mode}", f"source = {c.source}", f"verdict = {c.verdict}"]
        if self.quantities:
            lines += ["", "[quantities]"]
            lines += [f"{k} = {_fmt(v)}" for k, v in self.quantities.items()]
        if self.notes:
            lines += ["", "[notes]"] + [f"note = {n}" for n in self.notes]
        if self.config_echo:
            lines += ["", "[config_echo]"] + ["  " + ln for ln in self.config_echo.splitlines()]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        rows = [f"{self.study}: {'PASS' if self.passed else 'FAIL'} "
                f"(admissibility: {self.admissibility.verdict}, {self.runtime:.1f} s)"]
        for c in self.checks:
            pred = "" if c.predicted is None else f" predicted {_fmt_short(c.predicted)}"
            tol = "" if c.tolerance is None else f" tol {_fmt_short(c.tolerance)}"
            rows.append(f"  [{c.verdict}] {c.name}: {_fmt_short(c.measured)}{pred}{tol}")
        return "\n".join(rows)

    def write(self, directory: str, prefix: str = "",
              stamp: str | None = None) -> tuple[str, str]:
        """Write ``<prefix><study>_<timestamp>.report`` and the companion CSV."""
        os.makedirs(directory, exist_ok=True)
        if stamp is None:
            stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
        base = os.path.join(directory, f"{prefix}{self.study}_{stamp}")
        with open(base + ".report", "w") as fh:
            fh.write(self.to_text())
        with open(base + ".csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.table_header)
            for row in self.table:
                writer.writerow([_fmt(v) for v in row])
        return base + ".report", base + ".csv"


def _fmt_short(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.4g}"
    return str(x)


def _new_report(study: str, grid: Grid, cfg: SolverConfig, spec: CouplingSpec,
                **extra) -> StudyReport:
    config = {"n_dims": grid.n_dims, "points": list(grid.points),
              "side_length": list(grid.side_length), "gamma": cfg.gamma,
              "kappa": cfg.kappa, "dt": cfg.dt, "t_end": cfg.t_end,
              "integrator": cfg.integrator, "dealias": cfg.dealias}
    config.update({f"coupling.{k}": v for k, v in spec.describe().items()})
    config.update(extra)
    adm = check_admissibility(grid.n_dims, cfg.gamma, spec.order)
    return StudyReport(study, config, adm)


def _diagnostics_table(report: StudyReport, records: Sequence[DiagnosticsRecord]):
    report.table_header = DiagnosticsRecord.FIELDS
    report.table = [r.as_row() for r in records]


def parse_q(q, n: int, gamma: float, beta: float) -> float:
    """Accept a number, ``inf`` or ``critical``."""
    if isinstance(q, str):
        key = q.strip().lower()
        if key in ("inf", "infinity"):
            return INF
        if key == "critical":
            return critical_exponent(n, gamma, beta)
        q = float(key)
    return float(q)


# decay --------------------------------------------------------------------

def support_radius(f: ScalarField, rel: float = 1e-12) -> float:
    """Largest distance from the origin where |f| exceeds rel * max|f|."""
    v = np.abs(f.values)
    mask = v > rel * v.max()
    return float(f.grid.radius[mask].max()) if np.any(mask) else 0.0


def default_decay_window(datum: ScalarField, gamma: float, kappa: float,
                         with_l1: bool) -> tuple[float, float]:
    """Fit window in time, chosen through the diffusive length (kappa t)^(1/2 gamma).

    L^1 data: from the support radius (the profile has forgotten its shape)
    to a quarter box.  Critical data: from 12 cells (the regularised
    core has been smoothed over) to 7.5% of the box (the outer cutoff of the
    power-law profile is not yet felt).
    """
    grid = datum.grid
    side = min(grid.side_length)
    if with_l1:
        lo, hi = support_radius(datum), 0.25 * side
    else:
        lo, hi = 12.0 * max(grid.spacing), 0.075 * side
    lo = max(lo, 4.0 * max(grid.spacing))
    to_t = lambda ell: ell ** (2.0 * gamma) / kappa
    return to_t(lo), to_t(hi)


def predicted_decay_slope(n: int, gamma: float, beta: float, q: float, with_l1: bool) -> float:
    """-eta_tilde_q, less (n + beta)/(2 gamma) - 1 more for L^1 data."""
    _, eta_tilde = kato_weights(n, gamma, beta, q)
    slope = -eta_tilde
    if with_l1:
        slope -= (n + beta) / (2.0 * gamma) - 1.0
    return slope + 0.0  # no negative zero in reports


def _series_for_q(records, theta_snapshots, q: float, n: int, gamma: float, beta: float):
    qc = critical_exponent(n, gamma, beta)
    if math.isinf(q):
        return [(r.t, r.linf) for r in records]
    if q == 1:
        return [(r.t, r.l1) for r in records]
    if q == 2:
        return [(r.t, r.l2) for r in records]
    if abs(q - qc) < 1e-12:
        return [(r.t, r.lq_critical) for r in records]
    return [(t, lq_norm(f, q)) for t, f in theta_snapshots]


def run_decay_study(datum: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
                    q_list: Sequence = ("inf",), with_l1: bool = False,
                    window: tuple[float, float] | None = None,
                    tolerance: float | None = None, monotone_tol: float = 1e-8,
                    config_echo: str = "") -> StudyReport:
    """Fit ||theta(t)||_q ~ t^slope inside the wrap-around-safe window.

    With ``with_l1`` the datum is rescaled to unit L^1 norm and the
    prediction gains the extra L^1 rate.  Non-increase of the L^1, L^2,
    critical and L^inf norms is checked along the whole run.
    """
    start = time.perf_counter()
    grid = datum.grid
    n, gamma, beta = grid.n_dims, cfg.gamma, spec.order
    if with_l1:
        datum = normalize(datum, 1.0)
    if tolerance is None:
        tolerance = 0.15 if with_l1 else 0.10
    qs = [parse_q(q, n, gamma, beta) for q in q_list]
    t_box = safe_time(grid, gamma, cfg.kappa)
    if window is None:
        window = default_decay_window(datum, gamma, cfg.kappa, with_l1)
    report = _new_report("decay", grid, cfg, spec, q_list=[_fmt(q) for q in qs],
                         with_l1=with_l1, window=list(window), t_box=t_box,
                         tolerance=tolerance, monotone_tol=monotone_tol)
    report.config_echo = config_echo
    if window[1] > t_box:
        report.notes.append(f"window end {window[1]:.4g} exceeds t_box {t_box:.4g}; clipped")
        window = (window[0], t_box)
    if cfg.t_end < window[1]:
        report.notes.append(f"t_end {cfg.t_end:.4g} ends before the window {window[1]:.4g}")
    needs_snapshots = any(not (math.isinf(q) or q in (1, 2)
                               or abs(q - critical_exponent(n, gamma, beta)) < 1e-12)
                          for q in qs)
    run_cfg = cfg if needs_snapshots else cfg.with_(snapshot_every=10 ** 9)
    traj = evolve(datum, run_cfg, spec)
    snaps = list(zip(traj.snapshot_times, traj.snapshots))
    source = "L^1 data decay rate" if with_l1 else "critical data decay rate"
    for q in qs:
        series = _series_for_q(traj.diagnostics, snaps, q, n, gamma, beta)
        pred = predicted_decay_slope(n, gamma, beta, q, with_l1)
        try:
            fit = fit_decay(series, window, pred, tolerance, q)
        except DomainError as exc:
            report.notes.append(f"q={_fmt(q)}: {exc}")
            report.add(f"slope_q={_fmt(q)}", float("nan"), pred, tolerance, source=source)
            continue
        if pred == 0:
            # the critical norm is only bounded: a slow (logarithmic) decay is allowed
            report.add(f"slope_q={_fmt(q)}", fit.slope, pred, tolerance, mode="below",
                       source="critical norm bounded")
        else:
            report.add(f"slope_q={_fmt(q)}", fit.slope, pred, tolerance, source=source)
        report.quantities[f"fit_points_q={_fmt(q)}"] = fit.n_points
        report.quantities[f"fit_residual_q={_fmt(q)}"] = fit.residual
    for name in ("l1", "l2", "lq_critical", "linf"):
        series = [(t, v) for t, v in traj.series(name) if t <= t_box]
        if any(not math.isfinite(v) for _, v in series):
            continue
        bad = check_monotone(series, monotone_tol)
        report.add(f"monotone_{name}", float(len(bad)), 0.0, 0.5, mode="below",
                   source="maximum principle")
        if bad:
            report.quantities[f"first_violation_{name}"] = series[bad[0]][0]
    report.quantities["rejections"] = traj.rejections
    report.quantities["dt_final"] = traj.dt_final
    _diagnostics_table(report, traj.diagnostics)
    report.runtime = time.perf_counter() - start
    return report


# scaling -----------------------------------------------------------------

def dilate_samples(f: ScalarField, lam: int, amplitude: float = 1.0,
                   rel: float = 1e-12) -> ScalarField:
    """amplitude * f(lam x) on the same grid, by subsampling about the origin.

    Only integer lam are supported; f must vanish (to ``rel``) outside the
    central box |x_j| < side_j / (2 lam), otherwise the dilation would wrap.
    """
    if int(lam) != lam or lam < 2:
        raise ConfigurationError(f"lambda must be an integer >= 2, got {lam}")
    lam = int(lam)
    grid = f.grid
    v = f.values
    scale = float(np.abs(v).max())
    idx_in, idx_out = [], []
    for axis, n in enumerate(grid.shape):
        c = _origin_index(grid, axis)
        half = n // (2 * lam)
        lo, hi = c - half, c + half
        if lo < 0 or hi > n or c - lam * half < 0 or c + lam * half > n:
            raise ConfigurationError("grid origin too close to the box edge for dilation")
        idx_out.append(slice(lo, hi))
        idx_in.append(slice(c - lam * half, c + lam * half, lam))
    inside = np.zeros(grid.shape, dtype=bool)
    inside[tuple(slice(_origin_index(grid, a) - n // (2 * lam),
                       _origin_index(grid, a) + n // (2 * lam)) for a, n in
                 enumerate(grid.shape))] = True
    if scale > 0 and np.abs(v[~inside]).max(initial=0.0) > rel * scale:
        raise ConfigurationError(
            "support-too-wide: datum does not vanish outside the central 1/lambda box")
    out = np.zeros(grid.shape)
    out[tuple(idx_out)] = amplitude * v[tuple(idx_in)]
    return ScalarField(grid, values=out)


def _origin_index(grid: Grid, axis: int) -> int:
    h = grid.spacing[axis]
    m = grid.origin[axis] / h
    if abs(m - round(m)) > 1e-9:
        raise ConfigurationError("grid origin must sit on a grid point")
    return int(round(m))


def _central_slices(grid: Grid, lam: int) -> tuple[tuple[slice, ...], tuple[slice, ...]]:
    """Sample slices |x_j| < side_j/(4 lam) in the dilated frame and lam x in the original."""
    small, big = [], []
    for axis, n in enumerate(grid.shape):
        c = _origin_index(grid, axis)
        half = n // (4 * lam)
        small.append(slice(c - half, c + half))
        big.append(slice(c - lam * half, c + lam * half, lam))
    return tuple(small), tuple(big)


def _rel_max(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.abs(b).max())
    return float(np.abs(a - b).max()) / scale if scale > 0 else float(np.abs(a).max())


def _paired_runs(theta0: ScalarField, cfg: SolverConfig, spec: CouplingSpec):
    """Runs at dt and at half the step actually used, on one snapshot lattice."""
    coarse = evolve(theta0, cfg, spec, diagnostics=False)
    h = coarse.dt_final / 2
    ratio = int(round(cfg.dt / h))
    fine = evolve(theta0, cfg.with_(dt=h, snapshot_every=cfg.snapshot_every * ratio),
                  spec, diagnostics=False)
    return coarse, fine


def run_scaling_study(datum: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
                      lam: float = 2.0, config_echo: str = "") -> StudyReport:
    """Compare the dilated run with lam^(2g-b) theta(lam x, lam^(2g) t).

    The original run goes to lam^(2 gamma) t_end with step lam^(2 gamma) dt
    so that both runs share a snapshot lattice.  The discrepancy is the
    largest relative difference over common samples (central region) and
    snapshot times; the self-convergence error is the largest relative
    change of either run when its step is halved.
    """
    start = time.perf_counter()
    grid = datum.grid
    gamma, beta = cfg.gamma, spec.order
    lam_int = int(lam)
    amp = lam ** (2 * gamma - beta)
    dilated0 = dilate_samples(datum, lam_int, amp)
    tfac = lam ** (2 * gamma)
    report = _new_report("scaling", grid, cfg, spec, **{"lambda": lam})
    report.config_echo = config_echo
    t_box = safe_time(grid, gamma, cfg.kappa)
    if tfac * cfg.t_end > t_box:
        report.notes.append(f"original run reaches {tfac * cfg.t_end:.4g} > t_box {t_box:.4g}")
    cfg_orig = cfg.with_(dt=cfg.dt * tfac, t_end=cfg.t_end * tfac)
    orig, orig_fine = _paired_runs(datum, cfg_orig, spec)
    dil, dil_fine = _paired_runs(dilated0, cfg, spec)
    small, big = _central_slices(grid, lam_int)
    disc, self_err = 0.0, 0.0
    rows = []
    for k, (a, b) in enumerate(zip(dil.snapshots, orig.snapshots)):
        lhs = a.values[small]
        rhs = amp * b.values[big]
        d = _rel_max(rhs, lhs)
        s = max(_rel_max(a.values, dil_fine.snapshots[k].values),
                _rel_max(b.values, orig_fine.snapshots[k].values))
        rows.append([dil.snapshot_times[k], d, s])
        disc, self_err = max(disc, d), max(self_err, s)
    report.table_header = ("t", "discrepancy", "self_convergence")
    report.table = rows
    report.quantities["self_convergence"] = self_err
    report.quantities["discrepancy"] = disc
    # round-off floor keeps the exactly covariant (linear) case meaningful
    bound = 3.0 * self_err + 1e-10
    covariant = spec.is_homogeneous or not model_for(grid, cfg, spec).active
    if covariant:
        report.add("scaling_discrepancy", disc, bound, bound, mode="below",
                   source="scaling map, homogeneous symbols")
    elif spec.family in ("log_field", "log_power", "loglog_power"):
        c = Check("scaling_discrepancy", disc, bound, bound, mode="above",
                  source="no exact scaling for non-homogeneous symbols")
        c.verdict = EXPECTED if c.verdict == PASS else FAIL
        report.checks.append(c)
        report.quantities["expected_mismatch"] = c.verdict == EXPECTED
    else:
        report.add("scaling_discrepancy", disc, bound, None, mode="info",
                   source="custom symbol, homogeneity not declared")
    report.runtime = time.perf_counter() - start
    return report


# symmetry ----------------------------------------------------------------

def symbol_parity(spec: CouplingSpec, n: int, samples: int = 64, seed: int = 7,
                  tol: float = 1e-10) -> str:
    """``even``, ``odd`` or ``mixed`` parity of the scalar symbols P_i."""
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n, samples)) * np.exp(rng.uniform(-2, 3, size=samples))
    plus = scalar_symbols(spec, [x for x in xi])
    minus = scalar_symbols(spec, [-x for x in xi])
    even = odd = True
    for p, m in zip(plus, minus):
        scale = max(float(np.abs(p).max()), 1e-300)
        even &= float(np.abs(p - m).max()) <= tol * scale
        odd &= float(np.abs(p + m).max()) <= tol * scale
    if even and not odd:
        return "even"
    if odd and not even:
        return "odd"
    return "zero" if even and odd else "mixed"


RADIAL_SYMBOL_TOL = 1e-6
RADIAL_REGION = 0.25


def run_symmetry_study(datum: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
                       datum_kind: str, preserve_tol: float = 1e-8,
                       break_tol: float = 1e-3, radial_tol: float = 1e-3,
                       config_echo: str = "") -> StudyReport:
    """Track a symmetry defect along the run and compare with the expected behaviour.

    Odd/even data are expected to keep their parity when the scalar symbols
    P_i share it and to lose it when P_i have the opposite parity.  A radial
    datum stays radial when div_xi P is radial; a nonradial datum is
    expected to stay nonradial.
    """
    start = time.perf_counter()
    grid = datum.grid
    if datum_kind not in ("odd", "even", "radial", "nonradial"):
        raise ConfigurationError(f"unknown symmetry datum kind {datum_kind!r}")
    kind = "radial" if datum_kind in ("radial", "nonradial") else datum_kind
    report = _new_report("symmetry", grid, cfg, spec, datum_kind=datum_kind)
    report.config_echo = config_echo
    t_box = safe_time(grid, cfg.gamma, cfg.kappa)
    if cfg.t_end > t_box * (1 + 1e-12):
        report.notes.append(f"t_end {cfg.t_end:.4g} exceeds t_box {t_box:.4g}")
    traj = evolve(datum, cfg, spec)
    # periodic images break rotation invariance far out; radial checks stay in the safe disc
    rmax = RADIAL_REGION * min(grid.side_length) if kind == "radial" else None
    defects = [symmetry_defect(f, kind, rmax) for f in traj.snapshots]
    report.table_header = ("t", f"{kind}_defect")
    report.table = [[t, d] for t, d in zip(traj.snapshot_times, defects)]
    report.quantities["initial_defect"] = defects[0]
    report.quantities["final_defect"] = defects[-1]
    report.quantities["max_defect"] = max(defects)
    if kind in ("odd", "even"):
        parity = symbol_parity(spec, grid.n_dims)
        report.quantities["symbol_parity"] = parity
        if parity == kind or parity == "zero":
            report.add(f"{kind}_defect_max", max(defects), 0.0, preserve_tol, mode="below",
                       source="symmetry preserved when data and P_i share parity")
        elif parity in ("odd", "even"):
            report.add(f"{kind}_defect_final", defects[-1], None, break_tol, mode="above",
                       source="symmetry lost when data and P_i have opposite parity")
        else:
            report.add(f"{kind}_defect_final", defects[-1], None, None, mode="info",
                       source="mixed-parity symbols: no prediction")
    else:
        shells = [1.0, 2.0, 5.0, 20.0]
        radiality = divergence_symbol_radiality(spec, _shell_samples(grid.n_dims, shells))
        report.quantities["div_symbol_radiality"] = radiality
        radial_symbol = radiality < RADIAL_SYMBOL_TOL
        if datum_kind == "radial" and radial_symbol:
            floor = defects[0]
            report.quantities["binning_floor"] = floor
            report.quantities["radial_region"] = rmax
            report.add("radial_defect_max", max(defects), floor, floor + radial_tol,
                       mode="below", source="radial data stay radial when div_xi P is radial")
        elif datum_kind == "nonradial" and radial_symbol:
            report.add("radial_defect_final", defects[-1], None, break_tol, mode="above",
                       source="nonradial data stay nonradial")
        else:
            report.add("radial_defect_max", max(defects), None, None, mode="info",
                       source="div_xi P not radial: no prediction")
    report.runtime = time.perf_counter() - start
    return report


def _shell_samples(n: int, radii: Sequence[float]) -> np.ndarray:
    if n == 2:
        return circle_samples(radii)
    rng = np.random.default_rng(5)
    dirs = rng.normal(size=(24, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.concatenate([r * dirs for r in radii])


# Picard ------------------------------------------------------------------

def _rel_l2(a: ScalarField, b: ScalarField) -> float:
    denom = math.sqrt(float(np.sum(b.values ** 2)))
    num = math.sqrt(float(np.sum((a.values - b.values) ** 2)))
    return num / denom if denom > 0 else num


def run_picard_study(datum: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
                     amplitudes: Sequence[float] = (0.1, 1.0, 4.0, 16.0, 64.0),
                     k_max: int = 6, q: float | None = None,
                     contraction_tol: float = 0.7, agreement_tol: float = 1e-4,
                     config_echo: str = "") -> StudyReport:
    """Picard sequence on [0, t_end] for the datum scaled to each peak amplitude.

    Nodes are spaced by cfg.dt.  For the smallest nonzero amplitude the
    final iterate is compared with ``evolve`` and the discrepancy must lie
    within the combined self-convergence error (stepper at dt vs dt/2 plus
    Picard at M vs 2M - 1 nodes) and below ``agreement_tol``.
    """
    start = time.perf_counter()
    grid = datum.grid
    T = cfg.t_end
    M = cfg.n_steps + 1
    peak = float(np.abs(datum.values).max())
    if q is None:
        q = default_kato_q(grid.n_dims, cfg.gamma, spec.order)
    report = _new_report("picard", grid, cfg, spec, amplitudes=list(amplitudes), k_max=k_max,
                         nodes=M, q=q)
    report.config_echo = config_echo
    if T > safe_time(grid, cfg.gamma, cfg.kappa):
        report.notes.append("T exceeds the wrap-around-safe window")
    rows = []
    worst = []
    nonzero = sorted(a for a in amplitudes if a > 0)
    smallest = nonzero[0] if nonzero else None
    for amp in amplitudes:
        theta0 = datum * (amp / peak) if peak > 0 else datum
        try:
            run = picard_iterate(theta0, T, k_max, M, q, cfg, spec, compare=amp == smallest,
                                 keep_iterates=False)
        except Exception as exc:  # divergence is a result here, not an error
            report.notes.append(f"amplitude {amp:g}: {type(exc).__name__}: {exc}")
            worst.append(INF)
            rows.append([amp] + [float("nan")] * (k_max - 1) + [float("nan")] * (k_max - 2))
            continue
        diffs = run.kato_diffs
        ratios = [r if diffs[i] > 1e-300 else 0.0 for i, r in enumerate(run.ratios)]
        rows.append([amp] + list(diffs) + ratios)
        worst.append(max(ratios) if ratios else 0.0)
        report.quantities[f"ratios_amp={amp:g}"] = ratios
        if amp == 0:
            report.add("zero_amplitude_differences", max(diffs), 0.0, 1e-300, mode="below",
                       source="theta_k = G(t) 0 = 0")
        if amp == smallest:
            report.add("contraction_smallest", max(ratios), None, contraction_tol,
                       mode="below", source="Picard contraction for small data")
            fine_cfg = cfg.with_(dt=cfg.dt / 2)
            ref_fine = evolve(theta0, fine_cfg.with_(snapshot_every=10 ** 9), spec,
                              diagnostics=False).final
            e_stepper = _rel_l2(run.evolve_final, ref_fine)
            fine_run = picard_iterate(theta0, T, k_max, 2 * M - 1, q, cfg, spec, compare=False,
                                      keep_iterates=False)
            e_picard = _rel_l2(run.final, fine_run.final)
            combined = e_stepper + e_picard
            report.quantities["self_convergence_stepper"] = e_stepper
            report.quantities["self_convergence_picard"] = e_picard
            report.quantities["combined_self_convergence"] = combined
            report.add("picard_vs_evolve", run.discrepancy, None, min(combined, agreement_tol),
                       mode="below", source="mild solution equals the stepped solution")
    report.quantities["max_ratio_by_amplitude"] = worst
    order = sorted(zip(amplitudes, worst))
    monotone = all(b[1] >= a[1] * (1 - 1e-6) for a, b in zip(order, order[1:]) if a[0] > 0)
    report.add("degradation_monotone", float(monotone), None, 0.5, mode="above",
               source="contraction weakens as the data grow")
    report.quantities["breaks_contraction"] = any(w >= 1 for w in worst)
    report.table_header = (("amplitude",) + tuple(f"kato_diff_{k}" for k in range(1, k_max))
                           + tuple(f"ratio_{k}" for k in range(2, k_max)))
    report.table = rows
    report.runtime = time.perf_counter() - start
    return report


# continuous dependence ---------------------------------------------------

def perturbation_direction(grid: Grid, gamma: float, beta: float, seed: int = 11) -> ScalarField:
    """A smooth random bump mixture of unit critical norm."""
    rng = np.random.default_rng(seed)
    side = min(grid.side_length)
    total = None
    for _ in range(3):
        shift = tuple(rng.uniform(-0.05, 0.05, size=grid.n_dims) * side)
        b = bump(grid, side / 12, amplitude=rng.uniform(-1, 1), shift=shift)
        total = b if total is None else total + b
    return normalize(total, critical_exponent(grid.n_dims, gamma, beta))


def run_dependence_study(datum: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
                         perturbation_sizes: Sequence[float] = (1e-2, 1e-3, 1e-4),
                         direction: ScalarField | None = None, seed: int = 11,
                         spread_tol: float = 3.0, config_echo: str = "") -> StudyReport:
    """sup_t ||theta - theta_pert||_crit / ||theta0 - theta0_pert||_crit for each size."""
    start = time.perf_counter()
    grid = datum.grid
    n, gamma, beta = grid.n_dims, cfg.gamma, spec.order
    qc = critical_exponent(n, gamma, beta)
    if direction is None:
        direction = perturbation_direction(grid, gamma, beta, seed)
    report = _new_report("dependence", grid, cfg, spec,
                         perturbation_sizes=list(perturbation_sizes), seed=seed)
    report.config_echo = config_echo
    base = evolve(datum, cfg, spec, diagnostics=False)
    rows, ratios = [], []
    for size in perturbation_sizes:
        pert0 = datum + direction * size
        d0 = lq_norm(pert0 - datum, qc)
        traj = evolve(pert0, cfg, spec, diagnostics=False)
        sup = max(lq_norm(a - b, qc) for a, b in zip(traj.snapshots, base.snapshots))
        ratio = sup / d0 if d0 > 0 else 0.0
        rows.append([size, d0, sup, ratio])
        if size != 0:
            ratios.append(ratio)
        else:
            report.add("zero_perturbation", sup, 0.0, 1e-300, mode="below",
                       source="identical data give identical runs")
    report.table_header = ("size", "initial_difference", "sup_difference", "ratio")
    report.table = rows
    if ratios:
        spread = max(ratios) / min(ratios) if min(ratios) > 0 else INF
        report.quantities["ratios"] = ratios
        report.add("ratio_spread", spread, 1.0, spread_tol, mode="below",
                   source="continuous dependence on the data")
    report.runtime = time.perf_counter() - start
    return report


# smoothing ---------------------------------------------------------------

def shell_amplitude(f: ScalarField, k: float, width: float) -> float:
    """RMS coefficient modulus on the shell | |k'| - k | < width/2."""
    sel = np.abs(f.grid.kmag - k) < width / 2
    if not np.any(sel):
        raise DomainError(f"no modes on the shell |k| = {k}")
    return float(np.sqrt(np.mean(np.abs(f.coefficients[sel]) ** 2)))


def run_smoothing_study(datum: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
                        sample_times: Sequence[float] = (1e-3, 1e-2, 1e-1),
                        shells: Sequence[float] = (2.0, 4.0, 8.0, 16.0),
                        shell_time: float = 1e-2, shell_factor: float = 2.0,
                        q: float | None = None, config_echo: str = "") -> StudyReport:
    """Weighted norm t^eta_q ||theta||_{H^{beta-1}_q} at early times and shell damping."""
    start = time.perf_counter()
    grid = datum.grid
    n, gamma, beta = grid.n_dims, cfg.gamma, spec.order
    if q is None:
        q = default_kato_q(n, gamma, beta)
    eta, _ = kato_weights(n, gamma, beta, q)
    times = sorted(set(float(t) for t in sample_times) | {float(shell_time)})
    t_end = max(times)
    for t in times:
        m = t / cfg.dt
        if abs(m - round(m)) > 1e-6:
            raise ConfigurationError(f"sample time {t} is not a multiple of dt = {cfg.dt}")
    run_cfg = cfg.with_(t_end=t_end, snapshot_every=1)
    report = _new_report("smoothing", grid, run_cfg, spec, sample_times=list(sample_times),
                         shells=list(shells), shell_time=shell_time, q=q, eta=eta)
    report.config_echo = config_echo
    traj = _evolve_sampled(datum, run_cfg, spec, times)
    s = beta - 1.0
    weighted = []
    for t in sorted(sample_times):
        f = traj[t]
        target = f
        if s < 0:
            c = f.coefficients.copy()
            c.flat[0] = 0.0
            target = ScalarField(grid, coefficients=c)
        weighted.append((t, t ** eta * sobolev_norm(target, s, q)))
    report.quantities["kato_eta"] = eta
    finite = all(math.isfinite(w) for _, w in weighted)
    decreasing = all(b[1] > a[1] for a, b in zip(weighted, weighted[1:]))
    report.add("weighted_norm_finite", float(finite), None, 0.5, mode="above",
               source="Kato-weighted norm bounded")
    report.add("weighted_norm_decreases_toward_0", float(decreasing), None, 0.5, mode="above",
               source="weighted norm vanishes as t -> 0+")
    width = 2 * math.pi / max(grid.side_length)
    rows = [[t, w] for t, w in weighted]
    snap = traj[shell_time]
    for k in shells:
        a0 = shell_amplitude(datum, k, width)
        a1 = shell_amplitude(snap, k, width)
        measured = a1 / a0
        # linear damping mode by mode across the shell
        damped = ScalarField(grid, coefficients=datum.coefficients * np.exp(
            -cfg.kappa * shell_time * grid.kmag ** (2 * gamma)))
        predicted = shell_amplitude(damped, k, width) / a0
        factor = max(measured / predicted, predicted / measured)
        report.quantities[f"shell_{k:g}_suppression"] = measured
        report.quantities[f"shell_{k:g}_linear_prediction"] = predicted
        report.add(f"shell_{k:g}_factor", factor, 1.0, shell_factor, mode="below",
                   source="per-shell damping exp(-kappa t |k|^(2 gamma))")
    report.table_header = ("t", "weighted_norm")
    report.table = rows
    report.runtime = time.perf_counter() - start
    return report


def _evolve_sampled(datum: ScalarField, cfg: SolverConfig, spec: CouplingSpec,
                    times: Sequence[float]) -> dict[float, ScalarField]:
    """States at the requested times (multiples of cfg.dt) without storing every step."""
    wanted = {int(round(t / cfg.dt)): t for t in times}
    out: dict[float, ScalarField] = {}

    def hook(t, ch, m):
        k = int(round(t / cfg.dt))
        if k in wanted and abs(t - k * cfg.dt) < 1e-9 * max(1.0, t):
            out[wanted[k]] = m.to_field(ch)

    evolve(datum, cfg.with_(snapshot_every=10 ** 9), spec, diagnostics=False, step_hook=hook)
    missing = [t for t in times if t not in out]
    if missing:
        raise ConfigurationError(f"no state recorded at {missing}")
    return out


# linear semigroup probe --------------------------------------------------

def probe_data(grid: Grid, p: float) -> ScalarField:
    """Datum for the L^p -> L^q probe.

    p = 1: a narrow bump (4 cells), so the fit sees the fundamental-solution
    regime.  p > 1: a |x|^(-n/p) profile, whose L^p norm is dominated by
    every scale at once, so the decay follows the L^p rate.
    """
    dx = max(grid.spacing)
    if p == 1:
        return bump(grid, 4.0 * dx)
    return profile_datum(grid, grid.n_dims / p, core=3.0 * dx,
                         support=0.45 * min(grid.side_length))


def probe_times(grid: Grid, gamma: float, kappa: float = 1.0,
                count: int = 12) -> np.ndarray:
    """Log-spaced times with diffusive length from side/32 to side/8."""
    side = min(grid.side_length)
    lo = (side / 32) ** (2 * gamma) / kappa
    hi = (side / 8) ** (2 * gamma) / kappa
    return np.geomspace(lo, hi, count)


def run_semigroup_probe(grid: Grid, gammas: Sequence[float] = (0.75, 1.0),
                        pairs: Sequence[tuple[float, float]] = ((1, 2), (1, INF), (2, INF)),
                        kappa: float = 1.0, tolerance: float = 0.05,
                        config_echo: str = "") -> StudyReport:
    """Fitted decay of ||G(t) f||_q against -(n/2 gamma)(1/p - 1/q)."""
    start = time.perf_counter()
    cfg = SolverConfig(kappa=kappa, gamma=gammas[0])
    report = _new_report("probe_semigroup", grid, cfg, zero_coupling(grid.n_dims),
                         gammas=list(gammas), pairs=[f"{p:g}->{_fmt(q)}" for p, q in pairs],
                         tolerance=tolerance)
    report.config_echo = config_echo
    rows = []
    for gamma in gammas:
        times = probe_times(grid, gamma, kappa)
        for p, q in pairs:
            res = probe_lp_lq_decay(probe_data(grid, p), p, q, gamma, kappa, times)
            name = f"gamma={gamma:g},p={p:g},q={_fmt(q)}"
            report.add(name, res.slope, lp_lq_exponent(grid.n_dims, gamma, p, q), tolerance,
                       source="L^p -> L^q semigroup estimate")
            rows.append([gamma, p, q, res.slope, res.predicted_slope, res.relative_error])
    report.table_header = ("gamma", "p", "q", "slope", "predicted", "relative_error")
    report.table = rows
    report.runtime = time.perf_counter() - start
    return report


__all__ = [
    "Check", "StudyReport", "run_decay_study", "run_scaling_study", "run_symmetry_study",
    "run_picard_study", "run_dependence_study", "run_smoothing_study", "run_semigroup_probe",
    "default_decay_window", "predicted_decay_slope", "dilate_samples", "symbol_parity",
    "probe_data", "probe_times", "shell_amplitude", "support_radius", "parse_q",
    "diffusive_length",
]
