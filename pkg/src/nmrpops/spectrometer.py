"""Detection, rendering and S/N measurement.

Detection is the small-tip linear-response limit: every transition of
the observed species gives a stick whose amplitude is
``sin(tip) * (p_lower - p_upper)``. Rendering turns sticks into a
uniformly sampled, peak-height-normalised Lorentzian spectrum with
optional seeded Gaussian noise.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .spin_system import PeakLabel, SpinSystem, Transition, enumerate_transitions
from .state_engine import (
    DEFAULT_PULSE_S,
    PopulationState,
    PulseSequence,
    apply_sequence,
    make_pops,
    pi_pulse,
    relax_for,
    thermal_state,
)

DEFAULT_TIP = math.pi / 10
DEFAULT_STEP_HZ = 0.5
NOISE_WINDOW_HZ = 1000.0
#: clearance between the outermost line and the noise window / grid edge
GUARD_HZ = 300.0
#: per-experiment noise giving a no-gate POPS S/N of about 4.5e2
#: (see ``calibrate_noise_sigma``)
DEFAULT_NOISE_SIGMA = 1.5e-4


class UndefinedSNRError(ValueError):
    """S/N requested for a spectrum with a flat noise window."""


@dataclass(frozen=True)
class Stick:
    freq: float
    amplitude: float
    label: PeakLabel | None = None


@dataclass(frozen=True)
class StickSpectrum:
    species: str
    sticks: tuple[Stick, ...]

    def by_label(self) -> dict[PeakLabel, float]:
        return {s.label: s.amplitude for s in self.sticks}

    def signed_labels(self) -> dict[str, int]:
        return {str(s.label): int(np.sign(s.amplitude)) for s in self.sticks}

    def to_json(self) -> list[dict]:
        return [
            {"freq_hz": s.freq, "amplitude": s.amplitude, "peak_label": None if s.label is None else str(s.label)}
            for s in self.sticks
        ]


@dataclass(frozen=True)
class Grid:
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.count < 2:
            raise ValueError("grid needs at least two points")

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    @property
    def axis(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def index_of(self, f: float) -> int:
        return int(round((f - self.start) / self.step))


@dataclass(frozen=True, eq=False)
class SampledSpectrum:
    """Real spectrum on a uniform grid.

    ``noise_sigma`` is the per-render noise level (0 if noiseless, None
    once the values are no longer a simple signal-plus-noise, e.g. after
    multiplication). ``noise_window`` is the signal-free interval used
    for S/N and peak-picking noise estimates.
    """

    species: str
    grid: Grid
    values: np.ndarray
    noise_sigma: float | None = 0.0
    seed: int | None = None
    noise_window: tuple[float, float] | None = None

    @property
    def freqs(self) -> np.ndarray:
        return self.grid.axis

    def __sub__(self, other: "SampledSpectrum") -> "SampledSpectrum":
        _check_compatible(self, other)
        return SampledSpectrum(
            self.species, self.grid, self.values - other.values,
            self.noise_sigma, self.seed, self.noise_window,
        )

    def window_mask(self, window: tuple[float, float] | None = None) -> np.ndarray:
        lo, hi = window or self.noise_window or (self.grid.start, self.grid.stop)
        f = self.freqs
        return (f >= lo) & (f <= hi)


def _check_compatible(a: SampledSpectrum, b: SampledSpectrum) -> None:
    if a.species != b.species:
        raise ValueError(f"species mismatch: {a.species} vs {b.species}")
    if a.grid != b.grid:
        raise ValueError("grid mismatch")


def detect(state: PopulationState, sys: SpinSystem, species: str, tip_angle: float = DEFAULT_TIP) -> StickSpectrum:
    """Linear-response stick spectrum of one species."""
    if not 0 < tip_angle < math.pi / 2:
        raise ValueError("tip angle must lie in (0, pi/2)")
    spins = set(sys.spins_of(species))
    p = state.populations
    if p.size != 2**sys.n:
        raise ValueError("state does not belong to this system")
    scale = float(np.max(np.abs(p))) if p.size else 0.0
    tol = 1e-12 * scale
    gain = math.sin(tip_angle)
    sticks = []
    for t in enumerate_transitions(sys):
        if t.flipped_spin not in spins:
            continue
        diff = p[t.lower.index] - p[t.upper.index]
        if abs(diff) > tol:
            sticks.append(Stick(t.frequency, gain * float(diff), t.label))
    sticks.sort(key=lambda s: -s.freq)
    return StickSpectrum(species, tuple(sticks))


def species_transitions(sys: SpinSystem, species: str) -> list[Transition]:
    spins = set(sys.spins_of(species))
    return [t for t in enumerate_transitions(sys) if t.flipped_spin in spins]


def default_grid(sys: SpinSystem, species: str, step: float = DEFAULT_STEP_HZ) -> tuple[Grid, tuple[float, float]]:
    """Grid covering every line of ``species`` plus a low-frequency noise window.

    Returns ``(grid, noise_window)``. Lines sit on grid points whenever
    their frequencies are multiples of ``step``.
    """
    freqs = [t.frequency for t in species_transitions(sys, species)]
    lo = math.floor((min(freqs) - GUARD_HZ - NOISE_WINDOW_HZ) / step) * step
    hi = max(freqs) + GUARD_HZ
    count = int(math.ceil((hi - lo) / step)) + 1
    return Grid(lo, step, count), (lo, lo + NOISE_WINDOW_HZ)


def lorentzian(df: np.ndarray, fwhm: float) -> np.ndarray:
    """Peak-height-normalised Lorentzian (value 1 at ``df = 0``)."""
    hw = fwhm / 2
    return 1.0 / (1.0 + (df / hw) ** 2)


def linewidth(sys: SpinSystem, spin: int) -> float:
    """Full width at half height, ``1 / (pi T2*)``."""
    return 1.0 / (math.pi * sys.spins[spin].t2star)


def render(
    stick: StickSpectrum,
    sys: SpinSystem,
    grid: Grid | None = None,
    noise_sigma: float = 0.0,
    seed: int | None = None,
    noise_window: tuple[float, float] | None = None,
) -> SampledSpectrum:
    """Lorentzian lines plus additive Gaussian noise, reproducible per ``seed``."""
    if grid is None:
        grid, noise_window = default_grid(sys, stick.species)
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    half = grid.step / 2
    for s in stick.sticks:
        if not grid.start - half <= s.freq <= grid.stop + half:
            raise ValueError(f"grid [{grid.start}, {grid.stop}] Hz does not span line at {s.freq} Hz")
    f = grid.axis
    values = np.zeros(grid.count)
    for s in stick.sticks:
        spin = sys.spin_index(s.label.spin_name) if s.label is not None else sys.spins_of(stick.species)[0]
        values += s.amplitude * lorentzian(f - s.freq, linewidth(sys, spin))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        values += rng.normal(0.0, noise_sigma, grid.count)
    return SampledSpectrum(stick.species, grid, values, float(noise_sigma), seed, noise_window)


def _child_seeds(seed: int | None, k: int) -> list[int | None]:
    if seed is None:
        return [None] * k
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(k, dtype=np.uint64)]


def run_experiment(
    sys: SpinSystem,
    prep: Transition | None,
    gate: PulseSequence | None = None,
    relax: bool = True,
    prep_duration: float = DEFAULT_PULSE_S,
) -> PopulationState:
    """Population pipeline of one scan: selective pi pulse (or equal delay), then the gate."""
    state = thermal_state(sys)
    if prep is not None:
        state = pi_pulse(state, prep, sys)
    if relax:
        state = relax_for(state, prep_duration, sys.t1_eff)
    if gate is not None:
        state = apply_sequence(state, gate, relax=relax, sys=sys)
    return state


def pops_spectrum_by_subtraction(
    sys: SpinSystem,
    t: Transition,
    gate: PulseSequence | None,
    species: str,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    seed: int | None = None,
    tip_angle: float = DEFAULT_TIP,
    relax: bool = True,
    grid: Grid | None = None,
    noise_window: tuple[float, float] | None = None,
) -> SampledSpectrum:
    """Two-experiment POPS spectrum: (delay, gate) minus (pi pulse on ``t``, gate).

    Each experiment is rendered with its own noise draw before the
    subtraction, so the result carries sqrt(2) times ``noise_sigma``.
    """
    if grid is None:
        grid, noise_window = default_grid(sys, species)
    seed_i, seed_ii = _child_seeds(seed, 2)
    spectra = []
    for prep, s in ((t, seed_i), (None, seed_ii)):
        state = run_experiment(sys, prep, gate, relax=relax)
        sticks = detect(state, sys, species, tip_angle)
        spectra.append(render(sticks, sys, grid, noise_sigma, s, noise_window))
    fid_i, fid_ii = spectra
    out = fid_ii - fid_i
    return SampledSpectrum(species, grid, out.values, float(noise_sigma), seed, noise_window)


def direct_pops_state(sys: SpinSystem, t: Transition, gate: PulseSequence | None, relax: bool = True) -> PopulationState:
    """The POPS reached without subtraction; the noiseless reference path."""
    state = make_pops(sys, t)
    if relax:
        state = relax_for(state, DEFAULT_PULSE_S, sys.t1_eff)
    if gate is not None:
        state = apply_sequence(state, gate, relax=relax, sys=sys)
    return state


def snr(spec: SampledSpectrum, noise_window: tuple[float, float] | None = None) -> float:
    """``2.5 |H| / h``.

    ``H`` is the largest absolute value anywhere in the spectrum and ``h``
    the peak-to-peak excursion inside the signal-free ``noise_window``
    (defaults to the spectrum's own window). Spectra rendered without
    noise have no meaningful ``h`` and raise ``UndefinedSNRError``.
    """
    if spec.noise_sigma == 0:
        raise UndefinedSNRError("noiseless spectrum; S/N undefined")
    mask = spec.window_mask(noise_window)
    if mask.sum() < 2:
        raise ValueError("noise window holds fewer than two grid points")
    win = spec.values[mask]
    h = float(win.max() - win.min())
    if h <= 0:
        raise UndefinedSNRError("flat noise window; S/N undefined")
    return 2.5 * float(np.max(np.abs(spec.values))) / h


def calibrate_noise_sigma(
    sys: SpinSystem,
    t: Transition,
    species: str,
    target: float = 450.0,
    n_seeds: int = 20,
    sigma0: float = 1e-3,
    iterations: int = 3,
) -> float:
    """Noise level giving a mean S/N of ``target`` for the no-gate POPS on ``t``.

    Monte Carlo over ``n_seeds`` seeds; S/N scales close to ``1/sigma``,
    so a few fixed-point steps converge.
    """
    sigma = sigma0
    for _ in range(iterations):
        vals = [
            snr(pops_spectrum_by_subtraction(sys, t, None, species, sigma, seed))
            for seed in range(n_seeds)
        ]
        sigma *= float(np.mean(vals)) / target
    return sigma


def write_csv(spec: SampledSpectrum, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "amplitude"])
        for f, v in zip(spec.freqs, spec.values):
            w.writerow([f"{f:.6f}", f"{v:.6f}"])


def read_csv(path: str | Path, species: str = "") -> SampledSpectrum:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    f, v = data[:, 0], data[:, 1]
    step = float(f[1] - f[0])
    return SampledSpectrum(species, Grid(float(f[0]), step, len(f)), v, None)


def write_sticks_json(spec: StickSpectrum, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_json(), fh, indent=2)

