"""Diagonal density matrices as deviation-population vectors, and
transition-selective gates acting on them.

Only the traceless deviation from the uniform background is stored, so
every population vector sums to zero. All gates here are population
permutations built from ideal selective pi pulses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .spin_system import BasisState, SpinSystem, Transition

DEFAULT_PULSE_S = 0.1
KINDS = ("thermal", "pseudopure", "pops", "general")


@dataclass(frozen=True, eq=False)
class PopulationState:
    populations: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}")
        pops = np.array(self.populations, dtype=float)
        if pops.ndim != 1 or pops.size < 2 or pops.size & (pops.size - 1):
            raise ValueError("populations must be a vector of length 2**N")
        pops.setflags(write=False)
        object.__setattr__(self, "populations", pops)

    @property
    def n(self) -> int:
        return int(self.populations.size).bit_length() - 1

    def __add__(self, other: "PopulationState") -> "PopulationState":
        return PopulationState(self.populations + other.populations)

    def __sub__(self, other: "PopulationState") -> "PopulationState":
        return PopulationState(self.populations - other.populations)

    def __mul__(self, k: float) -> "PopulationState":
        return PopulationState(self.populations * k)

    __rmul__ = __mul__

    def __neg__(self) -> "PopulationState":
        return replace(self, populations=-self.populations)

    def nonzero(self, tol: float = 1e-12) -> dict[str, float]:
        """``{bits: population}`` for every entry with ``|p| > tol``."""
        return {
            format(i, f"0{self.n}b"): float(p)
            for i, p in enumerate(self.populations)
            if abs(p) > tol
        }

    def is_pops(self, tol: float = 1e-12) -> bool:
        nz = self.populations[np.abs(self.populations) > tol]
        return nz.size == 2 and math.isclose(nz[0], -nz[1], rel_tol=1e-9) and nz[0] != 0


def thermal_state(sys: SpinSystem) -> PopulationState:
    """High-temperature equilibrium: ``sum_i w_i (1/2 - b_i)`` per level."""
    n = sys.n
    idx = np.arange(2**n)
    pops = np.zeros(2**n)
    for i in range(n):
        b = (idx >> (n - 1 - i)) & 1
        pops += sys.weight(i) * (0.5 - b)
    return PopulationState(pops, "thermal")


def pseudopure(sys: SpinSystem, s: BasisState, epsilon: float = 1.0) -> PopulationState:
    """``epsilon * (delta_js - 2**-N)``: one level raised above a flat background."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if s.n != sys.n:
        raise ValueError("state does not belong to this system")
    pops = np.full(2**sys.n, -epsilon / 2**sys.n)
    pops[s.index] += epsilon
    return PopulationState(pops, "pseudopure")


def pops_state(sys: SpinSystem, positive: BasisState, negative: BasisState, scale: float = 1.0) -> PopulationState:
    """A POPS with ``+scale`` on ``positive`` and ``-scale`` on ``negative``."""
    if positive.index == negative.index:
        raise ValueError("a POPS needs two distinct states")
    pops = np.zeros(2**sys.n)
    pops[positive.index] = scale
    pops[negative.index] = -scale
    return PopulationState(pops, "pops")


def _check_owned(sys: SpinSystem | None, state: PopulationState, t: Transition) -> None:
    if state.populations.size != 2**t.lower.n:
        raise ValueError(f"transition {t} does not belong to this state's system")
    if sys is not None and not sys.owns(t):
        raise ValueError(f"transition {t} does not belong to this system")


def pi_pulse(state: PopulationState, t: Transition, sys: SpinSystem | None = None) -> PopulationState:
    """Exchange the populations of the two levels connected by ``t``."""
    _check_owned(sys, state, t)
    p = state.populations.copy()
    p[[t.lower.index, t.upper.index]] = p[[t.upper.index, t.lower.index]]
    return PopulationState(p, "general")


def make_pops(sys: SpinSystem, t: Transition) -> PopulationState:
    """Thermal state minus the thermal state after a selective pi pulse on ``t``.

    This is the no-pulse experiment minus the pulse experiment. The lower
    (more populated) level ends up positive.
    """
    th = thermal_state(sys)
    diff = th.populations - pi_pulse(th, t, sys).populations
    return PopulationState(diff, "pops")


def count_pops(n: int) -> int:
    """Number of distinct unordered state pairs, ``2**(N-1) * (2**N - 1)``."""
    return 2 ** (n - 1) * (2**n - 1)


@dataclass(frozen=True)
class GateSpec:
    """Controlled NOT (one target) or controlled SWAP (two targets).

    Spins are 0-based indices; ``controls`` maps spin -> required bit.
    """

    variant: str
    controls: Mapping[int, int]
    targets: tuple[int, ...]

    def validate(self, n: int) -> None:
        need = {"cnot": 1, "cswap": 2}.get(self.variant)
        if need is None:
            raise ValueError(f"unknown gate variant {self.variant!r}")
        if len(self.targets) != need or len(set(self.targets)) != need:
            raise ValueError(f"{self.variant} needs {need} distinct target(s)")
        ctrl = set(self.controls)
        if ctrl & set(self.targets):
            raise ValueError("targets overlap controls")
        if ctrl | set(self.targets) != set(range(n)):
            raise ValueError(f"controls must cover all {n - need} non-target spins")
        if any(v not in (0, 1) for v in self.controls.values()):
            raise ValueError("control values must be 0 or 1")

    @classmethod
    def cnot(cls, controls: str, target: int) -> "GateSpec":
        """From a control bit string over the non-target qubits (1-based target)."""
        n = len(controls) + 1
        spins = [i for i in range(n) if i != target - 1]
        return cls("cnot", dict(zip(spins, map(int, controls))), (target - 1,))

    @classmethod
    def cswap(cls, controls: str, u: int, v: int) -> "GateSpec":
        n = len(controls) + 2
        spins = [i for i in range(n) if i not in (u - 1, v - 1)]
        return cls("cswap", dict(zip(spins, map(int, controls))), (u - 1, v - 1))

    @classmethod
    def from_dict(cls, d: Mapping) -> "GateSpec":
        """Parse ``{"gate": "cnot", "controls": {"1": 0, ...}, "target": 5}``.

        Qubit numbers in the mapping are 1-based; cswap uses ``"targets": [u, v]``.
        """
        variant = d["gate"]
        controls = {int(k) - 1: int(v) for k, v in d["controls"].items()}
        if variant == "cnot":
            targets = (int(d["target"]) - 1,)
        else:
            targets = tuple(int(q) - 1 for q in d["targets"])
        return cls(variant, controls, targets)

    def to_dict(self) -> dict:
        d = {"gate": self.variant, "controls": {str(k + 1): v for k, v in sorted(self.controls.items())}}
        if self.variant == "cnot":
            d["target"] = self.targets[0] + 1
        else:
            d["targets"] = [q + 1 for q in self.targets]
        return d


@dataclass(frozen=True)
class Pulse:
    transition: Transition
    angle: float = math.pi
    duration: float = DEFAULT_PULSE_S


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for p in self.pulses:
            if not p.duration > 0:
                raise ValueError("pulse durations must be positive")

    @property
    def total_duration(self) -> float:
        return sum(p.duration for p in self.pulses)

    @property
    def labels(self) -> list[str]:
        return [str(p.transition.label) for p in self.pulses]

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        return PulseSequence(self.pulses + other.pulses)

    def __len__(self):
        return len(self.pulses)


def _state_from(n: int, assign: Mapping[int, int]) -> BasisState:
    idx = 0
    for spin, b in assign.items():
        idx |= b << (n - 1 - spin)
    return BasisState(idx, n)


def compile_cnot(sys: SpinSystem, g: GateSpec, duration: float = DEFAULT_PULSE_S) -> PulseSequence:
    """One selective pi pulse on the target line whose neighbours match the controls."""
    if g.variant != "cnot":
        raise ValueError("not a cnot spec")
    g.validate(sys.n)
    (tgt,) = g.targets
    lower = _state_from(sys.n, {**g.controls, tgt: 0})
    return PulseSequence((Pulse(sys.transition_between(lower, tgt), math.pi, duration),))


def compile_cswap(sys: SpinSystem, g: GateSpec, duration: float = DEFAULT_PULSE_S) -> PulseSequence:
    """``pi_r - pi_s - pi_r`` through the intermediate level with both swap bits 1.

    ``r`` joins (u=0, v=1) to (1, 1) and ``s`` joins (1, 1) to (1, 0); the
    net action exchanges the (0, 1) and (1, 0) levels.
    """
    if g.variant != "cswap":
        raise ValueError("not a cswap spec")
    g.validate(sys.n)
    u, v = g.targets
    mid = _state_from(sys.n, {**g.controls, u: 1, v: 1})
    r = sys.transition_between(mid, u)
    s = sys.transition_between(mid, v)
    return PulseSequence(tuple(Pulse(t, math.pi, duration) for t in (r, s, r)))


def compile_gate(sys: SpinSystem, g: GateSpec, duration: float = DEFAULT_PULSE_S) -> PulseSequence:
    if g.variant == "cnot":
        return compile_cnot(sys, g, duration)
    if g.variant == "cswap":
        return compile_cswap(sys, g, duration)
    raise ValueError(f"unknown gate variant {g.variant!r}")


def apply_sequence(
    state: PopulationState,
    seq: PulseSequence,
    relax: bool = False,
    t1_eff: float | None = None,
    sys: SpinSystem | None = None,
) -> PopulationState:
    """Apply the pulses in order.

    With ``relax`` the whole deviation vector decays by
    ``exp(-duration / t1_eff)`` after each pulse. ``t1_eff`` defaults to
    the system's value when ``sys`` is given.
    """
    if relax:
        if t1_eff is None:
            if sys is None:
                raise ValueError("relaxation needs t1_eff or a system")
            t1_eff = sys.t1_eff
    out = state
    for p in seq.pulses:
        if not math.isclose(p.angle, math.pi):
            raise ValueError("only pi pulses are supported")
        out = pi_pulse(out, p.transition, sys)
        if relax:
            out = out * math.exp(-p.duration / t1_eff)
    if not seq.pulses:
        return state
    if state.kind == "pops" and out.is_pops():
        out = replace(out, kind="pops")
    return out


def relax_for(state: PopulationState, duration: float, t1_eff: float) -> PopulationState:
    """Decay during a free delay of ``duration`` seconds."""
    return replace(state, populations=state.populations * math.exp(-duration / t1_eff))


def gate_truth_permutation(g: GateSpec, n: int) -> np.ndarray:
    """Index permutation ``perm[i] = image of basis state i`` from bit logic alone."""
    g.validate(n)
    perm = np.arange(2**n)
    for i in range(2**n):
        bits = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        if any(bits[c] != v for c, v in g.controls.items()):
            continue
        if g.variant == "cnot":
            bits[g.targets[0]] ^= 1
        else:
            u, v = g.targets
            bits[u], bits[v] = bits[v], bits[u]
        perm[i] = int("".join(map(str, bits)), 2)
    return perm


def permute(state: PopulationState, perm: Sequence[int]) -> PopulationState:
    """Move the population of level ``i`` to level ``perm[i]``."""
    p = np.empty_like(state.populations)
    p[np.asarray(perm)] = state.populations
    return PopulationState(p, state.kind if state.kind == "pops" else "general")


def all_gate_specs(n: int) -> Iterable[GateSpec]:
    """Every C^(N-1)-NOT and C^(N-2)-SWAP on ``n`` qubits."""
    import itertools

    for tgt in range(n):
        ctrl_spins = [i for i in range(n) if i != tgt]
        for vals in itertools.product((0, 1), repeat=n - 1):
            yield GateSpec("cnot", dict(zip(ctrl_spins, vals)), (tgt,))
    for u, v in itertools.permutations(range(n), 2):
        ctrl_spins = [i for i in range(n) if i not in (u, v)]
        for vals in itertools.product((0, 1), repeat=n - 2):
            yield GateSpec("cswap", dict(zip(ctrl_spins, vals)), (u, v))
