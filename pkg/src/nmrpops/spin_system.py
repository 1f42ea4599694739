"""First-order N-qubit spin systems, their transitions and peak labels.

Qubit ``q`` (1-based) is spin ``q - 1`` in ``SpinSystem.spins``; the
first qubit is the most significant bit of a basis-state index, so
``|00101>`` has index 5.

Within one spin's sub-spectrum the peaks are numbered from the left,
i.e. peak 1 has the highest frequency.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

MAX_SPINS = 16
#: two computed frequencies closer than this are considered identical
FREQ_TOL = 1e-9


class SpinSystemError(ValueError):
    """Raised for an invalid or unresolved spin-system description."""


class InfeasibleTargetError(SpinSystemError):
    """No symmetric coupling set reproduces the requested peak ordering."""


@dataclass(frozen=True)
class SpinDef:
    name: str
    species: str
    offset: float
    t2star: float = 0.1

    def __post_init__(self):
        if not self.t2star > 0:
            raise SpinSystemError(f"spin {self.name}: t2star must be positive")


@dataclass(frozen=True, order=True)
class BasisState:
    """Computational basis state; ``index`` uses qubit 1 as the MSB."""

    index: int
    n: int

    def __post_init__(self):
        if not 0 <= self.index < 2**self.n:
            raise ValueError(f"index {self.index} out of range for {self.n} qubits")

    @classmethod
    def from_bits(cls, bits: str) -> "BasisState":
        bits = bits.strip().strip("|>")
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"malformed basis state {bits!r}")
        return cls(int(bits, 2), len(bits))

    @property
    def bits(self) -> str:
        return format(self.index, f"0{self.n}b")

    def bit(self, spin: int) -> int:
        return (self.index >> (self.n - 1 - spin)) & 1

    def flip(self, spin: int) -> "BasisState":
        return BasisState(self.index ^ (1 << (self.n - 1 - spin)), self.n)

    def __str__(self):
        return self.bits


@dataclass(frozen=True, order=True)
class PeakLabel:
    spin_name: str
    peak_index: int

    @classmethod
    def parse(cls, text: str) -> "PeakLabel":
        text = text.strip()
        i = len(text.rstrip("0123456789"))
        if i == 0 or i == len(text):
            raise ValueError(f"malformed peak label {text!r}")
        return cls(text[:i], int(text[i:]))

    def __str__(self):
        return f"{self.spin_name}{self.peak_index}"


@dataclass(frozen=True)
class Transition:
    lower: BasisState
    upper: BasisState
    flipped_spin: int
    frequency: float
    label: PeakLabel

    def __post_init__(self):
        if self.lower.index ^ self.upper.index != 1 << (self.lower.n - 1 - self.flipped_spin):
            raise ValueError("lower and upper must differ exactly in the flipped spin")
        if self.lower.bit(self.flipped_spin) != 0:
            raise ValueError("lower level must have the flipped spin in state 0")

    def __str__(self):
        return str(self.label)


def neighbor_bits(bits: str, spin: int) -> str:
    """Bits of every spin except ``spin``, in qubit order."""
    return bits[:spin] + bits[spin + 1:]


def insert_bit(neighbors: str, spin: int, value: int) -> str:
    return neighbors[:spin] + str(value) + neighbors[spin:]


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """Immutable first-order spin system.

    ``couplings`` is an ``(N, N)`` symmetric array of effective first-order
    couplings in Hz with a zero diagonal. ``species_weights`` sets the
    thermal polarisation per nucleus species (default 1).
    """

    spins: tuple[SpinDef, ...]
    couplings: np.ndarray
    t1_eff: float = 0.65
    species_weights: Mapping[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.spins]

    @property
    def species(self) -> list[str]:
        """Species tags in order of first appearance."""
        return list(dict.fromkeys(s.species for s in self.spins))

    def spin_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown spin {name!r}") from None

    def spins_of(self, species: str) -> list[int]:
        idx = [i for i, s in enumerate(self.spins) if s.species == species]
        if not idx:
            raise KeyError(f"unknown species {species!r}")
        return idx

    def weight(self, spin: int) -> float:
        return float(self.species_weights.get(self.spins[spin].species, 1.0))

    def state(self, bits: str) -> BasisState:
        s = BasisState.from_bits(bits)
        if s.n != self.n:
            raise ValueError(f"state {bits!r} has {s.n} bits, system has {self.n} spins")
        return s

    @cached_property
    def _sub_spectra(self) -> list[list[Transition]]:
        # per spin, sorted by descending frequency (peak 1 first)
        out = []
        for i, spin in enumerate(self.spins):
            rows = []
            for nb in itertools.product("01", repeat=self.n - 1):
                nb = "".join(nb)
                rows.append((transition_frequency(self, i, nb), nb))
            rows.sort(key=lambda r: -r[0])
            trs = []
            for k, (f, nb) in enumerate(rows, start=1):
                lower = BasisState.from_bits(insert_bit(nb, i, 0))
                trs.append(Transition(lower, lower.flip(i), i, f, PeakLabel(spin.name, k)))
            out.append(trs)
        return out

    @cached_property
    def _by_label(self) -> dict[PeakLabel, Transition]:
        return {t.label: t for sub in self._sub_spectra for t in sub}

    @cached_property
    def _by_levels(self) -> dict[tuple[int, int], Transition]:
        return {(t.lower.index, t.flipped_spin): t for sub in self._sub_spectra for t in sub}

    def transition(self, label: str | PeakLabel) -> Transition:
        """Look up a transition by its peak label, e.g. ``'E13'``."""
        if isinstance(label, str):
            label = PeakLabel.parse(label)
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"unknown peak label {label}") from None

    def transition_between(self, state: BasisState, spin: int) -> Transition:
        """The transition of ``spin`` that connects ``state`` to its spin-flipped partner."""
        lower = state if state.bit(spin) == 0 else state.flip(spin)
        return self._by_levels[(lower.index, spin)]

    def owns(self, t: Transition) -> bool:
        return self._by_label.get(t.label) == t

    def to_config(self) -> dict:
        pairs = []
        for i, j in itertools.combinations(range(self.n), 2):
            pairs.append([self.names[i], self.names[j], float(self.couplings[i, j])])
        cfg = {
            "spins": [
                {"name": s.name, "species": s.species, "offset_hz": s.offset, "t2star_s": s.t2star}
                for s in self.spins
            ],
            "couplings_hz": pairs,
            "t1eff_s": self.t1_eff,
        }
        if self.species_weights:
            cfg["species_weights"] = dict(self.species_weights)
        return cfg


def transition_frequency(sys: SpinSystem, spin: int, neighbors: str | Sequence[int]) -> float:
    """First-order line position of ``spin`` given the other spins' bits.

    ``offset_i + sum_j c_ij (1 - 2 b_j) / 2``; flipping neighbour ``j``
    from 0 to 1 moves the line by ``-c_ij``.
    """
    bits = [int(b) for b in neighbors]
    if len(bits) != sys.n - 1:
        raise ValueError(f"need {sys.n - 1} neighbour bits, got {len(bits)}")
    others = [j for j in range(sys.n) if j != spin]
    f = sys.spins[spin].offset
    for j, b in zip(others, bits):
        f += sys.couplings[spin, j] * (1 - 2 * b) / 2
    return float(f)


def _validate(sys: SpinSystem) -> None:
    n = sys.n
    if not 2 <= n <= MAX_SPINS:
        raise SpinSystemError(f"need 2..{MAX_SPINS} spins, got {n}")
    if len(set(sys.names)) != n:
        raise SpinSystemError("duplicate spin names")
    c = sys.couplings
    if c.shape != (n, n):
        raise SpinSystemError(f"coupling table must be {n}x{n}")
    if not np.allclose(c, c.T, rtol=0, atol=0):
        raise SpinSystemError("coupling table is not symmetric")
    if np.any(np.diag(c) != 0):
        raise SpinSystemError("coupling table must have a zero diagonal")
    if not sys.t1_eff > 0:
        raise SpinSystemError("t1_eff must be positive")
    # resolved spectrum: no two lines of one species may coincide
    for sp in sys.species:
        freqs = np.sort([t.frequency for i in sys.spins_of(sp) for t in sys._sub_spectra[i]])
        gaps = np.diff(freqs)
        if gaps.size and gaps.min() <= FREQ_TOL:
            f = freqs[np.argmin(gaps)]
            raise SpinSystemError(f"degenerate transition frequencies near {f:.6g} Hz ({sp})")


def build_system(config: Mapping) -> SpinSystem:
    """Build and validate a system from a JSON-style mapping.

    ``couplings_hz`` is a list of ``[name_a, name_b, c_hz]`` triples; every
    unordered pair must appear, and a pair given twice must agree.
    """
    spins_cfg = config.get("spins") or []
    if len(spins_cfg) < 2:
        raise SpinSystemError("config must list at least two spins")
    spins = tuple(
        SpinDef(
            name=str(s["name"]),
            species=str(s.get("species", "1H")),
            offset=float(s.get("offset_hz", 0.0)),
            t2star=float(s.get("t2star_s", 0.1)),
        )
        for s in spins_cfg
    )
    names = [s.name for s in spins]
    if len(set(names)) != len(names):
        raise SpinSystemError("duplicate spin names")
    n = len(spins)
    c = np.full((n, n), np.nan)
    np.fill_diagonal(c, 0.0)
    for entry in config.get("couplings_hz", []):
        a, b, val = entry
        try:
            i, j = names.index(a), names.index(b)
        except ValueError:
            raise SpinSystemError(f"coupling refers to unknown spin in {entry!r}") from None
        if i == j:
            if float(val) != 0:
                raise SpinSystemError("self-coupling must be zero")
            continue
        for p, q in ((i, j), (j, i)):
            if not np.isnan(c[p, q]) and c[p, q] != float(val):
                raise SpinSystemError(f"non-symmetric coupling for pair {a}-{b}")
            c[p, q] = float(val)
    if np.isnan(c).any():
        raise SpinSystemError("coupling table is incomplete")
    sys = SpinSystem(
        spins=spins,
        couplings=c,
        t1_eff=float(config.get("t1eff_s", 0.65)),
        species_weights=dict(config.get("species_weights", {})),
    )
    _validate(sys)
    return sys


def load_system(path: str | Path) -> SpinSystem:
    with open(path) as fh:
        return build_system(json.load(fh))


def example_system_path() -> Path:
    return Path(__file__).parent / "data" / "fivequbit.json"


def example_system() -> SpinSystem:
    """The shipped 5-qubit system (spins A, B: 1H; C, D, E: 19F)."""
    return load_system(example_system_path())


def enumerate_transitions(sys: SpinSystem) -> list[Transition]:
    """All ``N * 2**(N-1)`` single-spin-flip transitions, spin by spin."""
    return [t for sub in sys._sub_spectra for t in sub]


def peak_table(sys: SpinSystem, spin: int) -> dict[int, str]:
    """Map peak index (1 = highest frequency) to neighbour configuration."""
    return {t.label.peak_index: neighbor_bits(t.lower.bits, spin) for t in sys._sub_spectra[spin]}


def pattern_of(sys: SpinSystem, state: BasisState) -> list[tuple[int, PeakLabel]]:
    """Signed peak of each spin for a pseudopure ``state``.

    Spin ``i`` contributes the line whose neighbour configuration matches
    ``state``, positive when ``b_i = 0`` and negative when ``b_i = 1``.
    """
    out = []
    for i in range(sys.n):
        t = sys.transition_between(state, i)
        out.append((1 - 2 * state.bit(i), t.label))
    return out


def format_pattern(pattern: Sequence[tuple[int, PeakLabel]]) -> list[str]:
    return [f"{'+' if s > 0 else '-'}{lab}" for s, lab in pattern]


def target_from_rows(rows: Mapping[str, Sequence[tuple[int, str, int]]], names: Sequence[str]) -> dict[int, dict[str, int]]:
    """Convert pattern rows ``{bits: [(sign, spin, idx), ...]}`` to per-spin targets.

    Signs are ignored here; they follow from the bits.
    """
    target: dict[int, dict[str, int]] = {i: {} for i in range(len(names))}
    for bits, entries in rows.items():
        for _, name, idx in entries:
            i = list(names).index(name)
            nb = neighbor_bits(bits, i)
            prev = target[i].setdefault(nb, idx)
            if prev != idx:
                raise InfeasibleTargetError(
                    f"spin {name}: neighbours {nb} assigned both {prev} and {idx}"
                )
    return target


def _coupling_signs(target: Mapping[int, Mapping[str, int]], n: int) -> dict[tuple[int, int], int]:
    """Sign of each coupling forced by the target ordering.

    Setting neighbour ``j`` to 1 lowers the line by ``c_ij``; so if the
    ``b_j = 1`` configuration sits further right (higher index) then
    ``c_ij > 0``. Every such pair in every spin's table must agree, and
    the two spins of a pair must agree with each other.
    """
    signs: dict[tuple[int, int], int] = {}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for pos, j in enumerate(others):
            for nb, idx in target[i].items():
                if nb[pos] != "0":
                    continue
                partner = nb[:pos] + "1" + nb[pos + 1:]
                s = 1 if target[i][partner] > idx else -1
                key = (min(i, j), max(i, j))
                if signs.setdefault(key, s) != s:
                    raise InfeasibleTargetError(
                        f"inconsistent coupling sign for spins {key[0]}-{key[1]}"
                    )
    return signs


def find_couplings(
    target: Mapping[int, Mapping[str, int]],
    n: int,
    min_gap: float = 20.0,
) -> np.ndarray:
    """Find a symmetric coupling table inducing ``target`` peak orderings.

    ``target[i]`` maps each neighbour configuration of spin ``i`` to its
    peak index. Signs are fixed first from pairwise comparisons; the
    magnitudes then come from a linear program that keeps adjacent lines
    at least ``min_gap`` Hz apart while minimising the total coupling.

    Raises ``InfeasibleTargetError`` if no coupling set works.
    """
    from scipy.optimize import linprog

    m = 2 ** (n - 1)
    for i in range(n):
        idx = sorted(target.get(i, {}).values())
        if idx != list(range(1, m + 1)) or len(target[i]) != m:
            raise InfeasibleTargetError(f"spin {i}: target is not a bijection onto 1..{m}")

    signs = _coupling_signs(target, n)
    pairs = list(itertools.combinations(range(n), 2))
    col = {p: k for k, p in enumerate(pairs)}

    def freq_row(i: int, nb: str) -> np.ndarray:
        # frequency (minus offset) as a linear form in the |c| variables
        r = np.zeros(len(pairs))
        others = [j for j in range(n) if j != i]
        for pos, j in enumerate(others):
            p = (min(i, j), max(i, j))
            r[col[p]] += signs[p] * (1 - 2 * int(nb[pos])) / 2
        return r

    a_ub, b_ub = [], []
    for i in range(n):
        order = sorted(target[i], key=target[i].get)
        for hi, lo in zip(order, order[1:]):
            a_ub.append(freq_row(i, lo) - freq_row(i, hi))
            b_ub.append(-min_gap)
    res = linprog(
        np.ones(len(pairs)),
        A_ub=np.array(a_ub),
        b_ub=np.array(b_ub),
        bounds=[(0, None)] * len(pairs),
        method="highs",
    )
    if res.status != 0:
        raise InfeasibleTargetError(f"ordering infeasible: {res.message}")
    c = np.zeros((n, n))
    for p, k in col.items():
        c[p] = c[p[::-1]] = signs[p] * res.x[k]
    return c
