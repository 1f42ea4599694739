import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmrpops.reference import state_from_roman
from nmrpops.spin_system import BasisState, enumerate_transitions
from nmrpops.state_engine import (
    GateSpec,
    PopulationState,
    PulseSequence,
    Pulse,
    all_gate_specs,
    apply_sequence,
    compile_cnot,
    compile_cswap,
    compile_gate,
    count_pops,
    gate_truth_permutation,
    make_pops,
    permute,
    pi_pulse,
    pops_state,
    pseudopure,
    thermal_state,
)

from conftest import random_system


def roman_pops(sys, pos, neg):
    return pops_state(sys, sys.state(state_from_roman(pos)), sys.state(state_from_roman(neg)))


class TestStates:
    def test_thermal_two_spin(self):
        from test_spin_system import two_spin

        th = thermal_state(two_spin())
        assert th.populations.tolist() == [1.0, 0.0, 0.0, -1.0]
        assert th.kind == "thermal"

    def test_thermal_five(self, system):
        th = thermal_state(system)
        assert th.populations[0] == 2.5
        assert th.populations[31] == -2.5
        assert th.populations.sum() == 0

    def test_pseudopure_entries(self, system):
        p = pseudopure(system, system.state("00101"), 1.0)
        assert p.populations[5] == 1 - 1 / 32
        assert np.all(np.delete(p.populations, 5) == -1 / 32)
        assert p.populations.sum() == pytest.approx(0, abs=1e-15)

    def test_pseudopure_rejects_zero_epsilon(self, system):
        with pytest.raises(ValueError):
            pseudopure(system, system.state("00101"), 0.0)

    def test_populations_read_only(self, system):
        th = thermal_state(system)
        with pytest.raises(ValueError):
            th.populations[0] = 1.0


class TestPiPulse:
    def test_involution(self, system):
        th = thermal_state(system)
        for t in enumerate_transitions(system):
            assert np.array_equal(pi_pulse(pi_pulse(th, t), t).populations, th.populations)

    def test_only_two_levels_change(self, system):
        th = thermal_state(system)
        t = system.transition("C7")
        changed = np.flatnonzero(pi_pulse(th, t).populations != th.populations)
        assert sorted(changed) == sorted([t.lower.index, t.upper.index])

    def test_b8_subtraction_gives_vi_minus_xiv(self, system):
        th = thermal_state(system)
        t = system.transition("B8")
        diff = (th - pi_pulse(th, t)).nonzero()
        assert diff == {"00101": 1.0, "01101": -1.0}

    def test_foreign_transition(self, system, rng):
        other = random_system(3, rng)
        with pytest.raises(ValueError):
            pi_pulse(thermal_state(system), enumerate_transitions(other)[0])


class TestMakePops:
    def test_b8(self, system):
        p = make_pops(system, system.transition("B8"))
        assert p.kind == "pops"
        assert p.nonzero() == {"00101": 1.0, "01101": -1.0}

    def test_a8(self, system):
        assert make_pops(system, system.transition("A8")).nonzero() == {"00101": 1.0, "10101": -1.0}

    def test_every_transition(self, system):
        for t in enumerate_transitions(system):
            p = make_pops(system, t)
            assert p.populations.sum() == 0
            assert p.is_pops()
            assert p.populations[t.lower.index] > 0 > p.populations[t.upper.index]

    def test_species_weight(self, system):
        cfg = system.to_config()
        cfg["species_weights"] = {"19F": 0.94}
        from nmrpops.spin_system import build_system

        s = build_system(cfg)
        p = make_pops(s, s.transition("E13"))
        assert p.populations.max() == pytest.approx(0.94)

    def test_pops_counts(self, system):
        assert count_pops(5) == 496
        realizable = {frozenset(make_pops(system, t).nonzero()) for t in enumerate_transitions(system)}
        assert len(realizable) == 80


class TestGateSpec:
    def test_cnot_helper(self):
        g = GateSpec.cnot("0010", 5)
        assert g.controls == {0: 0, 1: 0, 2: 1, 3: 0}
        assert g.targets == (4,)

    def test_from_dict(self):
        g = GateSpec.from_dict({"gate": "cnot", "controls": {"1": 0, "2": 0, "3": 1, "4": 0}, "target": 5})
        assert g == GateSpec.cnot("0010", 5)
        assert GateSpec.from_dict(g.to_dict()) == g

    @pytest.mark.parametrize("spec", [
        GateSpec("cnot", {0: 0, 1: 0, 2: 1}, (4,)),            # missing control
        GateSpec("cnot", {0: 0, 1: 0, 2: 1, 3: 0}, (3,)),      # target is a control
        GateSpec("cswap", {0: 0, 1: 0, 2: 1}, (4,)),            # one target
        GateSpec("toffoli", {0: 0}, (1,)),
        GateSpec("cnot", {0: 2, 1: 0, 2: 1, 3: 0}, (4,)),
    ])
    def test_malformed(self, system, spec):
        with pytest.raises(ValueError):
            compile_gate(system, spec)


class TestCompile:
    def test_c4_not(self, system):
        assert compile_cnot(system, GateSpec.cnot("0010", 5)).labels == ["E13"]

    def test_c3_swap(self, system):
        seq = compile_cswap(system, GateSpec.cswap("001", 4, 5))
        assert seq.labels == ["D11", "E9", "D11"]
        assert seq.total_duration == pytest.approx(0.3)
        assert all(p.angle == math.pi for p in seq.pulses)

    def test_two_qubit_cnot(self):
        from test_spin_system import two_spin

        s = two_spin()
        seq = compile_cnot(s, GateSpec.cnot("1", 2))
        (p,) = seq.pulses
        assert p.transition.flipped_spin == 1
        assert p.transition.lower.bits == "10"

    def test_cswap_fixes_equal_bits(self, system):
        seq = compile_cswap(system, GateSpec.cswap("001", 4, 5))
        for bits in ("00100", "00111"):
            s = pseudopure(system, system.state(bits))
            assert np.array_equal(apply_sequence(s, seq).populations, s.populations)

    def test_wrong_variant(self, system):
        with pytest.raises(ValueError):
            compile_cnot(system, GateSpec.cswap("001", 4, 5))


class TestTruthPermutation:
    def test_c4_not(self):
        perm = gate_truth_permutation(GateSpec.cnot("0010", 5), 5)
        assert perm[0b00100] == 0b00101 and perm[0b00101] == 0b00100
        moved = np.flatnonzero(perm != np.arange(32))
        assert sorted(moved) == [4, 5]

    def test_c3_swap(self):
        perm = gate_truth_permutation(GateSpec.cswap("001", 4, 5), 5)
        moved = np.flatnonzero(perm != np.arange(32))
        assert sorted(moved) == [0b00101, 0b00110]

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_squared_identity(self, n):
        for g in all_gate_specs(n):
            perm = gate_truth_permutation(g, n)
            assert np.array_equal(perm[perm], np.arange(2**n))


class TestApplySequence:
    def test_empty_identity(self, system):
        th = thermal_state(system)
        assert apply_sequence(th, PulseSequence()) is th

    def test_cnot_on_vi_xiv(self, system):
        seq = compile_gate(system, GateSpec.cnot("0010", 5))
        out = apply_sequence(roman_pops(system, "vi", "xiv"), seq)
        assert out.nonzero() == {state_from_roman("v"): 1.0, state_from_roman("xiv"): -1.0}
        assert out.kind == "pops"

    def test_cswap_on_vi_xxii(self, system):
        seq = compile_gate(system, GateSpec.cswap("001", 4, 5))
        out = apply_sequence(roman_pops(system, "vi", "xxii"), seq)
        assert out.nonzero() == {state_from_roman("vii"): 1.0, state_from_roman("xxii"): -1.0}

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_matches_truth_permutation(self, n, rng):
        s = random_system(n, rng)
        basis = np.eye(2**n)
        for g in all_gate_specs(n):
            seq = compile_gate(s, g)
            perm = gate_truth_permutation(g, n)
            for idx in range(2**n):
                out = apply_sequence(PopulationState(basis[idx] - 2.0**-n), seq)
                assert np.argmax(out.populations) == perm[idx]

    def test_relaxation_decay(self, system):
        p = make_pops(system, system.transition("B8"))
        seq = compile_gate(system, GateSpec.cswap("001", 4, 5))
        out = apply_sequence(p, seq, relax=True, sys=system)
        assert out.kind == "pops"
        assert max(out.populations) == pytest.approx(math.exp(-0.3 / 0.65))

    def test_relaxation_needs_t1(self, system):
        seq = compile_gate(system, GateSpec.cnot("0010", 5))
        with pytest.raises(ValueError):
            apply_sequence(thermal_state(system), seq, relax=True)

    def test_non_pi_rejected(self, system):
        seq = PulseSequence((Pulse(system.transition("A1"), math.pi / 2),))
        with pytest.raises(ValueError):
            apply_sequence(thermal_state(system), seq)

    def test_negative_duration_rejected(self, system):
        with pytest.raises(ValueError):
            PulseSequence((Pulse(system.transition("A1"), math.pi, -1.0),))


gate_strategy = st.sampled_from(list(all_gate_specs(5)))


@settings(max_examples=60, deadline=None)
@given(gate_strategy, st.lists(gate_strategy, max_size=3), st.integers(0, 79))
def test_pops_in_pops_out(system, g, more, t_index):
    t = enumerate_transitions(system)[t_index]
    state = make_pops(system, t)
    seq = PulseSequence()
    for spec in [g, *more]:
        seq = seq + compile_gate(system, spec)
    out = apply_sequence(state, seq)
    assert out.is_pops()
    assert out.populations.sum() == 0
    # exact population action of the composed permutation
    ref = state
    for spec in [g, *more]:
        ref = permute(ref, gate_truth_permutation(spec, 5))
    assert np.array_equal(out.populations, ref.populations)


@settings(max_examples=40, deadline=None)
@given(st.lists(gate_strategy, min_size=1, max_size=4), st.integers(0, 79))
def test_relaxed_pops_shrinks_monotonically(system, gates, t_index):
    state = make_pops(system, enumerate_transitions(system)[t_index])
    prev_mag = 1.0
    prev = state
    for g in gates:
        seq = compile_gate(system, g)
        nxt = apply_sequence(prev, seq, relax=True, sys=system)
        plain = apply_sequence(prev, seq)
        mag = float(np.abs(nxt.populations).max())
        assert mag < prev_mag
        assert np.array_equal(np.sign(nxt.populations), np.sign(plain.populations))
        prev_mag, prev = mag, nxt


def test_compiled_gates_are_involutions(system):
    for g in all_gate_specs(5):
        seq = compile_gate(system, g)
        th = thermal_state(system)
        twice = apply_sequence(apply_sequence(th, seq), seq)
        assert np.array_equal(twice.populations, th.populations)


def test_basis_state_flip():
    assert BasisState.from_bits("00101").flip(1).bits == "01101"
