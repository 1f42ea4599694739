import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmrpops.reference import table_rows
from nmrpops.spin_system import (
    BasisState,
    InfeasibleTargetError,
    PeakLabel,
    SpinSystemError,
    build_system,
    enumerate_transitions,
    find_couplings,
    format_pattern,
    neighbor_bits,
    pattern_of,
    peak_table,
    target_from_rows,
    transition_frequency,
)

from conftest import random_system


def two_spin(c=10.0, offsets=(0.0, 1000.0)):
    return build_system({
        "spins": [{"name": "P", "offset_hz": offsets[0]}, {"name": "Q", "offset_hz": offsets[1]}],
        "couplings_hz": [["P", "Q", c]],
    })


def brute_force_order(couplings, offsets, spin):
    """Neighbour configurations of ``spin`` sorted by descending frequency, from scratch."""
    n = len(offsets)
    others = [j for j in range(n) if j != spin]
    rows = []
    for nb in itertools.product((0, 1), repeat=n - 1):
        f = offsets[spin] + sum(couplings[spin][j] * (0.5 - b) for j, b in zip(others, nb))
        rows.append((-f, "".join(map(str, nb))))
    return [nb for _, nb in sorted(rows)]


class TestBuildSystem:
    def test_smallest_valid(self):
        s = two_spin()
        assert s.n == 2
        assert len(enumerate_transitions(s)) == 4

    def test_zero_couplings_degenerate(self):
        with pytest.raises(SpinSystemError, match="degenerate"):
            two_spin(c=0.0)

    def test_duplicate_names(self):
        with pytest.raises(SpinSystemError, match="duplicate"):
            build_system({"spins": [{"name": "A"}, {"name": "A"}], "couplings_hz": [["A", "A", 0]]})

    def test_non_symmetric(self):
        cfg = {
            "spins": [{"name": "A"}, {"name": "B", "offset_hz": 500}],
            "couplings_hz": [["A", "B", 10.0], ["B", "A", 12.0]],
        }
        with pytest.raises(SpinSystemError, match="symmetric"):
            build_system(cfg)

    def test_incomplete(self):
        cfg = {"spins": [{"name": "A"}, {"name": "B"}, {"name": "C"}], "couplings_hz": [["A", "B", 10.0]]}
        with pytest.raises(SpinSystemError, match="incomplete"):
            build_system(cfg)

    def test_single_spin_rejected(self):
        with pytest.raises(SpinSystemError):
            build_system({"spins": [{"name": "A"}], "couplings_hz": []})

    def test_bad_t2star(self):
        with pytest.raises(SpinSystemError, match="t2star"):
            build_system({"spins": [{"name": "A", "t2star_s": 0}, {"name": "B"}], "couplings_hz": [["A", "B", 5]]})

    def test_config_round_trip(self, system):
        again = build_system(system.to_config())
        assert np.array_equal(again.couplings, system.couplings)
        assert again.spins == system.spins


class TestBasisState:
    @given(st.integers(1, 10).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1))))
    def test_round_trip(self, ni):
        n, i = ni
        s = BasisState(i, n)
        assert BasisState.from_bits(s.bits) == s

    def test_msb_is_qubit_one(self):
        s = BasisState.from_bits("00101")
        assert s.index == 5
        assert [s.bit(q) for q in range(5)] == [0, 0, 1, 0, 1]

    @pytest.mark.parametrize("bad", ["", "012", "ab"])
    def test_malformed(self, bad):
        with pytest.raises(ValueError):
            BasisState.from_bits(bad)


class TestTransitionFrequency:
    def test_zero_couplings_give_offset(self):
        s = two_spin(c=10.0)
        zero = type(s)(s.spins, np.zeros((2, 2)))
        for nb in ("0", "1"):
            assert transition_frequency(zero, 0, nb) == 0.0
            assert transition_frequency(zero, 1, nb) == 1000.0

    def test_flip_shift_equals_coupling(self, system):
        for i in range(system.n):
            others = [j for j in range(system.n) if j != i]
            for nb in itertools.product("01", repeat=4):
                nb = "".join(nb)
                for pos, j in enumerate(others):
                    if nb[pos] == "1":
                        continue
                    flipped = nb[:pos] + "1" + nb[pos + 1:]
                    delta = transition_frequency(system, i, flipped) - transition_frequency(system, i, nb)
                    assert delta == pytest.approx(-system.couplings[i, j], abs=1e-12)

    def test_example_a15(self, system):
        f = transition_frequency(system, 0, "0000")
        assert system.transition("A15").frequency == f


class TestEnumeration:
    def test_counts(self, system):
        trs = enumerate_transitions(system)
        assert len(trs) == 80
        per_state = np.zeros(32, int)
        for t in trs:
            per_state[t.lower.index] += 1
            per_state[t.upper.index] += 1
        assert (per_state == 5).all()

    def test_species_counts(self, system):
        trs = enumerate_transitions(system)
        h = [t for t in trs if system.spins[t.flipped_spin].species == "1H"]
        f = [t for t in trs if system.spins[t.flipped_spin].species == "19F"]
        assert (len(h), len(f)) == (32, 48)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_count_formula(self, n, rng):
        s = random_system(n, rng)
        assert len(enumerate_transitions(s)) == n * 2 ** (n - 1)

    def test_levels_differ_in_one_bit(self, system):
        for t in enumerate_transitions(system):
            assert bin(t.lower.index ^ t.upper.index).count("1") == 1
            assert t.lower.bit(t.flipped_spin) == 0


class TestPeakTable:
    def test_spin_a(self, system):
        table = peak_table(system, 0)
        assert table[1] == "1011"
        assert table[16] == "0100"
        assert table[15] == "0000"

    def test_spin_e(self, system):
        assert peak_table(system, 4)[13] == "0010"

    def test_two_spin_order(self):
        s = two_spin(c=10.0)
        assert peak_table(s, 0) == {1: "0", 2: "1"}

    def test_bijection_descending(self, system):
        for i in range(system.n):
            table = peak_table(system, i)
            assert sorted(table) == list(range(1, 17))
            assert len(set(table.values())) == 16
            freqs = [transition_frequency(system, i, table[k]) for k in range(1, 17)]
            assert all(a > b for a, b in zip(freqs, freqs[1:]))


class TestPattern:
    @pytest.mark.parametrize("bits,expected", [
        ("00101", ["+A8", "+B8", "-C13", "+D11", "-E13"]),
        ("00000", ["+A15", "+B15", "+C15", "+D16", "+E15"]),
        ("11111", ["-A2", "-B2", "-C2", "-D1", "-E2"]),
    ])
    def test_table_rows(self, system, bits, expected):
        assert format_pattern(pattern_of(system, system.state(bits))) == expected

    def test_full_table(self, system):
        for bits, entries in table_rows().items():
            got = format_pattern(pattern_of(system, system.state(bits)))
            assert got == [f"{'+' if s > 0 else '-'}{n}{k}" for s, n, k in entries]

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_sign_rule_exhaustive(self, n, rng):
        s = random_system(n, rng)
        for idx in range(2**n):
            st_ = BasisState(idx, n)
            signs = [sign for sign, _ in pattern_of(s, st_)]
            assert signs == [(-1) ** st_.bit(i) for i in range(n)]

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_shared_peak_rule(self, n, rng):
        s = random_system(n, rng)
        pats = {idx: pattern_of(s, BasisState(idx, n)) for idx in range(2**n)}
        for a, b in itertools.combinations(range(2**n), 2):
            diff = a ^ b
            for i in range(n):
                sa, la = pats[a][i]
                sb, lb = pats[b][i]
                agree_elsewhere = (diff & ~(1 << (n - 1 - i))) == 0
                assert (la == lb) == agree_elsewhere
                if la == lb:
                    assert (sa == sb) == ((a >> (n - 1 - i)) & 1 == (b >> (n - 1 - i)) & 1)


class TestFindCouplings:
    def test_table_feasible(self, system):
        target = target_from_rows(table_rows(), system.names)
        c = find_couplings(target, 5)
        assert np.allclose(c, c.T)
        offsets = [s.offset for s in system.spins]
        for i in range(5):
            order = brute_force_order(c, offsets, i)
            assert order == sorted(target[i], key=target[i].get)

    def test_shipped_couplings_reproduce_table(self, system):
        target = target_from_rows(table_rows(), system.names)
        offsets = [s.offset for s in system.spins]
        for i in range(5):
            assert brute_force_order(system.couplings, offsets, i) == sorted(target[i], key=target[i].get)

    def test_spin_a_rank_structure(self):
        c = find_couplings(target_from_rows(table_rows(), "ABCDE"), 5)
        ab, ac, ad, ae = c[0, 1], c[0, 2], c[0, 3], c[0, 4]
        assert abs(ae) > abs(ad) > abs(ab) > abs(ac)
        assert np.sign(ac) != np.sign(ab)

    def test_duplicate_index_infeasible(self):
        with pytest.raises(InfeasibleTargetError):
            find_couplings({0: {"0": 1, "1": 1}, 1: {"0": 1, "1": 2}}, 2)

    def test_two_spin(self):
        c = find_couplings({0: {"0": 1, "1": 2}, 1: {"0": 1, "1": 2}}, 2)
        assert c[0, 1] > 0

    def test_asymmetric_signs_infeasible(self):
        # spin 0 wants c01 > 0, spin 1 wants c01 < 0
        with pytest.raises(InfeasibleTargetError, match="sign"):
            find_couplings({0: {"0": 1, "1": 2}, 1: {"0": 2, "1": 1}}, 2)

    def test_non_linear_order_infeasible(self):
        # 3 spins: spin 0 order 00,11,01,10 cannot come from a linear rule
        target = {
            0: {"00": 1, "11": 2, "01": 3, "10": 4},
            1: {"00": 1, "01": 2, "10": 3, "11": 4},
            2: {"00": 1, "01": 2, "10": 3, "11": 4},
        }
        with pytest.raises(InfeasibleTargetError):
            find_couplings(target, 3)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 4), st.integers(0, 2**32 - 1))
    def test_recovers_random_orderings(self, n, seed):
        s = random_system(n, np.random.default_rng(seed))
        target = {i: {nb: k for k, nb in peak_table(s, i).items()} for i in range(n)}
        c = find_couplings(target, n)
        offsets = [sp.offset for sp in s.spins]
        for i in range(n):
            assert brute_force_order(c, offsets, i) == sorted(target[i], key=target[i].get)


def test_peak_label_parse():
    assert PeakLabel.parse("E13") == PeakLabel("E", 13)
    with pytest.raises(ValueError):
        PeakLabel.parse("13")


def test_neighbor_bits():
    assert neighbor_bits("00101", 2) == "0001"
