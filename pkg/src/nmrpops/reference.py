"""Reference pattern table for the 5-qubit example system.

One row per basis state |b1..b5>, listing the signed peak of every spin.
Peak ``A1`` is the leftmost (highest-frequency) line of spin A.

This data is only used to validate the coupling model and to seed the
coupling search; runtime patterns are always computed from the model.
"""

from __future__ import annotations

import re

TABLE_I = """\
00000 +A15 +B15 +C15 +D16 +E15
00001 +A7 +B16 +C13 +D15 -E15
00010 +A11 +B11 +C11 -D16 +E11
00011 +A3 +B12 +C9 -D15 -E11
00100 +A16 +B7 -C15 +D13 +E13
00101 +A8 +B8 -C13 +D11 -E13
00110 +A12 +B3 -C11 -D13 +E9
00111 +A4 +B4 -C9 -D11 -E9
01000 +A13 -B15 +C7 +D8 +E16
01001 +A5 -B16 +C5 +D7 -E16
01010 +A9 -B11 +C3 -D8 +E12
01011 +A1 -B12 +C1 -D7 -E12
01100 +A14 -B7 -C7 +D5 +E14
01101 +A6 -B8 -C5 +D3 -E14
01110 +A10 -B3 -C3 -D5 +E10
01111 +A2 -B4 -C1 -D3 -E10
10000 -A15 +B13 +C16 +D14 +E7
10001 -A7 +B14 +C14 +D12 -E7
10010 -A11 +B9 +C12 -D14 +E3
10011 -A3 +B10 +C10 -D12 -E3
10100 -A16 +B5 -C16 +D10 +E5
10101 -A8 +B6 -C14 +D9 -E5
10110 -A12 +B1 -C12 -D10 +E1
10111 -A4 +B2 -C10 -D9 -E1
11000 -A13 -B13 +C8 +D6 +E8
11001 -A5 -B14 +C6 +D4 -E8
11010 -A9 -B9 +C4 -D6 +E4
11011 -A1 -B10 +C2 -D4 -E4
11100 -A14 -B5 -C8 +D2 +E6
11101 -A6 -B6 -C6 +D1 -E6
11110 -A10 -B1 -C4 -D2 +E2
11111 -A2 -B2 -C2 -D1 -E2
"""

ROMAN = [
    "i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x",
    "xi", "xii", "xiii", "xiv", "xv", "xvi", "xvii", "xviii", "xix", "xx",
    "xxi", "xxii", "xxiii", "xxiv", "xxv", "xxvi", "xxvii", "xxviii",
    "xxix", "xxx", "xxxi", "xxxii",
]

_ENTRY = re.compile(r"^([+-])([A-Za-z]+)(\d+)$")


def parse_signed_label(text: str) -> tuple[int, str, int]:
    """Split ``'-C13'`` into ``(-1, 'C', 13)``."""
    m = _ENTRY.match(text.strip().replace("−", "-"))
    if m is None:
        raise ValueError(f"malformed signed peak label: {text!r}")
    sign = 1 if m.group(1) == "+" else -1
    return sign, m.group(2), int(m.group(3))


def table_rows(text: str = TABLE_I) -> dict[str, list[tuple[int, str, int]]]:
    """Parse the reference table into ``{bits: [(sign, spin, index), ...]}``."""
    rows = {}
    for line in text.strip().splitlines():
        bits, *entries = line.split()
        rows[bits] = [parse_signed_label(e) for e in entries]
    return rows


def roman(state_index: int) -> str:
    """Roman numeral used to name a basis state of the 5-qubit example."""
    return ROMAN[state_index]


def state_from_roman(numeral: str) -> str:
    """Bit string of the 5-qubit state named by ``numeral`` ('vi' -> '00101')."""
    idx = ROMAN.index(numeral.strip("() ").lower())
    return format(idx, "05b")
