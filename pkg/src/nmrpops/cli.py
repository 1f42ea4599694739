"""Command-line front end.

    nmrpops validate
    nmrpops pattern --state 00101
    nmrpops gate cnot --controls 0010 --target 5
    nmrpops gate cswap --controls 001 --targets 4 5
    nmrpops pops --transition B8
    nmrpops scenario fig1 --no-noise --out-dir out/
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

from .reference import table_rows
from .spectrometer import DEFAULT_NOISE_SIGMA
from .spin_system import (
    BasisState,
    SpinSystemError,
    example_system_path,
    format_pattern,
    load_system,
    pattern_of,
)
from .scenarios import ScenarioError, load_scenario, run_scenario
from .state_engine import GateSpec, compile_gate, make_pops


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def validate_against_table(system) -> tuple[int, int, list[str]]:
    """Compare the model's 32 patterns with the reference table.

    Returns ``(matched, total, mismatch lines)``.
    """
    rows = table_rows()
    matched, total, diffs = 0, 0, []
    for bits, entries in rows.items():
        got = format_pattern(pattern_of(system, BasisState.from_bits(bits)))
        want = [f"{'+' if s > 0 else '-'}{name}{idx}" for s, name, idx in entries]
        for g, w in zip(got, want):
            total += 1
            if g == w:
                matched += 1
            else:
                diffs.append(f"{bits}: expected {w}, got {g}")
    return matched, total, diffs


def cmd_validate(args) -> int:
    system = load_system(args.system)
    if system.n != 5 or system.names != list("ABCDE"):
        print("INFO: no reference table for this system (need 5 spins named A-E)")
        return 0
    matched, total, diffs = validate_against_table(system)
    for d in diffs:
        print(d)
    print(f"{'PASS' if not diffs else 'FAIL'} {matched}/{total}")
    return 0 if not diffs else 1


def cmd_pattern(args) -> int:
    system = load_system(args.system)
    state = system.state(args.state)
    _emit({"state": state.bits, "pattern": format_pattern(pattern_of(system, state))})
    return 0


def cmd_gate(args) -> int:
    system = load_system(args.system)
    if args.spec:
        g = GateSpec.from_dict(json.loads(args.spec))
    elif args.variant == "cnot":
        if args.target is None:
            raise ValueError("cnot needs --target")
        g = GateSpec.cnot(args.controls, args.target)
    elif args.variant == "cswap":
        if not args.targets:
            raise ValueError("cswap needs --targets U V")
        g = GateSpec.cswap(args.controls, *args.targets)
    else:
        raise ValueError("give a gate variant (cnot/cswap) or --spec")
    seq = compile_gate(system, g)
    _emit(seq.labels)
    return 0


def cmd_pops(args) -> int:
    system = load_system(args.system)
    t = system.transition(args.transition)
    state = make_pops(system, t)
    _emit({"transition": str(t.label), "frequency_hz": t.frequency, "populations": state.nonzero()})
    return 0


def cmd_scenario(args) -> int:
    scenario, base = load_scenario(args.name)
    system = None
    if args.system_given or not scenario.get("system"):
        system = load_system(args.system)
    sigma = 0.0 if args.no_noise else args.noise_sigma
    report = run_scenario(scenario, system, seed=args.seed, noise_sigma=sigma,
                          out_dir=args.out_dir, base_dir=base)
    _emit(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", default=argparse.SUPPRESS, help="spin-system JSON (default: shipped 5-qubit system)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--noise-sigma", type=float, default=argparse.SUPPRESS)
    common.add_argument("--no-noise", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="nmrpops", description="POPS-based NMR QIP simulator", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="compare generated patterns with the reference table")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("pattern", parents=[common], help="signed peak pattern of a pseudopure state")
    s.add_argument("--state", required=True)
    s.set_defaults(func=cmd_pattern)

    s = sub.add_parser("gate", parents=[common], help="compile a controlled gate to selective pi pulses")
    s.add_argument("variant", nargs="?", choices=["cnot", "cswap"])
    s.add_argument("--controls", default="", help="control bits over the non-target qubits, in qubit order")
    s.add_argument("--target", type=int, help="1-based target qubit (cnot)")
    s.add_argument("--targets", type=int, nargs=2, help="1-based swapped qubits (cswap)")
    s.add_argument("--spec", help='JSON gate spec, e.g. {"gate":"cnot","controls":{"1":0},"target":2}')
    s.set_defaults(func=cmd_gate)

    s = sub.add_parser("pops", parents=[common], help="POPS made by a selective pi pulse on one transition")
    s.add_argument("--transition", required=True, help="peak label, e.g. B8")
    s.set_defaults(func=cmd_pops)

    s = sub.add_parser("scenario", parents=[common], help="run fig1, fig2, fig3, table2 or a scenario file")
    s.add_argument("name")
    s.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.system_given = hasattr(args, "system")
    defaults = {
        "system": str(example_system_path()),
        "seed": 0,
        "noise_sigma": DEFAULT_NOISE_SIGMA,
        "no_noise": False,
        "out_dir": None,
    }
    for k, v in defaults.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    try:
        return args.func(args)
    except (SpinSystemError, ScenarioError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
