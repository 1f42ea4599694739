"""Scenario runner and the built-in figure pipelines.

A scenario is a JSON document::

    {"system": "fivequbit.json",            # optional, defaults to the shipped system
     "steps": [
        {"op": "pops", "name": "b", "transition": "B8", "species": "19F"},
        {"op": "pops", "name": "c", "transition": "A8", "species": "19F"},
        {"op": "multiply", "name": "e", "a": "b", "b": "c", "abs_a": true},
        {"op": "classify", "name": "e_read", "input": ["e"], "expect": "00101"},
        {"op": "snr", "input": "e"}],
     "outputs": ["e"]}                         # optional, default: every sampled spectrum

Step ops: ``pops`` (two-experiment POPS spectrum), ``make_pops``,
``gate`` (state -> state), ``detect`` (state -> sticks), ``render``
(sticks -> sampled), ``multiply``, ``classify`` and ``snr``. A step may
only refer to names produced by earlier steps.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import spectral_algebra as sa
from .spectrometer import (
    DEFAULT_NOISE_SIGMA,
    SampledSpectrum,
    StickSpectrum,
    UndefinedSNRError,
    detect,
    pops_spectrum_by_subtraction,
    render,
    snr,
    write_csv,
)
from .spin_system import SpinSystem, Transition, example_system, load_system
from .state_engine import (
    GateSpec,
    PopulationState,
    PulseSequence,
    apply_sequence,
    compile_gate,
    make_pops,
)


class ScenarioError(ValueError):
    pass


def _levels_transition(sys: SpinSystem, a: str, b: str) -> Transition:
    sa_, sb = sys.state(a), sys.state(b)
    diff = sa_.index ^ sb.index
    if diff == 0 or diff & (diff - 1):
        raise ScenarioError(f"{a} and {b} are not connected by a single spin flip")
    spin = sys.n - diff.bit_length()
    return sys.transition_between(sa_, spin)


def _transition(sys: SpinSystem, step: Mapping) -> Transition:
    if "transition" in step:
        return sys.transition(step["transition"])
    if "levels" in step:
        return _levels_transition(sys, *step["levels"])
    raise ScenarioError(f"step {step.get('name')!r} needs 'transition' or 'levels'")


def _gate_sequence(sys: SpinSystem, gate: Any) -> PulseSequence | None:
    if not gate:
        return None
    specs = gate if isinstance(gate, list) else [gate]
    seq = PulseSequence()
    for g in specs:
        seq = seq + compile_gate(sys, GateSpec.from_dict(g))
    return seq


def _seed_for(seed: int | None, k: int) -> int | None:
    if seed is None:
        return None
    return int(np.random.SeedSequence([seed, k]).generate_state(1, dtype=np.uint64)[0])


def run_scenario(
    scenario: Mapping,
    sys: SpinSystem | None = None,
    seed: int | None = 0,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    out_dir: str | Path | None = None,
    base_dir: str | Path | None = None,
) -> dict:
    """Execute a scenario; returns the JSON-ready report.

    With ``out_dir`` the sampled spectra are written as CSV and the
    report as ``report.json``.
    """
    if sys is None:
        if scenario.get("system"):
            path = Path(scenario["system"])
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            sys = load_system(path)
        else:
            sys = example_system()

    values: dict[str, Any] = {}
    report: dict[str, Any] = {
        "scenario": scenario.get("name", "custom"),
        "seed": seed,
        "noise_sigma": noise_sigma,
        "spectra": {},
        "classifications": {},
        "snr": {},
    }

    def get(name, types):
        if name not in values:
            raise ScenarioError(f"unknown or not-yet-produced value {name!r}")
        v = values[name]
        if not isinstance(v, types):
            raise ScenarioError(f"{name!r} has the wrong type for this step")
        return v

    for k, step in enumerate(scenario.get("steps", [])):
        op = step.get("op")
        name = step.get("name", f"step{k}")
        if op == "pops":
            t = _transition(sys, step)
            seq = _gate_sequence(sys, step.get("gate"))
            spec = pops_spectrum_by_subtraction(
                sys, t, seq, step.get("species", "19F"),
                noise_sigma=noise_sigma, seed=_seed_for(seed, k),
                relax=step.get("relax", True),
            )
            if step.get("negate"):
                spec = SampledSpectrum(spec.species, spec.grid, -spec.values, spec.noise_sigma, spec.seed, spec.noise_window)
            values[name] = spec
            report["spectra"][name] = {
                "species": spec.species,
                "prep": str(t.label),
                "gate_pulses": [] if seq is None else seq.labels,
                "gate_duration_ms": 0.0 if seq is None else round(seq.total_duration * 1e3, 6),
                "label": step.get("label", ""),
            }
        elif op == "make_pops":
            values[name] = make_pops(sys, _transition(sys, step))
        elif op == "gate":
            state = get(step["input"], PopulationState)
            values[name] = apply_sequence(state, _gate_sequence(sys, step["gate"]) or PulseSequence(),
                                          relax=step.get("relax", False), sys=sys)
        elif op == "detect":
            values[name] = detect(get(step["input"], PopulationState), sys, step.get("species", "19F"))
        elif op == "render":
            sticks = get(step["input"], StickSpectrum)
            spec = render(sticks, sys, noise_sigma=noise_sigma, seed=_seed_for(seed, k))
            values[name] = spec
            report["spectra"][name] = {"species": spec.species, "label": step.get("label", "")}
        elif op == "multiply":
            a = get(step["a"], (SampledSpectrum, StickSpectrum))
            b = get(step["b"], (SampledSpectrum, StickSpectrum))
            abs_a, abs_b = bool(step.get("abs_a", False)), bool(step.get("abs_b", False))
            if isinstance(a, SampledSpectrum):
                values[name] = sa.multiply(a, b, abs_a, abs_b)
                report["spectra"][name] = {
                    "species": a.species,
                    "product": [("|%s|" if abs_a else "%s") % step["a"], ("|%s|" if abs_b else "%s") % step["b"]],
                    "label": step.get("label", ""),
                }
            else:
                values[name] = sa.multiply_sticks(a, b, abs_a, abs_b)
        elif op == "classify":
            inputs = step["input"] if isinstance(step["input"], list) else [step["input"]]
            spectra = [get(i, (SampledSpectrum, StickSpectrum)) for i in inputs]
            c = sa.classify(spectra, sys, threshold=step.get("threshold", sa.DEFAULT_THRESHOLD))
            values[name] = c
            entry = c.to_json()
            entry["input"] = inputs
            if "expect" in step:
                entry["expect"] = step["expect"]
                entry["match"] = (
                    c.verdict == "single_state" and c.states == [step["expect"]] and c.members[0][1] > 0
                )
            report["classifications"][name] = entry
        elif op == "snr":
            spec = get(step["input"], SampledSpectrum)
            try:
                report["snr"][step["input"]] = snr(spec)
            except UndefinedSNRError:
                report["snr"][step["input"]] = None
        else:
            raise ScenarioError(f"unknown step op {op!r}")

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        wanted = scenario.get("outputs") or [n for n in report["spectra"]]
        for n in wanted:
            spec = get(n, SampledSpectrum)
            fname = f"{n}.csv"
            write_csv(spec, out / fname)
            report["spectra"].setdefault(n, {})["csv"] = fname
        with open(out / "report.json", "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return report


CNOT_0010_5 = {"gate": "cnot", "controls": {"1": 0, "2": 0, "3": 1, "4": 0}, "target": 5}
CSWAP_001_45 = {"gate": "cswap", "controls": {"1": 0, "2": 0, "3": 1}, "targets": [4, 5]}


def _figure_steps(fig: str, gate: dict | None, species: list[str], aux_levels=None) -> list[dict]:
    """POPS on B8 and A8 (optionally gated), their product, and readouts."""
    steps = []
    expect = {"fig1": "00101", "fig2": "00100", "fig3": "00110"}[fig]
    tags = {"fig1": ("b", "c"), "fig2": ("a", "b"), "fig3": ("a", "b")}[fig]
    for sp in species:
        sfx = "" if len(species) == 1 else f"_{sp}"
        first, second = f"{fig}{tags[0]}{sfx}", f"{fig}{tags[1]}{sfx}"
        steps += [
            {"op": "pops", "name": first, "transition": "B8", "gate": gate, "species": sp},
            {"op": "pops", "name": second, "transition": "A8", "gate": gate, "species": sp},
        ]
        if fig == "fig1":
            steps += [
                {"op": "multiply", "name": f"fig1d{sfx}", "a": first, "b": second},
                {"op": "multiply", "name": f"fig1e{sfx}", "a": first, "b": second, "abs_a": True},
            ]
        else:
            steps.append({"op": "multiply", "name": f"{fig}c{sfx}", "a": first, "b": second, "abs_a": True})
    prod = "fig1e" if fig == "fig1" else f"{fig}c"
    sfxs = [""] if len(species) == 1 else [f"_{sp}" for sp in species]
    steps.append({"op": "classify", "name": f"{prod}_readout", "input": [prod + s for s in sfxs], "expect": expect})
    steps.append({"op": "classify", "name": f"{fig}{tags[0]}_readout", "input": [f"{fig}{tags[0]}{s}" for s in sfxs]})
    steps.append({"op": "classify", "name": f"{fig}{tags[1]}_readout", "input": [f"{fig}{tags[1]}{s}" for s in sfxs]})
    if aux_levels is not None:
        # the same single state reached without any gate
        (p, j), (_, k) = aux_levels
        steps += [
            {"op": "pops", "name": f"{fig}d_1", "levels": [p, j], "species": "19F"},
            {"op": "pops", "name": f"{fig}d_2", "levels": [p, k], "species": "19F"},
            {"op": "multiply", "name": f"{fig}d", "a": f"{fig}d_1", "b": f"{fig}d_2", "abs_a": True},
            {"op": "classify", "name": f"{fig}d_readout", "input": [f"{fig}d"], "expect": expect},
        ]
    return steps


def builtin(name: str) -> dict:
    """The built-in scenarios: ``fig1``, ``fig2``, ``fig3`` and ``table2``."""
    if name == "fig1":
        steps = _figure_steps("fig1", None, ["1H", "19F"])
    elif name == "fig2":
        steps = _figure_steps("fig2", CNOT_0010_5, ["19F"], (("00100", "01100"), ("00100", "10100")))
    elif name == "fig3":
        steps = _figure_steps("fig3", CSWAP_001_45, ["19F"], (("00110", "01110"), ("00110", "10110")))
    elif name == "table2":
        steps = (
            _figure_steps("fig1", None, ["19F"])
            + _figure_steps("fig2", CNOT_0010_5, ["19F"], (("00100", "01100"), ("00100", "10100")))
            + _figure_steps("fig3", CSWAP_001_45, ["19F"], (("00110", "01110"), ("00110", "10110")))
        )
        # row order of the S/N table
        for n in ["fig1b", "fig1c", "fig2a", "fig2b", "fig3a", "fig3b",
                  "fig1d", "fig1e", "fig2d", "fig3d", "fig2c", "fig3c"]:
            steps.append({"op": "snr", "input": n})
        return {"name": name, "steps": steps}
    else:
        raise ScenarioError(f"unknown scenario {name!r} (expected fig1, fig2, fig3, table2 or a file)")
    spectra = [s["name"] for s in steps if s["op"] in ("pops", "multiply")]
    steps += [{"op": "snr", "input": n} for n in spectra]
    return {"name": name, "steps": steps}


BUILTINS = ("fig1", "fig2", "fig3", "table2")


def load_scenario(name_or_file: str) -> tuple[dict, Path | None]:
    if name_or_file in BUILTINS:
        return builtin(name_or_file), None
    path = Path(name_or_file)
    if not path.exists():
        raise ScenarioError(f"unknown scenario {name_or_file!r}")
    with open(path) as fh:
        return json.load(fh), path.parent
