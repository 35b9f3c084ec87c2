"""Experiment runners behind the CLI.

Each runner takes a fully resolved parameter dict and returns (columns, rows).
The spec is embedded in the CSV header, so ``run(spec)`` regenerates a file
byte for byte.
"""

from __future__ import annotations

import configparser
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__, analysis, codec, planner
from .ledger import simulate_inclusion
from .planner import PlanInputs
from .protocol import StrategyConfig, effective_censors

SWEEP_AXES = ("S", "m", "s", "ce_ratio", "delta", "n")

PLAN_DEFAULTS: dict[str, Any] = {
    "variant": "rateless",
    "n": 256,
    "c_e": 32,
    "delta": 1e-9,
    "delta_code": None,
    "S": 4096,
    "M_h": 200,
    "M_s": 8,
    "epsilon": 0.05,
    "ell_sym_grid": list(planner.DEFAULT_ELL_SYM_GRID),
    "s_max": planner.DEFAULT_S_MAX,
}

SIM_DEFAULTS: dict[str, Any] = {
    "n": 16,
    "c_e": 0,
    "variant": "rateless",
    "m": 4,
    "s": 5,
    "k": None,
    "ell_sym": 256,
    "epsilon": 0.05,
    "payload_size": 4064,
    "payload_hex": None,
    "collects_symbols": True,
    "seed": 0,
    "max_slots": 10_000,
    "trials": 100,
}

SWEEP_VALUES: dict[str, list] = {
    "S": [2 ** e for e in range(8, 23)],
    "m": list(range(1, 65)),
    "s": [1, 2, 4, 8, 17],
    "ce_ratio": [0.05, 0.10, 0.20, 0.30, 0.40],
    "delta": [10.0 ** -e for e in range(2, 13)],
    "n": [16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192],
}

SWEEP_DEFAULTS: dict[str, Any] = {
    **{k: v for k, v in PLAN_DEFAULTS.items() if k != "variant"},
    "axis": "S",
    "values": None,
    "ce_ratio": None,
    "variants": ["naive", "mds", "rateless"],
    "m": None,
    "k": None,
    "s": None,
    "ell_sym": None,
    "trials": 0,
    "seed": 0,
}

BENCH_DEFAULTS: dict[str, Any] = {
    "blocks": [1, 2, 4, 8, 16, 20, 32, 64],
    "excess": [0, 1, 2],
    "trials": 10_000,
    "seed": 0,
    "symbol_len": 256,
}


class SpecError(ValueError):
    """Invalid experiment parameters (maps to exit code 2)."""


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def to_csv(command: str, spec: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# sedna {__version__}\n")
    buf.write(f"# command = {command}\n")
    buf.write(f"# seed = {spec.get('seed', '')}\n")
    buf.write("# spec = " + json.dumps(spec, sort_keys=True) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(row[c]) for c in columns) + "\n")
    return buf.getvalue()


def read_embedded_spec(text: str) -> tuple[str, dict]:
    command = spec = None
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if body.startswith("command = "):
            command = body.split("= ", 1)[1]
        elif body.startswith("spec = "):
            spec = json.loads(body.split("= ", 1)[1])
    if command is None or spec is None:
        raise SpecError("no embedded command/spec in CSV header")
    return command, spec


def resolve(defaults: dict, *layers: dict) -> dict:
    spec = dict(defaults)
    for layer in layers:
        for k, v in layer.items():
            if v is not None:
                if k not in defaults:
                    raise SpecError(f"unknown parameter {k!r}")
                spec[k] = v
    return spec


# --------------------------------------------------------------------------
# config files


def _coerce(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("", "none"):
        return None
    if "," in text:
        return [_coerce(x) for x in text.split(",") if x.strip()]
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def load_config(path: str, section: str) -> dict:
    """Flat ``key = value`` pairs from ``[section]`` (plus ``[DEFAULT]``)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise SpecError(f"cannot read config {path}")
    if section not in parser and not parser.defaults():
        raise SpecError(f"config {path} has no [{section}] section")
    items = parser[section] if section in parser else parser.defaults()
    return {k: _coerce(v) for k, v in items.items()}


def normalize_censors(raw: dict, n_default: int) -> dict:
    """Accept c_e directly, or (f, c), or ce_ratio, and reduce to c_e."""
    out = dict(raw)
    f, c = out.pop("f", None), out.pop("c", None)
    if c is not None:
        n = out.get("n") or n_default
        if f is None:
            f = (n - 1) // 3
        out["c_e"] = effective_censors(n, int(f), int(c))
    return out


# --------------------------------------------------------------------------
# plan


def plan_inputs(spec: dict) -> PlanInputs:
    return PlanInputs(
        n=spec["n"], c_e=spec["c_e"], delta=spec["delta"], S=spec["S"], M_h=spec["M_h"],
        M_s=spec["M_s"], epsilon=spec["epsilon"], delta_code=spec["delta_code"],
        ell_sym_grid=tuple(spec["ell_sym_grid"]), s_max=spec["s_max"],
    )


def run_plan(spec: dict):
    inputs = plan_inputs(spec)
    variants = list(planner.PLANNERS) if spec["variant"] == "all" else [spec["variant"]]
    rows = []
    errors = []
    for v in variants:
        try:
            rows.append(planner.plan(v, inputs).row())
        except analysis.Infeasible as exc:
            if len(variants) == 1:
                raise
            errors.append(f"{v}: {exc}")
    return list(planner.CSV_COLUMNS), rows, errors


# --------------------------------------------------------------------------
# simulate

SIM_COLUMNS = (
    "trial", "seed", "variant", "n", "c_e", "m", "s", "ell_sym", "K",
    "slots_to_inclusion", "included", "bytes_published", "adversary_decode_slot",
)


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, np.uint64)[0])


def strategy_from_spec(spec: dict) -> StrategyConfig:
    v = spec["variant"]
    if v == "rateless":
        return StrategyConfig("rateless", spec["m"], spec["s"], symbol_len=spec["ell_sym"], epsilon=spec["epsilon"])
    if v == "mds":
        return StrategyConfig("mds", spec["m"], shares_needed=spec["k"])
    return StrategyConfig(v, spec["m"])


def run_simulate(spec: dict):
    if spec["trials"] < 1:
        raise SpecError("trials must be >= 1")
    config = strategy_from_spec(spec)
    config.check_lanes(spec["n"])
    payload = bytes.fromhex(spec["payload_hex"]) if spec["payload_hex"] else int(spec["payload_size"])
    rows = []
    for t in range(spec["trials"]):
        ts = trial_seed(spec["seed"], t)
        r = simulate_inclusion(config, spec["n"], spec["c_e"], payload, ts, max_slots=spec["max_slots"])
        rows.append({
            "trial": t, "seed": ts, "variant": config.variant, "n": spec["n"], "c_e": spec["c_e"],
            "m": config.lanes,
            "s": config.symbols_per_bundle if config.variant == "rateless" else None,
            "ell_sym": config.symbol_len,
            "K": r.threshold,
            "slots_to_inclusion": r.slots_to_inclusion if r.included else r.outcome,
            "included": r.included,
            "bytes_published": r.bytes_published,
            "adversary_decode_slot": r.adversary_decode_slot if spec["collects_symbols"] else None,
        })
    return list(SIM_COLUMNS), rows, []


# --------------------------------------------------------------------------
# sweep

SWEEP_COLUMNS = (
    "axis", "value", "variant", "n", "c_e", "delta", "S", "m", "k", "s", "ell_sym", "K",
    "L_pub", "overhead", "floor", "it_floor", "success_prob", "early_decode_prob",
    "sim_trials", "sim_success", "sim_early_decode",
)


def _sweep_point(spec: dict, axis: str, value) -> dict:
    p = dict(spec)
    if axis in ("S", "n", "delta"):
        p[axis] = value
    elif axis == "ce_ratio":
        p["ce_ratio"] = value
    if p.get("ce_ratio") is not None:
        p["c_e"] = int(round(p["ce_ratio"] * p["n"]))
    return p


def _row(axis, value, variant, p, **kw) -> dict:
    base = {c: None for c in SWEEP_COLUMNS}
    base.update(axis=axis, value=value, variant=variant, n=p["n"], c_e=p["c_e"], delta=p["delta"], S=p["S"])
    base.update(kw)
    return base


def _simulated(spec: dict, config: StrategyConfig, n: int, c_e: int, S: int, salt: int):
    trials = spec["trials"]
    if not trials:
        return {}
    ok = early = 0
    for t in range(trials):
        r = simulate_inclusion(config, n, c_e, S - 32, trial_seed(spec["seed"] + salt, t), max_slots=1)
        ok += r.included
        early += r.adversary_decode_slot == 1
    return {"sim_trials": trials, "sim_success": ok / trials, "sim_early_decode": early / trials}


def run_sweep(spec: dict):
    axis = spec["axis"]
    if axis not in SWEEP_AXES:
        raise SpecError(f"unknown axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    values = spec["values"] if spec["values"] is not None else SWEEP_VALUES[axis]
    if axis == "n" and spec["ce_ratio"] is None:
        # keep the base censoring fraction as n grows
        spec = {**spec, "ce_ratio": spec["c_e"] / spec["n"]}
    if not isinstance(values, list):
        values = [values]
    rows = []
    if axis in ("S", "n", "delta", "ce_ratio"):
        for value in values:
            p = _sweep_point(spec, axis, value)
            inputs = plan_inputs({**p})
            it_floor = float(analysis.it_lower_bound(p["n"], p["c_e"], 1))
            for v in spec["variants"]:
                try:
                    r = planner.plan(v, inputs)
                except analysis.Infeasible:
                    rows.append(_row(axis, value, v, p, it_floor=it_floor))
                    continue
                floor = analysis.overhead_floor(v, p["n"], p["c_e"], p["epsilon"], m_opt=r.m)
                rows.append(_row(
                    axis, value, v, p, m=r.m, k=r.k, s=r.s, ell_sym=r.ell_sym, K=r.K,
                    L_pub=r.cost.l_pub, overhead=r.overhead, floor=floor, it_floor=it_floor,
                    success_prob=r.success_prob, early_decode_prob=r.early_decode_prob,
                ))
        return list(SWEEP_COLUMNS), rows, []
    return _sweep_fanout(spec, axis, values)


def _sweep_fanout(spec: dict, axis: str, values):
    """Success / early-decode curves against m (or against s for rateless)."""
    p = _sweep_point(spec, axis, None)
    n, c_e, S = p["n"], p["c_e"], p["S"]
    inputs = plan_inputs(p)
    k = p["k"] or planner.plan_mds(inputs).k
    if p["ell_sym"] is None or (axis == "m" and p["s"] is None):
        ref = planner.plan_rateless(inputs)
        ell = p["ell_sym"] or ref.ell_sym
        s_fixed = p["s"] or ref.s
    else:
        ell, s_fixed = p["ell_sym"], p["s"]
    params = codec.RatelessParams(S, ell, p["epsilon"])
    K = params.decode_threshold
    dc = p["delta_code"] if p["delta_code"] is not None else codec.delta_code_for(params)
    it_floor = float(analysis.it_lower_bound(n, c_e, 1))
    rows = []
    for i, value in enumerate(values):
        if axis == "m":
            points = [(v, value, s_fixed) for v in p["variants"]]
        else:
            m = p["m"] if p.get("m") else planner.exact_min_m(n, c_e, max(p["delta"] - dc, 1e-300), analysis.lanes_needed(K, value))
            points = [("rateless", m, value)]
        for v, m, s in points:
            if not 1 <= m <= n:
                continue
            if v == "naive":
                cost = analysis.bandwidth_cost("naive", S, p["M_h"], m=m)
                prob = analysis.hypergeom_tail_ge(analysis.honest_lanes(n, c_e, m), 1)
                early = analysis.early_decode_prob(n, c_e, m, 1, 1)
                row = _row(axis, value, v, p, m=m, K=1, L_pub=cost.l_pub, overhead=cost.overhead,
                           success_prob=prob, early_decode_prob=early, it_floor=it_floor)
                cfg = StrategyConfig("naive", m)
            elif v == "mds":
                if m < k or m > codec.MAX_MDS_SHARES:
                    continue
                cost = analysis.bandwidth_cost("mds", S, p["M_h"], m=m, k=k)
                prob = analysis.hypergeom_tail_ge(analysis.honest_lanes(n, c_e, m), k)
                early = analysis.early_decode_prob(n, c_e, m, 1, k)
                row = _row(axis, value, v, p, m=m, k=k, K=k, L_pub=cost.l_pub, overhead=cost.overhead,
                           success_prob=prob, early_decode_prob=early, it_floor=it_floor)
                cfg = StrategyConfig("mds", m, shares_needed=k)
            else:
                cost = analysis.bandwidth_cost("rateless", S, p["M_h"], p["M_s"], ell, m=m, s=s, K=K)
                prob = analysis.single_slot_success(n, c_e, m, s, K, dc)
                early = analysis.early_decode_prob(n, c_e, m, s, K)
                row = _row(axis, value, v, p, m=m, s=s, ell_sym=ell, K=K, L_pub=cost.l_pub,
                           overhead=cost.overhead, success_prob=prob, early_decode_prob=early, it_floor=it_floor)
                cfg = StrategyConfig("rateless", m, s, symbol_len=ell, epsilon=p["epsilon"])
            row.update(_simulated(spec, cfg, n, c_e, S, salt=1000 * i))
            rows.append(row)
    return list(SWEEP_COLUMNS), rows, []


# --------------------------------------------------------------------------
# codec bench

BENCH_COLUMNS = (
    "blocks", "K", "symbol_len", "trials", "failures", "rate", "analytic",
    "encode_mults", "decode_mults",
)


def run_codec_bench(spec: dict):
    if spec["trials"] < 1:
        raise SpecError("trials must be >= 1")
    ell = spec["symbol_len"]
    rows = []
    blocks_list = spec["blocks"] if isinstance(spec["blocks"], list) else [spec["blocks"]]
    excess_list = spec["excess"] if isinstance(spec["excess"], list) else [spec["excess"]]
    for b in blocks_list:
        # message of exactly b blocks: K = ceil(1.05 b) >= b; "excess" overrides it
        params = codec.RatelessParams(b * ell, ell, 0.05)
        for e in excess_list:
            K = b + e
            fails = codec.delta_code_failures(params, spec["trials"], spec["seed"], symbols=K)
            rows.append({
                "blocks": b, "K": K, "symbol_len": ell, "trials": spec["trials"], "failures": fails,
                "rate": fails / spec["trials"], "analytic": codec.rank_deficiency_probability(K, b),
                "encode_mults": K * b * ell,
                "decode_mults": b * K * (b + ell),
            })
    return list(BENCH_COLUMNS), rows, []


@dataclass(frozen=True)
class Command:
    defaults: dict
    runner: Callable


COMMANDS = {
    "plan": Command(PLAN_DEFAULTS, run_plan),
    "simulate": Command(SIM_DEFAULTS, run_simulate),
    "sweep": Command(SWEEP_DEFAULTS, run_sweep),
    "codec-bench": Command(BENCH_DEFAULTS, run_codec_bench),
}


def render(command: str, spec: dict) -> tuple[str, list[str]]:
    columns, rows, warnings = COMMANDS[command].runner(spec)
    return to_csv(command, spec, columns, rows), warnings
