"""Command-line scenario runner: config ingestion, presets, sweeps and CSV/JSON export."""
from __future__ import annotations

import argparse
import ast
import configparser
import csv
import json
import math
import operator
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bath as bathmod
from . import dissipators as diss
from . import evolve, fidelity, pulseopt
from .operators import MalformedGenerator
from .specs import BathSpec, ConfigError, ModelSpec, PulseSpec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

SCENARIOS = ("trace", "bath-table", "fidelity-map", "fidelity-scan", "tp-theta-surface", "relax-delay",
             "coherence-crossover", "optimize-pulse", "fmo", "audit")

# FMO exciton model in wavenumbers; Delta is the energy unit
FMO_DELTA_CM = 250.0
FMO_U_CM = 10.0
FMO_OMEGA_C_CM = 100.0
FMO_LAMBDA2 = 0.25
KB_CM_PER_K = 0.695034

# ---------------------------------------------------------------------------
# parameter schema


def _number(text):
    """Float from a literal or a small arithmetic expression in ``pi`` (e.g. "pi/2", "1.5*pi")."""
    if isinstance(text, (int, float)):
        return float(text)
    ops = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in ops:
            return ops[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in ops:
            return ops[type(node.op)](ev(node.operand))
        raise ValueError
    try:
        return float(ev(ast.parse(str(text).strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError):
        raise ConfigError(f"not a number: {text!r}") from None


def _numbers(text):
    if isinstance(text, (list, tuple)):
        return [_number(v) for v in text]
    text = str(text).strip()
    if not text:
        return []
    if text.startswith("linspace(") and text.endswith(")"):
        lo, hi, n = text[9:-1].split(",")
        return [float(v) for v in np.linspace(_number(lo), _number(hi), int(_number(n)))]
    if text.startswith("logspace(") and text.endswith(")"):
        lo, hi, n = text[9:-1].split(",")
        return [float(v) for v in np.geomspace(_number(lo), _number(hi), int(_number(n)))]
    return [_number(v) for v in text.split(",")]


def _words(text):
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [w.strip() for w in str(text).split(",") if w.strip()]


def _integer(text):
    v = _number(text)
    if v != int(v):
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def _optional_number(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return _number(text)


def _flag(text):
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


SCHEMA = {
    "model": {"delta": _number, "xi": _number, "phi": _number, "transverse": _number},
    "bath": {"lambda2": _number, "s": _number, "omega_c": _number, "temperature": _number},
    "pulse": {"theta": _number, "tau_p": _number, "axis_phase": _number, "fourier": _numbers},
    "run": {"t_end": _number, "dt": _number, "histories": _words, "frame": _words,
            "record_stride": _integer, "settle_time": _optional_number, "coarse_grained": _flag,
            "thetas": _numbers, "taus": _numbers, "window": _numbers, "after": _numbers,
            "omegas": _numbers, "times": _numbers, "n_theta": _integer, "n_phi": _integer,
            "budget": _integer, "restarts": _integer, "seed": _integer, "nsteps": _integer,
            "temp_k": _numbers, "s_list": _numbers, "temperatures": _numbers},
}
KEY_SECTION = {k: sec for sec, keys in SCHEMA.items() for k in keys}

BASE = {
    "delta": 1.0, "xi": 0.0, "phi": 0.0, "transverse": 1.0,
    "lambda2": 0.02, "s": 1.0, "omega_c": 1.0, "temperature": 0.0,
    "theta": math.pi / 2, "tau_p": 0.0, "axis_phase": 0.0, "fourier": [],
    "t_end": 600.0, "dt": 0.01, "histories": ["dp", "factorized", "markov"], "frame": ["schrodinger"],
    "record_stride": 0, "settle_time": None, "coarse_grained": False,
    "thetas": [], "taus": [], "window": [40.0, 80.0], "after": [20.0, 40.0, 60.0, 80.0],
    "omegas": [-1.0, 0.0, 1.0], "times": [], "n_theta": fidelity.GRID_THETA, "n_phi": fidelity.GRID_PHI,
    "budget": 2000, "restarts": pulseopt.RESTARTS, "seed": 0, "nsteps": pulseopt.SUBSTEPS,
    "temp_k": [77.0, 300.0], "s_list": [1.0, 0.9, 0.8, 0.7, 0.6, 0.5], "temperatures": [],
}

SCENARIO_DEFAULTS = {
    "trace": {},
    "bath-table": {"times": list(np.linspace(0.0, 50.0, 101))},
    "fidelity-map": {"lambda2": 1e-5, "xi": 1.0, "tau_p": 200.0, "histories": ["dp"]},
    "fidelity-scan": {"lambda2": 1e-5, "tau_p": 200.0, "histories": ["dp"],
                      "thetas": list(np.linspace(0.0, 2 * math.pi, 25)[1:])},
    "tp-theta-surface": {"lambda2": 1e-5, "xi": 2.0, "histories": ["dp"],
                         "taus": [1.0, 3.0, 10.0, 30.0, 100.0, 200.0],
                         "thetas": list(np.linspace(0.0, 2 * math.pi, 17)[1:])},
    "relax-delay": {"lambda2": 0.001, "xi": 0.0, "theta": math.pi,
                    "taus": [0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0]},
    "coherence-crossover": {"lambda2": 0.001, "xi": 4.0, "theta": math.pi / 2,
                            "taus": [1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0,
                                     70.0, 100.0]},
    "optimize-pulse": {"lambda2": 1e-5, "s": 0.5, "xi": 2.0, "transverse": 0.0, "tau_p": 200.0,
                       "histories": ["dp"]},
    "fmo": {"t_end": 200.0, "histories": ["dp", "factorized"], "theta": math.pi / 2},
    "audit": {"xi": 4.0, "t_end": 1000.0, "histories": ["dp"]},
}

# named reference parameter sets
PRESETS = {
    "fig3c": ("trace", {"lambda2": 0.02, "xi": 4.0, "temperature": 0.0, "s": 1.0, "omega_c": 1.0,
                        "theta": math.pi / 2, "tau_p": 0.0, "t_end": 600.0}),
    "fig4": ("trace", {"lambda2": 0.002, "xi": 4.0, "temperature": 0.0, "omega_c": 1.0,
                       "theta": math.pi / 4, "tau_p": 1.0, "t_end": 2000.0}),
    "fig4b": ("coherence-crossover", {"lambda2": 0.001, "xi": 4.0, "temperature": 0.0, "omega_c": 1.0,
                                      "theta": math.pi / 2}),
    "fig5": ("trace", {"lambda2": 0.02, "xi": 4.0, "omega_c": 1.0, "theta": math.pi / 2, "tau_p": 0.0,
                       "temperatures": [0.0, 0.0025, 0.01], "t_end": 600.0}),
    "fig6": ("relax-delay", {"lambda2": 0.001, "xi": 0.0, "temperature": 0.0, "s": 1.0, "omega_c": 1.0,
                             "theta": math.pi}),
    "fig7": ("fidelity-map", {"lambda2": 1e-5, "xi": 1.0, "temperature": 0.0, "omega_c": 1.0,
                              "tau_p": 200.0, "theta": math.pi / 2}),
    "fig8": ("fidelity-scan", {"lambda2": 1e-5, "xi": 4.0, "temperature": 0.0, "s": 1.0, "omega_c": 1.0,
                               "tau_p": 200.0}),
    "fig9": ("tp-theta-surface", {"lambda2": 1e-5, "xi": 2.0, "temperature": 0.0, "s": 1.0, "omega_c": 1.0}),
    "fig10": ("optimize-pulse", {"lambda2": 1e-5, "s": 0.5, "temperature": 0.0, "omega_c": 1.0,
                                 "tau_p": 200.0, "theta": math.pi / 2, "xi": 2.0, "transverse": 0.0}),
    "fig11": ("trace", {"lambda2": 0.02, "xi": 4.0, "temperature": 0.0, "omega_c": 1.0, "theta": math.pi / 2,
                        "tau_p": 0.0, "t_end": 1000.0, "frame": ["interaction"], "coarse_grained": True,
                        "histories": ["dp", "factorized"]}),
    "fig12c": ("audit", {"lambda2": 0.02, "xi": 4.0, "temperature": 0.0, "omega_c": 1.0, "phi": 0.0,
                         "histories": ["dp", "factorized"]}),
    "fig12d": ("audit", {"lambda2": 0.02, "xi": 4.0, "temperature": 0.0025, "omega_c": 1.0, "phi": 0.0,
                         "histories": ["dp", "factorized"]}),
    "fig13": ("fmo", {}),
}


def _coerce(key, value):
    if key not in KEY_SECTION:
        raise ConfigError(f"unknown parameter {key!r}")
    try:
        return SCHEMA[KEY_SECTION[key]][key](value)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def read_config(path) -> tuple[str | None, dict]:
    """Parameters from an INI file (sections model/bath/pulse/run) or a JSON sidecar."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        params = data.get("params", {})
        return data.get("scenario"), {k: _coerce(k, v) for k, v in params.items()}
    cp = configparser.ConfigParser()
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        for key, value in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{sec}]")
            out[key] = _coerce(key, value)
    return None, out


def resolve(scenario: str, preset: str | None, config: dict, flags: dict) -> dict:
    """Merge defaults < scenario defaults < preset < config file < flags."""
    params = dict(BASE)
    params.update({k: _coerce(k, v) for k, v in SCENARIO_DEFAULTS[scenario].items()})
    if preset:
        params.update({k: _coerce(k, v) for k, v in PRESETS[preset][1].items()})
    params.update(config)
    params.update(flags)
    return params


def model_of(q) -> ModelSpec:
    return ModelSpec(delta=q["delta"], xi=q["xi"], phi=q["phi"], transverse=q["transverse"])


def bath_of(q, temperature=None) -> BathSpec:
    return BathSpec(q["lambda2"], q["s"], q["omega_c"], q["temperature"] if temperature is None else temperature)


def pulse_of(q, theta=None, tau_p=None) -> PulseSpec:
    tau = q["tau_p"] if tau_p is None else tau_p
    return PulseSpec(q["theta"] if theta is None else theta, tau_p1=0.0, tau_p2=tau,
                     axis_phase=q["axis_phase"], fourier=tuple(q["fourier"]) or None)


def fmo_dimensionless(s: float, temp_k: float) -> tuple[ModelSpec, BathSpec]:
    """FMO exciton parameters in units of Delta: omega_c = 0.4, xi = Delta/(2U) = 12.5."""
    m = ModelSpec(delta=1.0, xi=FMO_DELTA_CM / (2 * FMO_U_CM))
    b = BathSpec(FMO_LAMBDA2, s, FMO_OMEGA_C_CM / FMO_DELTA_CM, KB_CM_PER_K * temp_k / FMO_DELTA_CM)
    return m, b


# ---------------------------------------------------------------------------
# output


class Output:
    def __init__(self, directory, scenario):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.scenario = scenario
        self.files = []

    def path(self, name):
        p = self.dir / name
        self.files.append(p.name)
        return p

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def json(self, name, data):
        self.path(name).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


PLOT_STUB = '''"""Plot {scenario} outputs. Requires matplotlib (not a dependency of the package)."""
import csv
import sys

import matplotlib.pyplot as plt

for name in {files!r}:
    if not name.endswith(".csv"):
        continue
    with open(name) as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
    cols = list(zip(*data))
    plt.figure()
    for k in range(1, len(header)):
        plt.plot(cols[0], cols[k], label=header[k])
    plt.xlabel(header[0])
    plt.title(name)
    plt.legend()
plt.show() if "--save" not in sys.argv else plt.savefig("{scenario}.png")
'''


# ---------------------------------------------------------------------------
# scenarios

def _histories(q):
    for h in q["histories"]:
        if h not in diss.HISTORIES:
            raise ConfigError(f"histories: unknown history {h!r} (allowed {diss.HISTORIES})")
    return q["histories"]


def _sim(q, m, b, p, history, frame=None):
    return evolve.SimConfig(m, b, p, t_end=q["t_end"], dt=q["dt"], record_stride=q["record_stride"] or None,
                            frame=frame or q["frame"][0], history=history, settle_time=q["settle_time"])


def _trace_rows(tr):
    return np.column_stack([tr.times, tr.bloch, tr.eps_min])


TRACE_HEADER = ["t", "nx", "ny", "nz", "eps_min"]


def run_trace(q, out, mapper):
    m, p = model_of(q), pulse_of(q)
    temps = q["temperatures"] or [q["temperature"]]
    summary = {}
    for temp in temps:
        b = bath_of(q, temp)
        tag = "" if len(temps) == 1 else f"_T{temp:g}"
        for h in _histories(q):
            tr = evolve.integrate(_sim(q, m, b, p, h))
            out.csv(f"trace_{h}{tag}.csv", TRACE_HEADER, _trace_rows(tr))
            entry = {"recovery": evolve.recovery_amplitude(tr), "min_eps": float(tr.eps_min.min())}
            if q["coarse_grained"] and h in ("dp", "factorized"):
                cg = evolve.integrate_coarse_grained(m, b, p, q["t_end"], history=h)
                out.csv(f"trace_{h}_coarse{tag}.csv", TRACE_HEADER, _trace_rows(cg))
                ref = evolve.integrate(_sim(q, m, b, p, h, frame="schrodinger"))
                entry["coarse_max_dnx"] = float(np.max(np.abs(cg.at(ref.times)[:, 0] - ref.bloch[:, 0])))
            summary[f"{h}{tag}"] = entry
    return summary


def check_trace(q, summary):
    keys = [k for k in summary if k.startswith("dp")]
    ok = True
    for k in keys:
        fk = "factorized" + k[2:]
        if fk in summary:
            ok &= summary[k]["recovery"] >= 0.2 > summary[fk]["recovery"]
    for v in summary.values():
        if "coarse_max_dnx" in v:
            ok &= v["coarse_max_dnx"] < 0.02
    return ok


def run_bath_table(q, out, mapper):
    b = bath_of(q)
    rows = bathmod.bath_table(b, q["omegas"], q["times"])
    out.csv("bath_table.csv", ["t", "omega", "J", "S"], rows)
    limits = {}
    for w in q["omegas"]:
        try:
            g = bathmod.spectral_asymptotic(b, w)
            limits[f"{w:g}"] = {"J": g.real, "S": g.imag}
        except bathmod.DivergentLimit:
            limits[f"{w:g}"] = None
    return {"asymptotic": limits}


def run_fidelity_map(q, out, mapper):
    m, b, p = model_of(q), bath_of(q), pulse_of(q)
    n = fidelity.gate_final_state(m, b, p, q["dt"], _histories(q)[0])
    fm = fidelity.fidelity_map(n, q["n_theta"], q["n_phi"])
    header = ["theta\\phi"] + [_fmt(v) for v in fm.phi_grid]
    out.csv("fidelity_map.csv", header, [[th, *row] for th, row in zip(fm.theta_grid, fm.values)])
    out.csv("fidelity_ratio.csv", header,
            [[th, *row] for th, row in zip(fm.theta_grid, fm.ratio())])
    tgt = fidelity.ideal_rotation_target(p.theta)
    f_ideal = float(fidelity.fidelity(n, math.acos(np.clip(tgt[2], -1, 1)), math.atan2(tgt[1], tgt[0])))
    return {"f_max": fm.f_max, "theta_m": fm.theta_m, "phi_m": fm.phi_m, "fidelity_ideal_target": f_ideal,
            "final": n}


def run_fidelity_scan(q, out, mapper):
    m, b = model_of(q), bath_of(q)
    r = fidelity.fidelity_scan_theta(m, b, q["tau_p"], q["thetas"], q["dt"], _histories(q)[0], mapper=mapper)
    out.csv("fidelity_scan.csv", ["theta", "fidelity", "f_max", "theta_m", "phi_m"],
            zip(r["theta"], r["fidelity"], r["f_max"], r["theta_m"], r["phi_m"]))
    th = r["theta"]
    summary = {}
    for name, val in (("pi", math.pi), ("two_pi", 2 * math.pi)):
        i = np.nonzero(np.isclose(th, val))[0]
        if i.size:
            summary[f"fidelity_{name}"] = float(r["fidelity"][i[0]])
    return summary


def check_fidelity_scan(q, summary):
    if "fidelity_pi" in summary and "fidelity_two_pi" in summary:
        return summary["fidelity_two_pi"] > summary["fidelity_pi"]
    return True


def run_tp_theta(q, out, mapper):
    m, b = model_of(q), bath_of(q)
    r = fidelity.fidelity_scan_tp_theta(m, b, q["taus"], q["thetas"], q["dt"], _histories(q)[0], mapper=mapper)
    header = ["tau_p\\theta"] + [_fmt(v) for v in r["theta"]]
    out.csv("tp_theta_fmax.csv", header, [[tp, *row] for tp, row in zip(r["tau_p"], r["f_max"])])
    out.csv("tp_theta_fidelity.csv", header, [[tp, *row] for tp, row in zip(r["tau_p"], r["fidelity"])])
    return {"f_max_min": float(r["f_max"].min()), "f_max_max": float(r["f_max"].max())}


def run_relax_delay(q, out, mapper):
    m, b = model_of(q), bath_of(q)
    v, d0 = evolve.relaxation_delay_curve(m, b, q["taus"], q["theta"], tuple(q["window"]), q["dt"], mapper)
    out.csv("relax_delay.csv", ["tau_p", "delay_ratio"], zip(q["taus"], v))
    return {"factorized_delay": d0, "crossover": evolve.crossover_time(q["taus"], v)}


def check_relax_delay(q, summary):
    return 0.5 <= summary["crossover"] <= 1.5


def run_coherence_crossover(q, out, mapper):
    m, b = model_of(q), bath_of(q)
    mean, ratio, ref = evolve.coherence_excess_curve(m, b, q["taus"], q["theta"], tuple(q["after"]), q["dt"],
                                                    mapper)
    header = ["tau_p", "mean"] + [f"after_{a:g}" for a in q["after"]]
    out.csv("coherence_crossover.csv", header, [[tp, mu, *row] for tp, mu, row in zip(q["taus"], mean, ratio)])
    return {"factorized_excess": ref, "crossover": evolve.crossover_time(q["taus"], mean)}


def check_coherence_crossover(q, summary):
    return 15.0 <= summary["crossover"] <= 60.0


def run_optimize_pulse(q, out, mapper):
    m, b, p = model_of(q), bath_of(q), pulse_of(q)
    p = PulseSpec(p.theta, p.tau_p1, p.tau_p2, p.axis_phase)
    init = q["fourier"] or None
    res = pulseopt.optimize(m, b, p, init=init, budget=q["budget"], restarts=q["restarts"], seed=q["seed"],
                            nsteps=q["nsteps"], mapper=mapper)
    hist = _histories(q)[0]
    f0 = fidelity.gate_final_state(m, b, p, q["dt"], hist)
    f1 = fidelity.gate_final_state(m, b, PulseSpec(p.theta, p.tau_p1, p.tau_p2, p.axis_phase,
                                                   tuple(res.a)), q["dt"], hist)
    data = {"a": res.a, "objective": res.objective, "baseline": res.baseline,
            "fidelity_before": fidelity.fidelity_map(f0).f_max,
            "fidelity_after": fidelity.fidelity_map(f1).f_max,
            "iterations": res.iterations, "evaluations": res.evaluations, "converged": res.converged,
            "restart": res.restart}
    out.json("optimize_pulse.json", data)
    return data


def check_optimize_pulse(q, summary):
    return (summary["objective"] <= 0.5 * summary["baseline"]
            and summary["fidelity_after"] > summary["fidelity_before"])


def _fmo_point(args):
    s, temp_k, t_end, dt, theta = args
    m, b = fmo_dimensionless(s, temp_k)
    p = PulseSpec(theta)
    runs = {}
    for h in ("dp", "factorized"):
        try:
            runs[h] = evolve.integrate(evolve.SimConfig(m, b, p, t_end=t_end, dt=dt, history=h, method="expm"))
        except bathmod.ConvergenceError as exc:
            runs[h] = str(exc)
    return s, temp_k, runs


def fmo_coherence_gap(runs, late=0.5) -> float:
    """Largest dp-minus-factorized excess of the per-period coherence envelope over the late part of the run.

    Only windows centred after ``late`` of the way from the gate to the end
    are compared, which keeps the strong-coupling transient right after the
    gate (where the Bloch norm can exceed 1) out of the comparison.
    """
    env = {}
    for h, tr in runs.items():
        period = 2 * np.pi / tr.meta["delta"]
        centres, env[h] = evolve.period_envelope(tr.times, evolve.coherence_deviation(tr, tr.meta["asymptotic"]),
                                                 period, tr.meta["tau_p2"])
        start = tr.meta["tau_p2"] + late * (tr.times[-1] - tr.meta["tau_p2"])
    keep = centres >= start
    return float(np.max(env["dp"][keep] - env["factorized"][keep]))


def run_fmo(q, out, mapper):
    jobs = [(s, tk, q["t_end"], q["dt"], q["theta"]) for tk in q["temp_k"] for s in q["s_list"]]
    summary = {}
    for s, tk, runs in mapper(_fmo_point, jobs):
        tag = f"{tk:g}K_s{s:g}"
        row = {"s": s, "temp_k": tk, "diverged": [h for h, tr in runs.items() if isinstance(tr, str)]}
        for h, tr in runs.items():
            if isinstance(tr, str):
                row[f"error_{h}"] = tr
                continue
            out.csv(f"fmo_{h}_{tag}.csv", TRACE_HEADER, _trace_rows(tr))
            row[f"recovery_{h}"] = evolve.recovery_amplitude(tr)
            row[f"max_norm_{h}"] = float(np.max(np.linalg.norm(tr.bloch, axis=1)))
        row["dp_excess"] = None if row["diverged"] else fmo_coherence_gap(runs)
        summary[tag] = row
    return summary


def check_fmo(q, summary):
    hot = [v for v in summary.values() if v["temp_k"] == 300.0 and not v["diverged"]]
    ohmic = [v for v in hot if v["s"] == 1.0]
    sub = [v for v in hot if v["s"] < 1.0]
    if not ohmic or not sub:
        return False
    return ohmic[0]["recovery_dp"] < 0.2 and any(v["dp_excess"] > 0 for v in sub)


def run_audit(q, out, mapper):
    m, b, p = model_of(q), bath_of(q), pulse_of(q)
    summary = {}
    for h in _histories(q):
        tr = evolve.integrate(_sim(q, m, b, p, h))
        out.csv(f"audit_{h}.csv", TRACE_HEADER, _trace_rows(tr))
        rep = evolve.positivity_audit(tr)
        summary[h] = {"min_eps": rep.min_eps, "t_min": rep.t_min, "passed": rep.passed,
                      "first_negative": rep.first_negative, "threshold": rep.threshold}
    return summary


def check_audit(q, summary):
    return all(v["passed"] for v in summary.values())


RUNNERS = {
    "trace": (run_trace, check_trace),
    "bath-table": (run_bath_table, None),
    "fidelity-map": (run_fidelity_map, None),
    "fidelity-scan": (run_fidelity_scan, check_fidelity_scan),
    "tp-theta-surface": (run_tp_theta, None),
    "relax-delay": (run_relax_delay, check_relax_delay),
    "coherence-crossover": (run_coherence_crossover, check_coherence_crossover),
    "optimize-pulse": (run_optimize_pulse, check_optimize_pulse),
    "fmo": (run_fmo, check_fmo),
    "audit": (run_audit, check_audit),
}


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brgate", description="Gate-prepared open-qubit dynamics scenarios.")
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--config", help="INI file with [model]/[bath]/[pulse]/[run] sections, or a JSON sidecar")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--check", action="store_true", help="exit 4 when the scenario's acceptance check fails")
    ap.add_argument("--temp-k", dest="temp_k", help="FMO temperatures in kelvin (comma separated)")
    ap.add_argument("--tau-p", dest="tau_p", help="pulse duration")
    for sec, keys in SCHEMA.items():
        group = ap.add_argument_group(sec)
        for key in keys:
            if key in ("temp_k", "tau_p"):
                continue
            group.add_argument("--" + key.replace("_", "-"), dest=key, metavar=key.upper())
    return ap


@contextmanager
def _mapper(workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            yield ex.map
    else:
        yield map


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg_scenario, config = read_config(args.config) if args.config else (None, {})
        if cfg_scenario and cfg_scenario != args.scenario:
            raise ConfigError(f"config was written for scenario {cfg_scenario!r}, not {args.scenario!r}")
        if args.preset and PRESETS[args.preset][0] != args.scenario:
            raise ConfigError(f"preset {args.preset!r} belongs to scenario {PRESETS[args.preset][0]!r}")
        flags = {k: _coerce(k, v) for k, v in vars(args).items() if k in KEY_SECTION and v is not None}
        if args.scenario == "fmo" and "s" in flags:
            flags["s_list"] = [flags.pop("s")]
        params = resolve(args.scenario, args.preset, config, flags)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = Output(args.out, args.scenario)
        runner, checker = RUNNERS[args.scenario]
        with _mapper(args.workers) as mapper:
            summary = runner(params, out, mapper)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, MalformedGenerator, bathmod.ConvergenceError, np.linalg.LinAlgError,
            diss.UnsupportedConfiguration) as exc:
        print(f"numerical failure in {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out.json(f"{args.scenario}_summary.json", summary)
    out.path(f"plot_{args.scenario.replace('-', '_')}.py").write_text(
        PLOT_STUB.format(scenario=args.scenario, files=list(out.files)))
    sidecar = {"scenario": args.scenario, "preset": args.preset, "params": params, "seed": params["seed"],
               "version": version(), "outputs": out.files}
    out.json(f"{args.scenario}_config.json", sidecar)
    status = EXIT_OK
    if args.check and checker is not None and not checker(params, summary):
        status = EXIT_CHECK
    print(json.dumps(_jsonable({"scenario": args.scenario, "status": "ok" if status == 0 else "check failed",
                                "summary": summary}), sort_keys=True))
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
