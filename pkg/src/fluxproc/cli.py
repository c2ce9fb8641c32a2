"""Command-line front end.

Every subcommand reads an optional INI file whose single section is named
after the subcommand (plus an optional ``[run]`` section holding ``seed``
and ``workers``).  Parsing is strict: unknown sections or keys and
invalid values are rejected with a ``section.key`` path.  Each run writes
``<subcommand>.csv`` (header cells carry units in brackets) and a JSON
sidecar ``<subcommand>.json`` holding the resolved config, its hash, the
seed, the package version and the wall time.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


# ----------------------------------------------------------------------------
# schema


def _positive(v):
    return None if v > 0 else "must be positive"


def _non_negative(v):
    return None if v >= 0 else "must be non-negative"


def _all_positive(v):
    return None if v and all(x > 0 for x in v) else "must be a non-empty list of positive numbers"


def _all_non_negative(v):
    return None if v and all(x >= 0 for x in v) else "must be a non-empty list of non-negative numbers"


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(options)}"
    return check


def _at_least(n):
    def check(v):
        return None if v >= n else f"must be at least {n}"
    return check


def _odd_distances(v):
    return None if v and all(d >= 3 and d % 2 for d in v) else "must list odd distances of at least 3"


@dataclass(frozen=True)
class Field:
    kind: str  # float, int, bool, str, floats, ints, auto_float
    default: object
    check: object = None


QUBIT = {
    "e_j": Field("float", 4.0, _positive),
    "e_c": Field("float", 1.0, _positive),
}
PAIR = {
    **QUBIT,
    "e_l_a": Field("float", 0.9, _positive),
    "e_l_b": Field("float", 1.0, _positive),
    "j_l": Field("float", 2.0, _non_negative),
    "j_c": Field("auto_float", "auto"),
}

SCHEMA: dict[str, dict[str, Field]] = {
    "spectrum": {
        **QUBIT,
        "e_l": Field("float", 1.0, _positive),
        "flux_start": Field("float", 0.0),
        "flux_stop": Field("float", 1.0),
        "points": Field("int", 101, _at_least(1)),
    },
    "t1map": {
        **QUBIT,
        "e_l_start": Field("float", 0.5, _positive),
        "e_l_stop": Field("float", 1.6, _positive),
        "points": Field("int", 23, _at_least(1)),
        "tan_delta": Field("float", 2e-7, _positive),
        "x_qp": Field("float", 5e-9, _non_negative),
    },
    "dispersive": {
        **QUBIT,
        "e_l": Field("float", 1.0, _positive),
        "g": Field("float", 100.0, _non_negative),
        "coupling": Field("str", "charge", _choice("charge", "phase")),
        "omega_r_start": Field("float", 4.0, _positive),
        "omega_r_stop": Field("float", 10.0, _positive),
        "points": Field("int", 25, _at_least(1)),
        "photon_number": Field("int", 1, _at_least(1)),
    },
    "gate1q": {
        **QUBIT,
        "e_l": Field("floats", [1.0], _all_positive),
        "channel": Field("str", "flux", _choice("flux", "charge")),
        "tau_g": Field("floats", [10.0], _all_positive),
        "target": Field("str", "X_pi", _choice("X_pi", "Y_pi")),
        "truncation": Field("int", 6, _at_least(3)),
    },
    "couple": {
        **QUBIT,
        "e_l_a": Field("float", 0.9, _positive),
        "e_l_b": Field("float", 1.0, _positive),
        "j_l": Field("float", 2.0, _non_negative),
        "j_c_start": Field("float", 0.0),
        "j_c_stop": Field("float", 20.0),
        "points": Field("int", 41, _at_least(1)),
    },
    "cr": {
        **PAIR,
        "epsilon_d": Field("floats", [5.0, 10.0, 20.0, 40.0], _all_non_negative),
    },
    "cz": {
        **PAIR,
        "epsilon_a": Field("float", 10.0, _non_negative),
        "epsilon_b": Field("float", 10.0, _non_negative),
        "phase_difference": Field("float", 0.0),
        "drive_offset": Field("floats", [50.0, 100.0, 200.0]),
    },
    "yield": {
        "rows": Field("int", 4, _at_least(1)),
        "cols": Field("int", 4, _at_least(1)),
        "periodic": Field("bool", True),
        "gate_type": Field("str", "CZ", _choice("CZ", "CR")),
        "sigma_f": Field("floats", [0.0, 10.0, 20.0, 30.0, 40.0], _all_non_negative),
        "samples": Field("int", 10000, _at_least(1)),
        "restarts": Field("int", 12, _at_least(1)),
    },
    "qec": {
        "distances": Field("ints", [3, 5], _odd_distances),
        "t1": Field("floats", [300e-6], _all_positive),
        "shots": Field("int", 20000, _at_least(1000)),
        "sector": Field("str", "horizontal", _choice("horizontal", "vertical")),
    },
}
RUN_FIELDS = {"seed": Field("int", 0, _non_negative), "workers": Field("int", 1, _at_least(1))}


def _convert(path: str, spec: Field, raw: str):
    text = raw.strip()
    try:
        if spec.kind == "float":
            value = float(text)
        elif spec.kind == "int":
            value = int(text)
        elif spec.kind == "bool":
            lowered = text.lower()
            if lowered not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            value = lowered in ("true", "yes", "1")
        elif spec.kind == "floats":
            value = [float(x) for x in text.split(",") if x.strip()]
        elif spec.kind == "ints":
            value = [int(x) for x in text.split(",") if x.strip()]
        elif spec.kind == "auto_float":
            value = "auto" if text.lower() == "auto" else float(text)
        else:
            value = text
    except ValueError:
        raise ConfigError(f"{path}: cannot read {raw!r} as {spec.kind}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    if spec.check is not None:
        problem = spec.check(value)
        if problem:
            raise ConfigError(f"{path}: {problem}")
    return value


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    rng_seed: int = 0
    output_path: Path = Path(".")
    worker_count: int = 1
    source_text: str = field(default="", repr=False)

    def resolved(self) -> dict:
        return {"subcommand": self.subcommand, "params": self.params, "rng_seed": self.rng_seed,
                "worker_count": self.worker_count}

    def digest(self) -> str:
        payload = json.dumps({"subcommand": self.subcommand, "params": self.params, "rng_seed": self.rng_seed},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def load_config(subcommand: str, text: str = "", seed: int | None = None, workers: int | None = None,
                out: str | Path = ".") -> RunConfig:
    """Parse and validate an INI document for ``subcommand``; flags override ``[run]``."""
    if subcommand not in SCHEMA:
        raise ConfigError(f"subcommand: unknown {subcommand!r}")
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    for section in parser.sections():
        if section not in (subcommand, "run"):
            raise ConfigError(f"{section}: unknown section for subcommand {subcommand!r}")
    params = {k: f.default for k, f in SCHEMA[subcommand].items()}
    run = {k: f.default for k, f in RUN_FIELDS.items()}
    for section, schema, target in ((subcommand, SCHEMA[subcommand], params), ("run", RUN_FIELDS, run)):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"{section}.{key}: unknown key")
            target[key] = _convert(f"{section}.{key}", schema[key], raw)
    if seed is not None:
        run["seed"] = _convert("--seed", RUN_FIELDS["seed"], str(seed))
    if workers is not None:
        run["workers"] = _convert("--workers", RUN_FIELDS["workers"], str(workers))
    if run["seed"] >= 2 ** 64:
        raise ConfigError("run.seed: must fit in 64 bits")
    return RunConfig(subcommand, params, run["seed"], Path(out), run["workers"], text)


# ----------------------------------------------------------------------------
# subcommands; each returns (header, rows, extra metadata)


def _pair_system(p):
    from .coupling import CoupledSystem, find_zz_null
    from .qubit import FluxoniumParams
    cs = CoupledSystem(FluxoniumParams(p["e_j"], p["e_c"], p["e_l_a"]), FluxoniumParams(p["e_j"], p["e_c"], p["e_l_b"]),
                       j_l=p["j_l"], j_c=0.0 if p["j_c"] == "auto" else p["j_c"])
    if p["j_c"] == "auto":
        cs = cs.with_coupling(j_c=find_zz_null(cs))
    return cs


def run_spectrum(p, cfg, pmap):
    from .qubit import FluxoniumParams, spectrum
    rows = []
    for f in np.linspace(p["flux_start"], p["flux_stop"], p["points"]):
        eig = spectrum(FluxoniumParams(p["e_j"], p["e_c"], p["e_l"], 2 * np.pi * f))
        rows.append([f, eig.transition(0, 1), eig.transition(1, 2), abs(eig.n_elements[0, 1]),
                     abs(eig.phi_elements[0, 1])])
    return ["phi_ext/2pi [1]", "omega01 [GHz]", "omega12 [GHz]", "n01 [1]", "phi01 [1]"], rows, {}


def run_t1map(p, cfg, pmap):
    from .decoherence import NoiseEnvironment, t1_dielectric, t1_quasiparticle, t1_total
    from .qubit import FluxoniumParams, spectrum
    env = NoiseEnvironment(tan_delta_diel=p["tan_delta"], x_qp=p["x_qp"])
    rows = []
    for e_l in np.linspace(p["e_l_start"], p["e_l_stop"], p["points"]):
        eig = spectrum(FluxoniumParams(p["e_j"], p["e_c"], e_l))
        rows.append([e_l, eig.transition(0, 1), t1_dielectric(eig, env) * 1e6, t1_quasiparticle(eig, env) * 1e6,
                     t1_total(eig, env) * 1e6])
    header = ["e_l [GHz]", "omega01 [GHz]", "t1_dielectric [us]", "t1_quasiparticle [us]", "t1_total [us]"]
    return header, rows, {}


def run_dispersive(p, cfg, pmap):
    from .qubit import FluxoniumParams, spectrum
    from .readout import ReadoutConfig, chi01_exact, chi01_perturbative
    params = FluxoniumParams(p["e_j"], p["e_c"], p["e_l"])
    eig = spectrum(params)
    rows = []
    for w in np.linspace(p["omega_r_start"], p["omega_r_stop"], p["points"]):
        rc = ReadoutConfig(float(w), g=p["g"], coupling_kind=p["coupling"])
        pert = chi01_perturbative(eig, rc)
        rows.append([w, pert.chi_mhz, chi01_exact(params, rc, p["photon_number"]), int(pert.dispersive)])
    return ["omega_r [GHz]", "chi01_perturbative [MHz]", "chi01_exact [MHz]", "dispersive [flag]"], rows, {}


def _gate1q_point(e_j, e_c, e_l, channel, tau_g, target, truncation):
    from .gates1q import SingleQubitGateSpec, optimize_gate
    from .qubit import FluxoniumParams, spectrum
    spec = SingleQubitGateSpec(spectrum(FluxoniumParams(e_j, e_c, e_l)), channel, tau_g, target, truncation)
    res = optimize_gate(spec)
    prm = res.parameters
    return [e_l, tau_g, res.error, res.leakage, float(prm["epsilon_d_mhz"]), float(prm["drag_lambda_ns"]),
            float(prm["detuning_mhz"])]


def run_gate1q(p, cfg, pmap):
    jobs = [(e_l, tau) for e_l in p["e_l"] for tau in p["tau_g"]]
    n = len(jobs)
    rows = list(pmap(_gate1q_point, [p["e_j"]] * n, [p["e_c"]] * n, [j[0] for j in jobs], [p["channel"]] * n,
                     [j[1] for j in jobs], [p["target"]] * n, [p["truncation"]] * n))
    header = ["e_l [GHz]", "tau_g [ns]", "error [1]", "leakage [1]", "epsilon_d [MHz]", "drag_lambda [ns]",
              "detuning [MHz]"]
    return header, rows, {}


def run_couple(p, cfg, pmap):
    from .coupling import CoupledSystem, find_zz_null, map_jl_to_jeff, zeta_zz_static
    from .qubit import FluxoniumParams
    cs = CoupledSystem(FluxoniumParams(p["e_j"], p["e_c"], p["e_l_a"]), FluxoniumParams(p["e_j"], p["e_c"], p["e_l_b"]),
                       j_l=p["j_l"])
    rows = [[j, zeta_zz_static(cs.with_coupling(j_c=float(j)))]
            for j in np.linspace(p["j_c_start"], p["j_c_stop"], p["points"])]
    null = find_zz_null(cs)
    extra = {"j_c_null_mhz": null, "j_eff_at_null_mhz": map_jl_to_jeff(cs.with_coupling(j_c=null))}
    return ["j_c [MHz]", "zeta_zz [kHz]"], rows, extra


def _cr_point(cs, eps):
    from .gates2q import cr_linear_response, cr_rate
    r = cr_rate(cs, eps)
    return [eps, r.mu, r.m, cr_linear_response(cs, eps), int(r.fit_ok)]


def run_cr(p, cfg, pmap):
    cs = _pair_system(p)
    eps = p["epsilon_d"]
    rows = list(pmap(_cr_point, [cs] * len(eps), eps))
    header = ["epsilon_d [MHz]", "mu [MHz]", "m [MHz]", "mu_linear_response [MHz]", "fit_ok [flag]"]
    return header, rows, {"j_c_mhz": cs.j_c}


def _cz_point(cs, p, offset):
    from .coupling import dressed_spectrum, map_jl_to_jeff
    from .gates2q import CzGateSpec, analytic_dynamical_zz, cz_detunings, cz_dynamical_zz, dressed_target_frequency
    w = dressed_target_frequency(dressed_spectrum(cs)) + offset * 1e-3
    spec = CzGateSpec(cs, p["epsilon_a"], p["epsilon_b"], omega_d=w, phase_b=-p["phase_difference"])
    da, db = cz_detunings(spec)
    z = cz_dynamical_zz(spec)
    formula = analytic_dynamical_zz(map_jl_to_jeff(cs), p["epsilon_a"], p["epsilon_b"], da, db, p["phase_difference"])
    return [offset, w, z.zeta_mhz, formula, int(z.fit_ok)]


def run_cz(p, cfg, pmap):
    cs = _pair_system(p)
    offs = p["drive_offset"]
    rows = list(pmap(_cz_point, [cs] * len(offs), [p] * len(offs), offs))
    header = ["drive_offset [MHz]", "omega_d [GHz]", "zeta_numeric [MHz]", "zeta_perturbative [MHz]",
              "fit_ok [flag]"]
    return header, rows, {"j_c_mhz": cs.j_c}


def run_yield(p, cfg, pmap):
    from .freqalloc import ConstraintSet, LatticeGraph, allocate, yield_mc
    graph = LatticeGraph(p["rows"], p["cols"], p["periodic"])
    cs = ConstraintSet(gate_type=p["gate_type"])
    alloc = allocate(graph, cs, rng_seed=cfg.rng_seed, restarts=p["restarts"])
    rows = []
    for k, sigma in enumerate(p["sigma_f"]):
        est = yield_mc(alloc, graph, cs, sigma, p["samples"], rng_seed=cfg.rng_seed + k, pmap=pmap)
        rows.append([sigma, est.fraction, *est.confidence_interval_95, est.passes, est.samples])
    extra = {"allocation": {"margin_mhz": alloc.margin, "node_freqs_ghz": list(map(float, alloc.node_freqs)),
                            "edges": [list(e) for e in graph.edges],
                            "drive_freqs_ghz": list(map(float, alloc.drive_freqs))}}
    return ["sigma_f [MHz]", "yield [1]", "ci_low [1]", "ci_high [1]", "passes [count]", "samples [count]"], rows, extra


def run_qec(p, cfg, pmap):
    from .qec import logical_error_rate, coherence_noise
    rows = []
    for t1 in p["t1"]:
        for d in p["distances"]:
            est = logical_error_rate(d, coherence_noise(t1), p["shots"], cfg.rng_seed + d, p["sector"], pmap=pmap)
            rows.append([t1 * 1e6, d, est.shots, est.failures, est.rate, est.ci_low, est.ci_high])
    header = ["t1 [us]", "distance [1]", "shots [count]", "failures [count]", "logical_error_rate [1]",
              "ci_low [1]", "ci_high [1]"]
    return header, rows, {}


RUNNERS = {
    "spectrum": run_spectrum, "t1map": run_t1map, "dispersive": run_dispersive, "gate1q": run_gate1q,
    "couple": run_couple, "cr": run_cr, "cz": run_cz, "yield": run_yield, "qec": run_qec,
}


# ----------------------------------------------------------------------------
# execution


@contextmanager
def _pool(workers: int):
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool.map


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def run(cfg: RunConfig) -> dict:
    """Execute one configured run and write its CSV and JSON sidecar into ``cfg.output_path``."""
    start = time.perf_counter()
    with _pool(cfg.worker_count) as pmap:
        header, rows, extra = RUNNERS[cfg.subcommand](cfg.params, cfg, pmap)
    wall = time.perf_counter() - start
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.subcommand}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows([[_cell(v) for v in row] for row in rows])
    meta = {"config": cfg.resolved(), "config_hash": cfg.digest(), "seed": cfg.rng_seed, "version": __version__,
            "wall_time_s": wall, "rows": len(rows), "csv": csv_path.name, **extra}
    (out / f"{cfg.subcommand}.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    return meta


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluxproc", description="Fluxonium processor simulations.")
    parser.add_argument("--version", action="version", version=f"fluxproc {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SCHEMA:
        p = sub.add_parser(name, help=f"run the {name} calculation")
        p.add_argument("--config", type=Path, help="INI file with a [%s] section" % name)
        p.add_argument("--seed", type=int, help="64-bit RNG seed (overrides [run] seed)")
        p.add_argument("--workers", type=int, help="worker processes (overrides [run] workers)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        print(f"error: --config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.subcommand, text, args.seed, args.workers, args.out)
        meta = run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {args.subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {Path(cfg.output_path) / meta['csv']} ({meta['rows']} rows, {meta['wall_time_s']:.2f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
