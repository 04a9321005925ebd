"""Experiment runner: YAML configs in, per-seed CSVs plus aggregate JSON out.

Experiments: ``evolve`` (exact or stochastic imaginary-time evolution),
``optimize`` (ground-state search on a diagonal Hamiltonian),
``sample-error`` (estimator error vs batch size), ``regularize-compare``
(solver comparison under shared seeds), ``mitigate`` (readout + folding
error mitigation), and ``resources`` (measurement-count comparison).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from . import evolve as evolve_mod
from .backend import NoiseModel, Rng
from .circuits import Circuit, bind, build_hea, build_qaoa
from .evolve import (
    EvolutionConfig,
    count_measurements,
    integrated_infidelity,
    reference_taylor,
    subsample_states,
)
from .gradients import (
    SamplerConfig,
    evolution_gradient_exact,
    exact_energy_fn,
    exact_fidelity_fn,
    qgt_exact,
    sample_evolution_gradient,
    sample_qgt,
    sampled_energy_fn,
    sampled_fidelity_fn,
    sampling_error,
)
from .mitigate import CalibrationSet, ZneConfig, mitigated_energy
from .optimize import OptimizerConfig, qnspsa_minimize, saqite_minimize, spsa_minimize
from .pauli import (
    PauliSum,
    brute_force_minimum,
    build_ising_chain,
    build_ising_graph,
    build_maxcut_circle,
)

CSV_SCHEMA_VERSION = 1

EXPERIMENTS = (
    "evolve",
    "optimize",
    "sample-error",
    "regularize-compare",
    "mitigate",
    "resources",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; carries the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


def _line_of(key: str, text: str) -> int | None:
    tail = key.split(".")[-1]
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(f"{tail}:"):
            return lineno
    return None


def _require(cfg: dict, key: str, kind=None):
    node: Any = cfg
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(key, f"missing required key '{key}'")
        node = node[part]
    if kind is not None and not isinstance(node, kind):
        raise ConfigError(key, f"key '{key}' has the wrong type")
    return node


def _build_model(cfg: dict) -> PauliSum:
    kind = _require(cfg, "model.kind", str)
    model = cfg["model"]
    n = _require(cfg, "model.n", int)
    if kind == "ising_chain":
        return build_ising_chain(n, float(model["J"]), float(model["h"]))
    if kind == "ising_graph":
        edges = [tuple(e) for e in _require(cfg, "model.edges", list)]
        return build_ising_graph(edges, n, float(model["J"]), float(model["h"]))
    if kind == "maxcut_circle":
        return build_maxcut_circle(n, float(model["w1"]), float(model["w2"]))
    raise ConfigError("model.kind", f"unknown model kind {kind!r}")


def _build_ansatz(cfg: dict, h: PauliSum) -> Circuit:
    ansatz = cfg.get("ansatz", {})
    kind = ansatz.get("kind", "hea")
    if kind == "hea":
        layers = ansatz.get("layers", "auto")
        if layers == "auto":
            layers = max(1, math.ceil(math.log(h.n_qubits)))
        entangler = ansatz.get("entangler")
        if entangler is not None:
            entangler = [tuple(e) for e in entangler]
        return build_hea(h.n_qubits, int(layers), entangler)
    if kind == "qaoa":
        return build_qaoa(h, int(ansatz.get("reps", 2)))
    raise ConfigError("ansatz.kind", f"unknown ansatz kind {kind!r}")


def _build_noise(cfg: dict, n: int) -> NoiseModel | None:
    block = cfg.get("noise")
    if not block:
        return None
    return NoiseModel.uniform_readout(
        n,
        float(block.get("readout_p01", 0.0)),
        float(block.get("readout_p10", block.get("readout_p01", 0.0))),
        float(block.get("cx_pauli_error", 0.0)),
    )


def _parse_shots(value) -> int | float:
    if value in ("exact", "inf", None):
        return math.inf
    return int(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        fh.write(f"# saqite-csv schema={CSV_SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _aggregate(experiment: str, params: dict, per_seed: list[dict]) -> dict:
    keys = sorted({k for entry in per_seed for k in entry if k != "seed"})
    mean = {}
    std = {}
    for key in keys:
        values = [e[key] for e in per_seed if isinstance(e.get(key), (int, float))]
        if values and len(values) == len(per_seed):
            mean[key] = float(np.mean(values))
            std[key] = float(np.std(values))
    return {
        "experiment": experiment,
        "params": params,
        "per_seed": per_seed,
        "mean": mean,
        "std": std,
    }


# ---------------------------------------------------------------------------
# experiment bodies (one seed each; dispatched over the seed list)


def _evolution_setup(cfg: dict):
    h = _build_model(cfg)
    circuit = _build_ansatz(cfg, h)
    algo = _require(cfg, "algorithm", dict)
    shots = _parse_shots(algo.get("shots"))
    sampler = SamplerConfig(
        epsilon=algo.get("epsilon"),
        n_samples=int(algo.get("n_samples", 1)),
        shots=shots,
    )
    noise = _build_noise(cfg, h.n_qubits)
    ref_dt = float(cfg.get("reference", {}).get("delta_t", 1e-3))
    return h, circuit, algo, sampler, noise, ref_dt


def _reference_states(h: PauliSum, ref_dt: float, cfg_evo: EvolutionConfig):
    psi0 = np.zeros(1 << h.n_qubits, dtype=complex)
    psi0[0] = 1.0
    fine = reference_taylor(h, psi0, ref_dt, cfg_evo.total_time)
    return subsample_states(fine, ref_dt, cfg_evo.delta_t, cfg_evo.n_steps)


def _run_evolve_seed(cfg: dict, seed: int, solver: str | None = None) -> dict:
    h, circuit, algo, sampler, noise, ref_dt = _evolution_setup(cfg)
    evo_cfg = EvolutionConfig(
        delta_t=float(algo.get("delta_t", 0.01)),
        total_time=float(algo.get("total_time", 1.5)),
        solver=solver or algo.get("solver", "stable_subspace"),
        delta=float(algo.get("delta", 0.05)),
        sampler=sampler,
        tau1=float(algo.get("tau1", 0.99)),
        tau2=float(algo.get("tau2", 0.7)),
        mode=algo.get("mode", "saqite"),
        seed=seed,
        noise=noise,
    )
    reference = _reference_states(h, ref_dt, evo_cfg)
    theta0 = np.asarray(algo.get("theta0", np.zeros(circuit.n_params)), dtype=float)
    driver = evolve_mod.varqite if evo_cfg.mode == "varqite" else evolve_mod.saqite
    result = driver(circuit, theta0, h, evo_cfg, reference_states=reference)
    rows = [
        (t, e, f, m)
        for t, e, f, m in zip(
            result.times,
            result.energies,
            result.fidelities_vs_reference,
            result.measurements_cumulative,
        )
    ]
    return {
        "seed": seed,
        "integrated_infidelity": integrated_infidelity(result),
        "n_total": int(result.measurements_cumulative[-1]),
        "final_energy": float(result.energies[-1]),
        "_rows": rows,
        "_header": ("t", "energy", "fidelity_vs_ref", "n_measurements_cumulative"),
    }


def _run_optimize_seed(cfg: dict, seed: int) -> dict:
    h = _build_model(cfg)
    circuit = _build_ansatz(cfg, h)
    opt = _require(cfg, "optimizer", dict)
    method = _require(cfg, "optimizer.method", str)
    noise = _build_noise(cfg, h.n_qubits)
    opt_cfg = OptimizerConfig(
        eta=float(opt["eta"]),
        epsilon=float(opt.get("epsilon", 1e-2)),
        shots=_parse_shots(opt.get("shots")),
        iters=int(opt.get("iters", 100)),
        n0=int(opt.get("n0", 10)),
        decay=float(opt.get("decay", 0.9)),
        tau1=float(opt.get("tau1", 0.99)),
        tau2=float(opt.get("tau2", 0.0)),
        delta=float(opt.get("delta", 100.0)),
        solver=opt.get("solver", "diag_shift"),
        seed=seed,
        noise=noise,
    )
    theta0 = np.asarray(opt.get("theta0", np.zeros(circuit.n_params)), dtype=float)
    _, optimal = brute_force_minimum(h)
    drivers = {
        "spsa": spsa_minimize,
        "qnspsa": qnspsa_minimize,
        "saqite": saqite_minimize,
    }
    if method not in drivers:
        raise ConfigError("optimizer.method", f"unknown optimizer {method!r}")
    log = drivers[method](circuit, h, theta0, opt_cfg, optimal=optimal)
    rows = [
        (k, e, p, m)
        for k, (e, p, m) in enumerate(
            zip(log.energies, log.p_optimal, log.measurements_cumulative)
        )
    ]
    reached = np.flatnonzero(log.p_optimal >= 0.01)
    return {
        "seed": seed,
        "final_energy": float(log.energies[-1]),
        "final_p_optimal": float(log.p_optimal[-1]),
        "n_total": int(log.measurements_cumulative[-1]),
        "measurements_to_1pct": (
            int(log.measurements_cumulative[reached[0]]) if reached.size else None
        ),
        "_rows": rows,
        "_header": ("iter", "energy", "p_optimal", "n_measurements_cumulative"),
    }


def _run_sample_error_seed(cfg: dict, seed: int) -> dict:
    h = _build_model(cfg)
    circuit = _build_ansatz(cfg, h)
    block = cfg.get("sampling", {})
    shots = _parse_shots(block.get("shots"))
    sampler = SamplerConfig(epsilon=block.get("epsilon"), shots=shots)
    grid = [int(x) for x in block.get("batch_sizes", [10, 100, 1000, 10000])]
    theta = np.asarray(block.get("theta", np.zeros(circuit.n_params)), dtype=float)

    g_exact = qgt_exact(circuit, theta)
    b_exact = evolution_gradient_exact(circuit, theta, h)
    if shots == math.inf:
        fid = exact_fidelity_fn(circuit)
        en = exact_energy_fn(circuit, h)
    else:
        fid = sampled_fidelity_fn(circuit, shots)
        en = sampled_energy_fn(circuit, h, shots)
    rng = Rng(seed)
    rows = []
    for j, batch in enumerate(grid):
        batch_rng = rng.child(j)
        g_mean = np.zeros_like(g_exact)
        b_mean = np.zeros_like(b_exact)
        for i in range(batch):
            child = batch_rng.child(i)
            g_mean += sample_qgt(circuit, theta, sampler, child.child(0), fid)
            b_mean += sample_evolution_gradient(
                circuit, theta, h, sampler, child.child(1), en
            )
        rows.append(
            (
                batch,
                sampling_error(g_mean / batch, g_exact),
                sampling_error(b_mean / batch, b_exact),
            )
        )
    slope_g = float(np.polyfit(np.log([r[0] for r in rows]), np.log([r[1] for r in rows]), 1)[0])
    slope_b = float(np.polyfit(np.log([r[0] for r in rows]), np.log([r[2] for r in rows]), 1)[0])
    return {
        "seed": seed,
        "slope_g": slope_g,
        "slope_b": slope_b,
        "err_g_last": rows[-1][1],
        "err_b_last": rows[-1][2],
        "_rows": rows,
        "_header": ("N", "err_g", "err_b"),
    }


def _run_regularize_seed(cfg: dict, seed: int) -> dict:
    out = {"seed": seed}
    rows = []
    for solver in ("stable_subspace", "diag_shift"):
        entry = _run_evolve_seed(cfg, seed, solver=solver)
        out[f"integrated_infidelity_{solver}"] = entry["integrated_infidelity"]
        rows.append((solver, entry["integrated_infidelity"], entry["n_total"]))
    out["_rows"] = rows
    out["_header"] = ("solver", "integrated_infidelity", "n_total")
    return out


def _mitigate_angles(cfg: dict, circuit: Circuit, h: PauliSum) -> np.ndarray:
    spec = cfg.get("theta", "ground_evolved")
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    if spec == "random":
        rng = Rng(int(cfg.get("theta_seed", 1234)))
        return rng.gen.uniform(-np.pi, np.pi, circuit.n_params)
    if spec == "ground_evolved":
        # short exact-tensor evolution: a low-energy, high-contrast state
        evo = EvolutionConfig(
            delta_t=0.05,
            total_time=float(cfg.get("theta_evolution_time", 1.0)),
            solver="stable_subspace",
            delta=0.05,
            sampler=SamplerConfig(shots=math.inf),
            mode="varqite",
        )
        return evolve_mod.varqite(circuit, np.zeros(circuit.n_params), h, evo).thetas[-1]
    raise ConfigError("theta", f"unknown theta spec {spec!r}")


def _run_mitigate_seed(cfg: dict, seed: int) -> dict:
    h = _build_model(cfg)
    circuit = _build_ansatz(cfg, h)
    block = cfg.get("zne", {})
    zcfg = ZneConfig(
        fold_levels=tuple(block.get("fold_levels", (1, 3, 5))),
        n_twirls=int(block.get("n_twirls", 25)),
        shots=int(block.get("shots", 1000)),
    )
    noise = _build_noise(cfg, h.n_qubits)
    if noise is None:
        raise ConfigError("noise", "mitigate experiment needs a noise block")
    bound = bind(circuit, _mitigate_angles(cfg, circuit, h))
    calib = CalibrationSet.from_noise_model(noise, h.n_qubits)
    from .backend import expectation_exact, simulate

    e_exact = expectation_exact(simulate(bound), h)
    report = mitigated_energy(bound, h, noise, zcfg, calib, Rng(seed))
    rows = list(zip(report.fold_levels, report.zeta_energies))
    return {
        "seed": seed,
        "e0": report.e0,
        "e_exact": e_exact,
        "abs_error_mitigated": abs(report.e0 - e_exact),
        "abs_error_raw": abs(report.zeta_energies[0] - e_exact),
        "fallback": report.fit.fallback,
        "_rows": rows,
        "_header": ("zeta", "energy"),
    }


def _run_resources_seed(cfg: dict, seed: int) -> dict:
    runs = _require(cfg, "runs", list)
    rows = []
    out = {"seed": seed}
    for block in runs:
        sub = dict(cfg)
        sub["model"] = block["model"]
        sub["ansatz"] = block.get("ansatz", cfg.get("ansatz", {}))
        totals = {}
        infids = {}
        for mode in ("varqite", "saqite"):
            sub_algo = dict(block[mode])
            sub_algo["mode"] = mode
            sub["algorithm"] = sub_algo
            entry = _run_evolve_seed(sub, seed)
            totals[mode] = entry["n_total"]
            infids[mode] = entry["integrated_infidelity"]
        n = block["model"]["n"]
        ratio = totals["saqite"] / totals["varqite"]
        rows.append(
            (n, totals["varqite"], totals["saqite"], ratio, infids["varqite"], infids["saqite"])
        )
        out[f"ratio_n{n}"] = ratio
        out[f"infidelity_varqite_n{n}"] = infids["varqite"]
        out[f"infidelity_saqite_n{n}"] = infids["saqite"]
    out["_rows"] = rows
    out["_header"] = (
        "n", "n_total_varqite", "n_total_saqite", "ratio",
        "infidelity_varqite", "infidelity_saqite",
    )
    return out


_RUNNERS: dict[str, Callable[[dict, int], dict]] = {
    "evolve": _run_evolve_seed,
    "optimize": _run_optimize_seed,
    "sample-error": _run_sample_error_seed,
    "regularize-compare": _run_regularize_seed,
    "mitigate": _run_mitigate_seed,
    "resources": _run_resources_seed,
}


def _validate(cfg: dict) -> None:
    experiment = _require(cfg, "experiment", str)
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}")
    seeds = _require(cfg, "seeds", list)
    if not seeds:
        raise ConfigError("seeds", "seeds list must not be empty")
    if experiment in ("evolve", "regularize-compare"):
        _build_ansatz(cfg, _build_model(cfg))
        _require(cfg, "algorithm", dict)
    elif experiment == "optimize":
        _build_ansatz(cfg, _build_model(cfg))
        _require(cfg, "optimizer.method", str)
        _require(cfg, "optimizer.eta", (int, float))
    elif experiment in ("sample-error", "mitigate"):
        _build_ansatz(cfg, _build_model(cfg))
    elif experiment == "resources":
        _require(cfg, "runs", list)


def _dispatch(cfg: dict, seeds: list[int], jobs: int) -> list[dict]:
    runner = _RUNNERS[cfg["experiment"]]
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(runner, [cfg] * len(seeds), seeds))
    return [runner(cfg, seed) for seed in seeds]


def run(
    config_path: str | Path,
    seeds: Sequence[int] | None = None,
    out_dir: str | Path | None = None,
    exact: bool = False,
    jobs: int = 1,
) -> int:
    """Execute one experiment config; returns the process exit code."""
    config_path = Path(config_path)
    try:
        text = config_path.read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"{config_path}:{mark.line + 1}: " if mark else ""
        print(f"error: {line}invalid YAML: {exc}", file=sys.stderr)
        return 2
    if not isinstance(cfg, dict):
        print(f"error: {config_path}:1: config must be a mapping", file=sys.stderr)
        return 2
    if seeds:
        cfg["seeds"] = list(seeds)
    if out_dir is not None:
        cfg["output_dir"] = str(out_dir)
    if exact:
        for block in ("algorithm", "optimizer", "sampling"):
            if block in cfg:
                cfg[block]["shots"] = "exact"
    try:
        _validate(cfg)
        seed_list = [int(s) for s in cfg["seeds"]]
        output_dir = Path(_require(cfg, "output_dir", str))
    except ConfigError as exc:
        line = _line_of(exc.key, text)
        location = f"{config_path}:{line}: " if line else f"{config_path}: "
        print(f"error: {location}{exc}", file=sys.stderr)
        return 2

    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        per_seed = _dispatch(cfg, seed_list, jobs)
        experiment = cfg["experiment"]
        for seed, entry in zip(seed_list, per_seed):
            rows = entry.pop("_rows")
            header = entry.pop("_header")
            _write_csv(output_dir / f"{experiment}_seed{seed}.csv", header, rows)
        params = {k: v for k, v in cfg.items() if k not in ("seeds", "output_dir")}
        aggregate = _aggregate(experiment, params, per_seed)
        with (output_dir / f"{experiment}_aggregate.json").open("w") as fh:
            json.dump(aggregate, fh, indent=2, sort_keys=True)
    except Exception as exc:  # runtime failure, distinct from config errors
        print(f"error: experiment failed: {exc}", file=sys.stderr)
        return 1
    return 0


def report(results_dir: str | Path) -> int:
    """Print a summary table for every aggregate JSON found in a directory."""
    results_dir = Path(results_dir)
    files = sorted(results_dir.glob("*_aggregate.json"))
    if not files:
        print(f"error: no aggregate files in {results_dir}", file=sys.stderr)
        return 1
    for path in files:
        try:
            data = json.loads(path.read_text())
            experiment = data["experiment"]
            mean = data["mean"]
            std = data["std"]
            n_seeds = len(data["per_seed"])
        except (json.JSONDecodeError, KeyError) as exc:
            print(f"error: corrupt aggregate {path}: {exc}", file=sys.stderr)
            return 1
        print(f"{experiment}  ({path.name}, {n_seeds} seed(s))")
        for key in sorted(mean):
            print(f"  {key:32s} {mean[key]:14.6g} +/- {std[key]:.3g}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="saqite", description="run desk-scale evolution/optimization experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("--config", required=True, help="path to a YAML config")
    run_p.add_argument(
        "--seed", type=int, action="append", default=None, help="override config seeds"
    )
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument(
        "--exact", action="store_true", help="force exact-probability mode"
    )
    run_p.add_argument("--jobs", type=int, default=1, help="seed worker processes")
    rep_p = sub.add_parser("report", help="summarize a results directory")
    rep_p.add_argument("results_dir")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.seed, args.out, args.exact, args.jobs)
    return report(args.results_dir)


if __name__ == "__main__":
    sys.exit(main())
