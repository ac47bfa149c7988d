"""Configuration-driven experiment runner.

``davydov-nh run config.toml`` executes a preset or custom experiment:
a parameter sweep of variational propagations (optionally benchmarked
against the exact reference solvers), one CSV per sweep value, plus a
manifest recording the fully resolved configuration.

Config files are TOML with sections ``model``, ``integrator``, ``sweep``,
``output`` (and ``spectrum`` for the eigenvalue-scan preset).  Unknown
keys are hard errors: silent typos in physics parameters are the dominant
failure mode, so every key is checked against a whitelist.

Exit codes: 0 success; 2 configuration error; 3 numerical failure
(partial outputs retained); 4 comparison tolerance exceeded.
"""

import argparse
import concurrent.futures
import copy
import json
import logging
import math
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__, exact, kernels, models, tdvp
from .errors import ConfigError, DavydovError

log = logging.getLogger("davydov_nh")

SWEEP_HALF_WINDOW = 15.0 * math.sqrt(2.0)  # |vt/2| >= 10 delta at the endpoints

PRESETS = {
    # dense eigenvalue scan of the swept two-level system plus one mode
    "nlz-spectrum": {
        "model": {
            "kind": "nlz", "sweep_velocity": 0.5, "tunneling": 0.5, "g": 0.0,
            "bath_frequencies": [10.0], "bath_couplings": [0.2],
        },
        "integrator": {"t_start": -10.0, "t_end": 10.0, "dt": 1.0},
        "spectrum": {"t_step": 0.05, "n_max": 20},
        "sweep": {"parameter": "g",
                  "values": [round(0.05 * i, 2) for i in range(51)]},
        "output": {"path": "out", "compare": False, "tolerance": 1e-3},
    },
    # single-mode norm benchmark against the truncated-basis propagator
    "nlz-single-mode": {
        "model": {
            "kind": "nlz", "sweep_velocity": 0.5, "tunneling": 0.5, "g": 0.5,
            "bath_frequencies": [10.0], "bath_couplings": [0.2],
            "multiplicity": 3,
        },
        "integrator": {"dt": 0.002, "t_start": -SWEEP_HALF_WINDOW,
                       "t_end": SWEEP_HALF_WINDOW, "sample_stride": 100,
                       "seed": 0},
        "sweep": {"parameter": "g", "values": [0.5, 1.0, 1.5, 2.0, 2.5]},
        "output": {"path": "out", "compare": False, "tolerance": 1e-3},
        "comparison_n_max": 20,
    },
    # 60-mode Ohmic bath sweep of the non-Hermiticity strength
    "nlz-bath": {
        "model": {
            "kind": "nlz", "sweep_velocity": 0.5, "tunneling": 0.5, "g": 0.0,
            "ohmic_alpha": 0.002, "ohmic_cutoff": 10.0, "ohmic_n_modes": 60,
            "multiplicity": 5,
        },
        "integrator": {"dt": 0.02, "t_start": -SWEEP_HALF_WINDOW,
                       "t_end": SWEEP_HALF_WINDOW, "sample_stride": 25,
                       "seed": 0},
        "sweep": {"parameter": "g", "values": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]},
        "output": {"path": "out", "compare": False, "tolerance": 1e-3},
    },
    # lossy multimode cavity benchmarked against the closed equations
    "jc-multimode": {
        "model": {
            "kind": "jc", "omega_qubit": 1.0, "gamma": 0.01,
            "mode_frequencies": [1.0, 1.2, 1.3], "couplings": [0.2, 0.2, 0.2],
            "kappa_over_gamma": 1.0, "multiplicity": 3,
        },
        "integrator": {"dt": 0.005, "t_start": 0.0, "t_end": 200.0,
                       "sample_stride": 40, "seed": 0},
        "sweep": {"parameter": "kappa_over_gamma", "values": [1.0, 5.0]},
        "output": {"path": "out", "compare": False, "tolerance": 1e-3},
    },
    # ensemble-cavity photon decay under increasing photon loss (eV / fs)
    "htc-loss": {
        "model": {
            "kind": "htc", "omega_cavity": 1.0, "omega_qubit": 1.0,
            "omega_rabi": 0.1, "n_qubits": 10, "qubit_phonon_coupling": 0.1,
            "phonon_center": 0.1, "phonon_bandwidth": 0.5, "kappa": 0.0,
            "multiplicity": 4,
        },
        "integrator": {"dt": 0.04, "t_start": 0.0, "t_end": 300.0,
                       "sample_stride": 5, "seed": 0},
        "sweep": {"parameter": "kappa", "values": [0.0, 0.002, 0.004, 0.006]},
        "output": {"path": "out", "compare": False, "tolerance": 1e-3},
    },
}

_TOP_KEYS = {"preset", "model", "integrator", "sweep", "output", "spectrum",
             "comparison_n_max"}
_MODEL_KEYS = {
    "nlz": {"kind", "multiplicity", "sweep_velocity", "tunneling", "g",
            "bath_frequencies", "bath_couplings",
            "ohmic_alpha", "ohmic_cutoff", "ohmic_n_modes", "ohmic_omega_max"},
    "jc": {"kind", "multiplicity", "omega_qubit", "gamma", "mode_frequencies",
           "mode_decays", "couplings", "kappa_over_gamma"},
    "htc": {"kind", "multiplicity", "omega_cavity", "omega_qubit",
            "omega_rabi", "n_qubits", "qubit_phonon_coupling",
            "phonon_center", "phonon_bandwidth", "kappa"},
}
_INTEGRATOR_KEYS = {"dt", "t_start", "t_end", "svd_cutoff", "sample_stride", "seed"}
_SWEEP_KEYS = {"parameter", "values"}
_OUTPUT_KEYS = {"path", "compare", "tolerance"}
_SPECTRUM_KEYS = {"t_step", "n_max"}
_SWEEP_PARAMETERS = {
    "nlz": {"g", "multiplicity"},
    "jc": {"kappa_over_gamma", "multiplicity"},
    "htc": {"kappa", "multiplicity"},
}


def _check_keys(section: dict, allowed: set, where: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in [{where}]")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file does not parse: {exc}")


def resolve_config(user: dict) -> dict:
    """Merge preset defaults with user overrides and validate every key."""
    _check_keys(user, _TOP_KEYS, "top level")
    preset = user.get("preset", "custom")
    if preset != "custom" and preset not in PRESETS:
        raise ConfigError(
            f"unknown key value preset='{preset}' "
            f"(expected one of {sorted(PRESETS)} or 'custom')"
        )
    base = copy.deepcopy(PRESETS[preset]) if preset != "custom" else {
        "output": {"path": "out", "compare": False, "tolerance": 1e-3},
    }
    cfg = _merge(base, {k: v for k, v in user.items() if k != "preset"})
    cfg["preset"] = preset

    model = cfg.get("model")
    if not isinstance(model, dict) or "kind" not in model:
        raise ConfigError("missing key 'kind' in [model] (custom runs need a full model block)")
    kind = model["kind"]
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"unknown key value kind='{kind}' in [model]")
    _check_keys(model, _MODEL_KEYS[kind], "model")
    _check_keys(cfg.get("integrator", {}), _INTEGRATOR_KEYS, "integrator")
    _check_keys(cfg.get("output", {}), _OUTPUT_KEYS, "output")
    _check_keys(cfg.get("spectrum", {}), _SPECTRUM_KEYS, "spectrum")

    sweep = cfg.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError("missing section [sweep]")
    _check_keys(sweep, _SWEEP_KEYS, "sweep")
    if "parameter" not in sweep or "values" not in sweep:
        raise ConfigError("[sweep] needs both 'parameter' and 'values'")
    values = sweep["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError("key 'values' in [sweep] must be a non-empty list")
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
        raise ConfigError("key 'values' in [sweep] must contain finite numbers")
    if sweep["parameter"] not in _SWEEP_PARAMETERS[kind]:
        raise ConfigError(
            f"unknown key value parameter='{sweep['parameter']}' in [sweep] "
            f"(model kind '{kind}' allows {sorted(_SWEEP_PARAMETERS[kind])})"
        )

    if "spectrum" in cfg and kind != "nlz":
        raise ConfigError("[spectrum] section is only valid for nlz models")
    is_spectrum = "spectrum" in cfg
    if not is_spectrum:
        integ = cfg.get("integrator", {})
        for key in ("dt", "t_start", "t_end"):
            if key not in integ:
                raise ConfigError(f"missing key '{key}' in [integrator]")
    if cfg["output"].get("compare") and preset not in ("nlz-single-mode", "jc-multimode"):
        raise ConfigError(
            "key 'compare' in [output]: no exact reference solver exists for "
            f"preset '{preset}' (supported: nlz-single-mode, jc-multimode)"
        )
    return cfg


def build_model(cfg: dict, sweep_value=None):
    """Instantiate the model described by the resolved config, with the
    sweep parameter applied."""
    params = dict(cfg["model"])
    kind = params.pop("kind")
    multiplicity = int(params.pop("multiplicity", 1))
    name = cfg["sweep"]["parameter"]
    if sweep_value is not None:
        if name == "multiplicity":
            multiplicity = int(sweep_value)
        else:
            params[name] = sweep_value

    if kind == "nlz":
        if "ohmic_n_modes" in params:
            bath = models.discretize_ohmic_bath(
                params.pop("ohmic_alpha"), params.pop("ohmic_cutoff"),
                int(params.pop("ohmic_n_modes")), params.pop("ohmic_omega_max", None),
            )
        elif "bath_frequencies" in params:
            bath = models.BathModeTable(
                np.asarray(params.pop("bath_frequencies"), dtype=float),
                np.asarray(params.pop("bath_couplings"), dtype=float),
            )
        else:
            bath = models.BathModeTable.empty()
        model = models.NlzModel(
            sweep_velocity=params.pop("sweep_velocity"),
            tunneling=params.pop("tunneling"),
            g=params.pop("g", 0.0), bath=bath,
        )
    elif kind == "jc":
        freqs = np.asarray(params.pop("mode_frequencies"), dtype=float)
        gamma = params.pop("gamma")
        if "mode_decays" in params:
            decays = np.asarray(params.pop("mode_decays"), dtype=float)
            params.pop("kappa_over_gamma", None)
        else:
            decays = np.full(freqs.size, params.pop("kappa_over_gamma", 0.0) * gamma)
        model = models.JcModel(
            omega_qubit=params.pop("omega_qubit"), gamma=gamma,
            mode_frequencies=freqs, mode_decays=decays,
            couplings=np.asarray(params.pop("couplings"), dtype=float),
        )
    else:
        model = models.HtcModel(
            omega_cavity=params.pop("omega_cavity"),
            omega_qubit=params.pop("omega_qubit"),
            omega_rabi=params.pop("omega_rabi"),
            n_qubits=int(params.pop("n_qubits")),
            qubit_phonon_coupling=params.pop("qubit_phonon_coupling"),
            phonon_center=params.pop("phonon_center"),
            phonon_bandwidth=params.pop("phonon_bandwidth"),
            kappa=params.pop("kappa", 0.0),
        )
    if params:
        raise ConfigError(f"unused key '{sorted(params)[0]}' in [model]")
    return model, multiplicity


def integrator_config(cfg: dict) -> tdvp.IntegratorConfig:
    integ = cfg.get("integrator", {})
    try:
        return tdvp.IntegratorConfig(
            dt=float(integ["dt"]),
            t_start=float(integ["t_start"]),
            t_end=float(integ["t_end"]),
            svd_cutoff=float(integ.get("svd_cutoff", tdvp.DEFAULT_SVD_CUTOFF)),
            sample_stride=int(integ.get("sample_stride", 1)),
            seed=int(integ.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [integrator] value: {exc}")


def _fmt(x: float) -> str:
    return f"{x:.11e}"


def emit_csv(trajectory: tdvp.Trajectory, path) -> None:
    """Write the trajectory as UTF-8 CSV with 12-significant-digit values.

    Byte output is deterministic for a deterministic run.
    """
    if not len(trajectory):
        raise ValueError("refusing to write an empty trajectory")
    first = trajectory.records[0]
    ns = first.populations.size
    nb = first.mode_occupations.size
    cols = ["t", "norm"]
    cols += [f"pop_s{i+1}" for i in range(ns)]
    if first.sigma_z is not None:
        cols.append("sigma_z")
    cols += [f"n_mode_{k+1}" for k in range(nb)]
    cols.append("n_total")
    lines = [",".join(cols)]
    for rec in trajectory.records:
        row = [_fmt(rec.time), _fmt(rec.norm)]
        row += [_fmt(p) for p in rec.populations]
        if rec.sigma_z is not None:
            row.append(_fmt(rec.sigma_z))
        row += [_fmt(o) for o in rec.mode_occupations]
        row.append(_fmt(rec.total_bosons))
        lines.append(",".join(row))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trajectory CSV to {path}: {exc}") from exc


def _emit_spectrum_csv(grid: exact.SpectrumGrid, gi: int, path) -> None:
    dim = grid.eigenvalues.shape[2]
    cols = ["t", "max_imag"]
    cols += [f"re_{i+1}" for i in range(dim)]
    cols += [f"im_{i+1}" for i in range(dim)]
    lines = [",".join(cols)]
    for j, t in enumerate(grid.t_grid):
        vals = grid.eigenvalues[gi, j]
        row = [_fmt(t), _fmt(grid.max_imag[gi, j])]
        row += [_fmt(v) for v in vals.real]
        row += [_fmt(v) for v in vals.imag]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _run_value(cfg: dict, value: float, outdir: str) -> dict:
    """Worker body: one sweep value -> one CSV (+ optional comparison)."""
    t0 = time.perf_counter()
    model, multiplicity = build_model(cfg, value)
    icfg = integrator_config(cfg)
    state = tdvp.initial_state(model, multiplicity, seed=icfg.seed)
    traj = tdvp.propagate(state, model, icfg)
    name = f"run_{cfg['sweep']['parameter']}_{value:g}.csv"
    csv_path = os.path.join(outdir, name)
    emit_csv(traj, csv_path)
    out = {
        "value": value, "csv": name, "error": traj.error,
        "wall_time_s": None, "comparison": None,
    }
    if cfg["output"].get("compare") and traj.error is None:
        out["comparison"] = _compare(cfg, model, icfg, traj)
    out["wall_time_s"] = round(time.perf_counter() - t0, 3)
    return out


def _compare(cfg: dict, model, icfg, traj) -> dict:
    """Run the exact reference for this model and measure the deviation of
    the preset's comparison signal."""
    preset = cfg.get("preset")
    if preset == "nlz-single-mode":
        n_max = int(cfg.get("comparison_n_max", 20))
        ref = exact.fock_propagate(model, exact.fock_initial_state(model, n_max), icfg)
        sig = np.log10(traj.norms)
        sig_ref = np.log10(ref.norms)
        signal = "log10_norm"
    else:  # jc-multimode
        times, ce, cg = exact.jc_single_excitation_solve(
            model, icfg.t_end, icfg.dt, icfg.sample_stride)
        sig = traj.populations[:, 0] / traj.norms
        sig_ref = exact.jc_population(ce, cg)
        signal = "normalized_upper_population"
    n = min(sig.size, sig_ref.size)
    dev = np.abs(sig[:n] - sig_ref[:n])
    tol = float(cfg["output"].get("tolerance", 1e-3))
    return {
        "signal": signal,
        "max_abs_deviation": float(dev.max()),
        "rms_deviation": float(np.sqrt(np.mean(dev**2))),
        "tolerance": tol,
        "passed": bool(dev.max() < tol),
    }


def _run_spectrum(cfg: dict, outdir: str) -> list:
    spec = cfg.get("spectrum", {})
    integ = cfg.get("integrator", {})
    t_step = float(spec.get("t_step", 0.05))
    n_max = int(spec.get("n_max", 20))
    t_grid = np.arange(float(integ["t_start"]), float(integ["t_end"]) + 0.5 * t_step, t_step)
    g_values = [float(v) for v in cfg["sweep"]["values"]]
    model, _ = build_model(cfg, None)
    t0 = time.perf_counter()
    grid = exact.spectrum_scan(model, t_grid, np.array(g_values), n_max)
    runs = []
    for i, g in enumerate(g_values):
        name = f"spectrum_g_{g:g}.csv"
        _emit_spectrum_csv(grid, i, os.path.join(outdir, name))
        runs.append({"value": g, "csv": name, "error": None,
                     "max_imag": float(grid.max_imag[i].max())})
    summary = ["g,max_imag"]
    for i, g in enumerate(g_values):
        summary.append(f"{_fmt(g)},{_fmt(grid.max_imag[i].max())}")
    with open(os.path.join(outdir, "spectrum_summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary) + "\n")
    wall = time.perf_counter() - t0
    for r in runs:
        r["wall_time_s"] = round(wall / len(runs), 3)
    return runs


def run(config_path: str, jobs: int | None = None, out_dir: str | None = None,
        compare: bool | None = None, tolerance: float | None = None,
        seed: int | None = None) -> int:
    """Execute a config file; returns the process exit code."""
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(load_config(config_path))
        if out_dir is not None:
            cfg.setdefault("output", {})["path"] = out_dir
        if compare:
            cfg["output"]["compare"] = True
        if tolerance is not None:
            cfg["output"]["tolerance"] = tolerance
        if seed is not None:
            cfg.setdefault("integrator", {})["seed"] = seed
        cfg = resolve_config(cfg)  # re-validate after flag overrides
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    outdir = cfg["output"]["path"]
    os.makedirs(outdir, exist_ok=True)
    values = cfg["sweep"]["values"]
    if jobs is None:
        jobs = os.cpu_count() or 1
    jobs = max(1, min(int(jobs), len(values)))

    log.info("preset=%s sweep over %s: %s (jobs=%d)",
             cfg["preset"], cfg["sweep"]["parameter"], values, jobs)

    try:
        if "spectrum" in cfg:
            runs = _run_spectrum(cfg, outdir)
        elif jobs == 1:
            runs = [_run_value(cfg, v, outdir) for v in values]
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = [pool.submit(_run_value, cfg, v, outdir) for v in values]
                runs = [f.result() for f in futs]
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DavydovError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    manifest = {
        "version": __version__,
        "kernel_backend": kernels.backend_name(),
        "preset": cfg["preset"],
        "resolved_config": {k: v for k, v in cfg.items() if k != "preset"},
        "seed": cfg.get("integrator", {}).get("seed", 0),
        "jobs": jobs,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "runs": runs,
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    failures = [r for r in runs if r.get("error")]
    comparisons = [r["comparison"] for r in runs if r.get("comparison")]
    if comparisons:
        report = {
            "tolerance": float(cfg["output"].get("tolerance", 1e-3)),
            "passed": all(c["passed"] for c in comparisons),
            "runs": [
                {"value": r["value"], **r["comparison"], "wall_time_s": r["wall_time_s"]}
                for r in runs if r.get("comparison")
            ],
        }
        with open(os.path.join(outdir, "comparison.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")

    if failures:
        for r in failures:
            print(f"numerical failure at {cfg['sweep']['parameter']}={r['value']}: "
                  f"{r['error']} (partial output in {r['csv']})", file=sys.stderr)
        return 3
    if comparisons and not all(c["passed"] for c in comparisons):
        worst = max(c["max_abs_deviation"] for c in comparisons)
        print(f"comparison tolerance exceeded: worst deviation {worst:.3e}",
              file=sys.stderr)
        return 4
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="davydov-nh",
        description="Variational coherent-state dynamics for non-Hermitian systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute an experiment config (TOML)")
    runp.add_argument("config", help="path to the config file")
    runp.add_argument("--jobs", type=int, default=None,
                      help="worker processes for the sweep (default: CPU count)")
    runp.add_argument("--out", default=None, help="output directory override")
    runp.add_argument("--compare", action="store_true",
                      help="also run the exact reference and report deviations")
    runp.add_argument("--tolerance", type=float, default=None,
                      help="comparison tolerance override")
    runp.add_argument("--seed", type=int, default=None, help="RNG seed override")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=os.environ.get("DAVYDOV_NH_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    return run(args.config, jobs=args.jobs, out_dir=args.out,
               compare=args.compare, tolerance=args.tolerance, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
