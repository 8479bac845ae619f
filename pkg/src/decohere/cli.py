"""Command-line front end: ``decohere <subcommand> [--config file.json] [--key value ...]``.

Every subcommand takes a flat key/value configuration.  Values come from
the built-in defaults, then an optional JSON config file, then flags (flags
win).  Unknown keys are rejected.  Random draws use
``numpy.random.default_rng(seed)``, i.e. the PCG64 generator, so a fixed
seed reproduces every artifact byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.  Failures print one ``key=value`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import compensation, evolution, hilbert, influence, interferometer, radical_pair, stats

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _p(type_, default, help_, choices=None):
    return {"type": type_, "default": default, "help": help_, "choices": choices}


COMMON = {
    "seed": _p(int, 0, "64-bit seed for the PCG64 generator"),
    "output": _p(str, "-", "output path ('-' for stdout)"),
    "format": _p(str, "csv", "output format", ("csv", "json")),
}

PARAMS = {
    "interfere": {
        "overlap": _p(float, 1.0, "modulus of the record overlap <E2|E1>, in [0, 1]"),
        "overlap_phase": _p(float, 0.0, "argument of <E2|E1> (rad)"),
        "env_dim": _p(int, 2, "environment dimension (>= 2)"),
        "points": _p(int, 4096, "number of screen samples"),
        "x_min": _p(float, 0.0, "screen start (fringe periods)"),
        "x_max": _p(float, 1.0, "screen end, exclusive (fringe periods)"),
    },
    "evolve": {
        "model": _p(str, "dephasing", "dynamics to integrate",
                    ("dephasing", "amplitude_damping", "closed", "spin_bath")),
        "gamma": _p(float, 1.0, "jump rate (1/time)"),
        "omega": _p(float, 0.0, "coefficient of sigma_x in the qubit Hamiltonian (rad/time)"),
        "initial": _p(str, "plus", "initial qubit state", ("zero", "one", "plus")),
        "t_max": _p(float, 5.0, "final time"),
        "steps": _p(int, 101, "number of output times including t=0"),
        "n_bath": _p(int, 4, "bath qubits for model=spin_bath"),
        "coupling_scale": _p(float, 1.0, "multiplier on the seeded spin-bath couplings"),
    },
    "qbm": {
        "family": _p(str, "ohmic", "spectral density family", ("ohmic", "supraohmic", "single_mode")),
        "s": _p(float, 3.0, "spectral exponent for family=supraohmic"),
        "eta": _p(float, 1.0, "coupling strength"),
        "cutoff": _p(float, 1.0, "exponential cutoff frequency (rad/time)"),
        "mode_freq": _p(float, 1.0, "mode frequency for family=single_mode (rad/time)"),
        "temperature": _p(float, 0.0, "bath temperature (energy units, k_B = 1)"),
        "d": _p(float, 1.0, "path separation (length)"),
        "horizon": _p(float, 10.0, "window length (time)"),
        "steps": _p(int, 400, "time intervals in the window"),
    },
    "dfs": {
        "noise": _p(str, "collective_z", "interaction set",
                    ("collective_z", "local_z", "collective_xyz")),
        "n_qubits": _p(int, 2, "register size (<= 8)"),
        "tol": _p(float, compensation.DEGENERACY_TOL, "eigenvalue clustering tolerance"),
    },
    "qec": {
        "code": _p(str, "bitflip", "code", tuple(compensation.CODES)),
        "axis": _p(str, "", "error rotation axis x|y|z; empty picks x for bitflip, z for phaseflip, y for shor"),
        "qubit": _p(int, 0, "physical qubit hit by the error"),
        "theta_max": _p(float, 180.0, "largest rotation angle (degrees)"),
        "steps": _p(int, 37, "number of angles from 0 to theta_max"),
    },
    "rp": {
        "sweep": _p(str, "frequency", "swept parameter", ("frequency", "angle", "none")),
        "a_iso": _p(float, 0.5, "isotropic hyperfine constant (mT)"),
        "a_axial": _p(float, 0.0, "axial hyperfine anisotropy (mT)"),
        "b": _p(float, 50.0, "static field strength (uT), along z unless sweep=angle"),
        "rf_amplitude": _p(float, 1.0, "RF field amplitude (uT)"),
        "rf_axis": _p(str, "x", "RF field direction", ("x", "y", "z")),
        "k_s": _p(float, 1e5, "singlet recombination rate (1/s)"),
        "k_t": _p(float, 1e5, "triplet recombination rate (1/s)"),
        "f_min": _p(float, 0.5e6, "lowest RF frequency (Hz)"),
        "f_max": _p(float, 3.0e6, "highest RF frequency (Hz)"),
        "f_steps": _p(int, 26, "number of RF frequencies"),
        "angle_steps": _p(int, 19, "number of field angles from 0 to pi"),
    },
    "stats": {
        "input": _p(str, None, "trial CSV with header run_id,group,cell_count,caspase_per_cell"),
        "table": _p(bool, False, "also print a human-readable table on stderr"),
    },
}


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    seed: int = 0
    output_path: str = "-"
    format: str = "csv"
    extra: dict = field(default_factory=dict)


def _coerce(key: str, spec: dict, value):
    t = spec["type"]
    try:
        if t is bool:
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                value = value.lower() in ("true", "1", "yes")
            value = bool(value)
        elif t is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            value = int(value)
        elif t is float:
            value = float(value)
        else:
            value = str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r} for {key} (expected {t.__name__})", key) from None
    if spec["choices"] and value not in spec["choices"]:
        raise ConfigError(f"{key} must be one of {', '.join(spec['choices'])}", key)
    return value


def resolve(subcommand: str, file_values: dict, flag_values: dict) -> RunConfig:
    if subcommand not in PARAMS:
        raise ConfigError(f"unknown subcommand {subcommand!r}", "subcommand")
    schema = {**COMMON, **PARAMS[subcommand]}
    merged = {k: v["default"] for k, v in schema.items()}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if key == "subcommand":
                if value != subcommand:
                    raise ConfigError(f"config is for {value!r}, not {subcommand!r}", key)
                continue
            if key not in schema:
                raise ConfigError(f"unknown key {key!r}", key)
            merged[key] = _coerce(key, schema[key], value)
    params = {k: merged[k] for k in PARAMS[subcommand]}
    return RunConfig(subcommand, params, merged["seed"], merged["output"], merged["format"])


SUMMARY = {
    "interfere": "two-path screen pattern and fringe visibility",
    "evolve": "qubit trajectory under a Lindblad or spin-bath model",
    "qbm": "decoherence exponent gamma(t) for a bath spectral density",
    "dfs": "decoherence-free subspaces of a noise model",
    "qec": "coherent error-correction fidelity versus error angle",
    "rp": "radical-pair singlet-yield RF or orientation sweep",
    "stats": "paired one-tailed t-tests on a trial file",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decohere", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", metavar="subcommand")
    for name, schema in PARAMS.items():
        sp = subs.add_parser(name, help=SUMMARY[name],
                             formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sp.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of key/value settings")
        for key, spec in {**COMMON, **schema}.items():
            extra = {"nargs": "?", "const": "true"} if spec["type"] is bool else {}
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS,
                            metavar=spec["type"].__name__.upper(), **extra,
                            help=f"{spec['help']} (default: {spec['default']})")
    return parser


# --- subcommand bodies -------------------------------------------------------

def _qubit_state(label: str) -> hilbert.DensityOperator:
    vec = {"zero": [1, 0], "one": [0, 1], "plus": [1, 1]}[label]
    return hilbert.StateVector.normalized(vec).density()


def run_interfere(cfg: RunConfig, rng) -> str:
    p = cfg.params
    if not 0.0 <= p["overlap"] <= 1.0:
        raise ConfigError("overlap must lie in [0, 1]", "overlap")
    if p["env_dim"] < 2 or p["points"] < 2:
        raise ConfigError("env_dim and points must be >= 2", "env_dim" if p["env_dim"] < 2 else "points")
    e1, e2 = interferometer.records_with_overlap(p["overlap"] * np.exp(1j * p["overlap_phase"]), p["env_dim"])
    # a seeded change of environment basis; overlaps are invariant under it
    u = hilbert.random_unitary(p["env_dim"], rng)
    state = interferometer.TwoPathState.equal_split(u.apply(e1), u.apply(e2))
    xs = np.linspace(p["x_min"], p["x_max"], p["points"], endpoint=False)
    prof = interferometer.screen_intensity(state, xs)
    vis = interferometer.visibility(prof)
    if cfg.format == "json":
        return json.dumps({"x": prof.xs.tolist(), "intensity": prof.intensities.tolist(),
                           "visibility": vis, "overlap": [state.overlap.real, state.overlap.imag]})
    lines = ["x,intensity,visibility"]
    lines += [f"{x!r},{i!r},{vis!r}" for x, i in zip(prof.xs.tolist(), prof.intensities.tolist())]
    return "\n".join(lines) + "\n"


def run_evolve(cfg: RunConfig, rng) -> str:
    p = cfg.params
    if p["steps"] < 2:
        raise ConfigError("steps must be >= 2", "steps")
    times = np.linspace(0.0, p["t_max"], p["steps"])
    rho0 = _qubit_state(p["initial"])
    h = hilbert.Operator(p["omega"] * hilbert.SIGMA_X)
    if p["model"] == "closed":
        traj = evolution.evolve_closed(h, rho0, times)
    elif p["model"] == "spin_bath":
        if not 1 <= p["n_bath"] <= 10:
            raise ConfigError("n_bath must be between 1 and 10", "n_bath")
        joint = evolution.spin_bath_model(p["n_bath"], seed=cfg.seed, scale=p["coupling_scale"])
        traj = evolution.evolve_joint_trace(joint, rho0, times)
    else:
        jump = hilbert.SIGMA_Z if p["model"] == "dephasing" else hilbert.SIGMA_MINUS
        if p["gamma"] < 0:
            raise ConfigError("gamma must be non-negative", "gamma")
        model = evolution.LindbladModel(h, [(hilbert.Operator(jump), p["gamma"])])
        traj = evolution.evolve_lindblad(model, rho0, times)
    if cfg.format == "json":
        return json.dumps({"t": traj.times.tolist(),
                           "states": [[[z.real, z.imag] for z in m.reshape(-1)] for m in traj.matrices]})
    return traj.to_csv()


def run_qbm(cfg: RunConfig, rng) -> str:
    p = cfg.params
    try:
        J = influence.SpectralDensity(p["family"], 1.0 if p["family"] == "ohmic" else p["s"], p["eta"],
                                      p["cutoff"], p["mode_freq"], p["temperature"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if p["steps"] < 1 or p["horizon"] <= 0:
        raise ConfigError("need steps >= 1 and horizon > 0", "steps" if p["steps"] < 1 else "horizon")
    curve = influence.decoherence_exponent_curve(J, p["d"], p["horizon"], p["steps"])
    if cfg.format == "json":
        return json.dumps({"t": curve.t.tolist(), "gamma": curve.gamma.tolist(), "phi": curve.phi.tolist()})
    return curve.to_csv()


def _interaction_set(noise: str, n: int) -> compensation.InteractionSet:
    dims = (2,) * n
    if noise == "collective_z":
        return compensation.collective_dephasing(n)
    if noise == "local_z":
        return compensation.InteractionSet([hilbert.embed(hilbert.SIGMA_Z, k, dims) for k in range(n)])
    ops = []
    for pauli in (hilbert.SIGMA_X, hilbert.SIGMA_Y, hilbert.SIGMA_Z):
        total = hilbert.embed(pauli, 0, dims)
        for k in range(1, n):
            total = total + hilbert.embed(pauli, k, dims)
        ops.append(total)
    return compensation.InteractionSet(ops)


def run_dfs(cfg: RunConfig, rng) -> str:
    p = cfg.params
    if not 1 <= p["n_qubits"] <= 8:
        raise ConfigError("n_qubits must be between 1 and 8", "n_qubits")
    bases = compensation.find_dfs(_interaction_set(p["noise"], p["n_qubits"]), p["tol"])
    if cfg.format == "csv":
        lines = ["subspace,labels,vector,index,re,im"]
        for k, b in enumerate(bases):
            labels = " ".join(repr(float(x)) for x in b.labels)
            for j, v in enumerate(b.vectors):
                for i, z in enumerate(v.amplitudes.tolist()):
                    if z != 0:
                        lines.append(f"{k},{labels},{j},{i},{z.real!r},{z.imag!r}")
        return "\n".join(lines) + "\n"
    payload = [{"dim": b.dim, "labels": [float(x) for x in b.labels],
                "vectors": [json.loads(hilbert.to_json(v)) for v in b.vectors]} for b in bases]
    return json.dumps({"noise": p["noise"], "n_qubits": p["n_qubits"], "subspaces": payload}, indent=1)


def run_qec(cfg: RunConfig, rng) -> str:
    p = cfg.params
    axis = p["axis"] or {"bitflip": "x", "phaseflip": "z", "shor": "y"}[p["code"]]
    if axis not in ("x", "y", "z"):
        raise ConfigError("axis must be x, y or z", "axis")
    n_phys = compensation.CODES[p["code"]][0]().n_physical
    if not 0 <= p["qubit"] < n_phys:
        raise ConfigError(f"qubit must be in [0, {n_phys})", "qubit")
    if p["steps"] < 1:
        raise ConfigError("steps must be >= 1", "steps")
    thetas = np.linspace(0.0, p["theta_max"], p["steps"])
    logical = hilbert.random_state((2,), rng)
    fids = compensation.fidelity_sweep(p["code"], axis, thetas, p["qubit"], logical)
    if cfg.format == "json":
        return json.dumps({"theta_deg": thetas.tolist(), "fidelity": fids.tolist()})
    lines = ["theta_deg,fidelity"] + [f"{t!r},{f!r}" for t, f in zip(thetas.tolist(), fids.tolist())]
    return "\n".join(lines) + "\n"


def run_rp(cfg: RunConfig, rng) -> str:
    p = cfg.params
    axis = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}[p["rf_axis"]]
    try:
        model = radical_pair.RadicalPairModel(p["a_iso"], p["a_axial"], (0.0, 0.0, p["b"]),
                                              p["rf_amplitude"], 1.0, axis, p["k_s"], p["k_t"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if p["sweep"] == "frequency":
        if p["f_steps"] < 1:
            raise ConfigError("f_steps must be >= 1", "f_steps")
        sweep = radical_pair.rf_disruption_scan(model, np.linspace(p["f_min"], p["f_max"], p["f_steps"]))
    elif p["sweep"] == "angle":
        sweep = radical_pair.orientation_sweep(
            radical_pair.replace(model, rf_amplitude=0.0), np.linspace(0.0, np.pi, p["angle_steps"]))
    else:
        y = radical_pair.singlet_yield(radical_pair.replace(model, rf_amplitude=0.0))
        sweep = radical_pair.Sweep(np.array([0.0]), np.array([y.singlet_yield]))
    if cfg.format == "json":
        return json.dumps({"param": sweep.param.tolist(), "yield": sweep.yields.tolist(),
                           "baseline": sweep.baseline})
    return sweep.to_csv()


def run_stats(cfg: RunConfig, rng) -> str:
    p = cfg.params
    if not p["input"]:
        raise ConfigError("stats needs --input", "input")
    records = stats.load_trials(p["input"])
    report = stats.protocol_report(records)
    if p["table"]:
        print(report.table(), file=sys.stderr)
    return report.to_json() if cfg.format == "json" else report.to_csv()


RUNNERS = {
    "interfere": run_interfere, "evolve": run_evolve, "qbm": run_qbm, "dfs": run_dfs,
    "qec": run_qec, "rp": run_rp, "stats": run_stats,
}


def run(cfg: RunConfig) -> str:
    """Execute a resolved configuration and return the primary artifact text."""
    rng = np.random.default_rng(cfg.seed)
    return RUNNERS[cfg.subcommand](cfg, rng)


def _fail(code: int, kind: str, message: str, key: str | None = None) -> int:
    parts = [f"error code={code}", f"kind={kind}"]
    if key:
        parts.append(f"key={key}")
    parts.append("message=" + json.dumps(str(message).replace("\n", " ")))
    print(" ".join(parts), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in PARAMS and not argv[0].startswith("-"):
        if argv:
            return _fail(EXIT_CONFIG, "config", f"unknown subcommand {argv[0]!r}", "subcommand")
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        ns, unknown = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if unknown:
        key = unknown[0].lstrip("-").replace("-", "_")
        return _fail(EXIT_CONFIG, "config", f"unknown argument {unknown[0]!r}", key)
    flags = vars(ns)
    sub = flags.pop("subcommand")
    config_path = flags.pop("config", None)
    file_values = {}
    try:
        if config_path is not None:
            try:
                file_values = json.loads(Path(config_path).read_text())
            except OSError as exc:
                return _fail(EXIT_IO, "io", f"{config_path}: {exc.strerror}", "config")
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{config_path}: not valid JSON ({exc.msg})", "config") from None
            if not isinstance(file_values, dict):
                raise ConfigError(f"{config_path}: top level must be an object", "config")
        cfg = resolve(sub, file_values, flags)
        text = run(cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.key)
    except (stats.TrialFormatError, stats.MissingArmError) as exc:
        return _fail(EXIT_CONFIG, "input", str(exc), "input")
    except OSError as exc:
        name = getattr(exc, "filename", None) or ""
        return _fail(EXIT_IO, "io", f"{name}: {exc.strerror or exc}")
    except (evolution.IntegrationError, radical_pair.HorizonTooShort, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, "numeric", str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    try:
        if cfg.output_path == "-":
            sys.stdout.write(text)
        else:
            Path(cfg.output_path).write_text(text)
    except OSError as exc:
        return _fail(EXIT_IO, "io", f"{cfg.output_path}: {exc.strerror or exc}", "output")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
