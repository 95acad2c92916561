"""Command-line front end: ``transitlab <command> [options]``.

Commands: sample, converge, laplace, spectrum, density, constants, validate.

Settings come from built-in defaults, then an optional JSON config file
(``--config``), then command-line flags.  The resolved settings are checked
against the command's schema before any computation and are echoed, with a
hash, in the provenance header of every output file.

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 for invalid settings, 3 when a computation raises.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

CONFIG_VERSION = 1

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------

# command -> {key: (type, default)}; a default of None means "derived" or "optional"
SCHEMAS: dict[str, dict[str, tuple[type, object]]] = {
    "sample": {"d": (int, 3), "mu": (float, 0.0), "n": (int, 10_000), "seed": (int, 0),
               "scheme": (str, "direct_sde"), "family": (str, None), "eps": (float, None),
               "x0": (float, None), "a": (float, None), "out": (str, None)},
    "converge": {"family": (str, "sine"), "mu": (float, 0.0), "eps": (list, [0.2, 0.1, 0.05]),
                 "n": (int, 20_000), "n_limit": (int, 200_000), "seed": (int, 0), "out": (str, None)},
    "laplace": {"d": (int, 3), "mu": (float, 0.0), "lambda": (list, [-1.0, -0.5, -0.1, 0.0]),
                "tol": (float, 1e-8), "out": (str, None)},
    "spectrum": {"d": (int, 3), "mu": (float, 0.0), "tol": (float, 1e-12), "oracle_tol": (float, 1e-6),
                 "out": (str, None)},
    "density": {"d": (int, 3), "mu": (float, 0.0), "tol": (float, 1e-12), "t_max": (float, None),
                "out": (str, None)},
    "constants": {"d": (int, 3), "mu": (float, 0.0), "out": (str, None)},
    "validate": {"criteria": (list, None), "seed": (int, 7), "n_moments": (int, 500_000),
                 "n_mgf": (int, 100_000), "n_eps": (int, 20_000), "constant_offsets": (dict, {}),
                 "out": (str, None)},
}

_FLOAT_LISTS = {"eps", "lambda"}


def _coerce(command: str, key: str, value):
    kind, _ = SCHEMAS[command][key]
    if value is None:
        return None
    try:
        if kind is list:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return [float(v) for v in value] if key in _FLOAT_LISTS else [str(v) for v in value]
        if kind is dict:
            if not isinstance(value, dict):
                raise TypeError
            return {str(k): float(v) for k, v in value.items()}
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise TypeError
            return int(value)
        if kind is float:
            out = float(value)
            if not math.isfinite(out):
                raise TypeError
            return out
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{command}.{key}: cannot read {value!r} as {kind.__name__}") from None


def resolve_settings(command: str, file_values: dict | None, flag_values: dict) -> dict:
    """Defaults, overridden by the config file, overridden by flags; then validated."""
    schema = SCHEMAS[command]
    settings = {k: default for k, (_, default) in schema.items()}
    if file_values:
        version = file_values.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"config version {version!r} is not supported (expected {CONFIG_VERSION})")
        block = file_values.get(command, {})
        if not isinstance(block, dict):
            raise ConfigError(f"config section {command!r} must be an object")
        unknown = set(block) - set(schema)
        if unknown:
            raise ConfigError(f"unknown keys in config section {command!r}: {sorted(unknown)}")
        settings.update(block)
    for key, value in flag_values.items():
        if value is not None and key in schema:
            settings[key] = value
    settings = {k: _coerce(command, k, v) for k, v in settings.items()}
    _check_ranges(command, settings)
    return settings


def _check_ranges(command: str, s: dict) -> None:
    if "d" in s and s["d"] not in (3, 4):
        raise ConfigError("d must be 3 or 4")
    for key in ("n", "n_limit", "n_moments", "n_mgf", "n_eps"):
        if key in s and s[key] is not None and s[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if command == "sample" and (s["family"] is None) != (s["eps"] is None):
        raise ConfigError("sample: --family and --eps go together")
    if command == "converge":
        if len(s["eps"]) < 2:
            raise ConfigError("converge needs at least two eps values")
        if any(e <= 0 for e in s["eps"]):
            raise ConfigError("eps values must be positive")
    if command == "laplace" and not s["lambda"]:
        raise ConfigError("laplace needs at least one lambda")
    for key in ("tol", "oracle_tol"):
        if key in s and s[key] is not None and s[key] <= 0:
            raise ConfigError(f"{key} must be positive")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _git_revision() -> str:
    try:
        here = Path(__file__).resolve().parent
        rev = subprocess.run(["git", "rev-parse", "HEAD"], cwd=here, capture_output=True, text=True, timeout=5)
        return rev.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _finite(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_finite(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def provenance(command: str, settings: dict, tolerances: dict) -> dict:
    from . import __version__

    # the output location is not part of the experiment, so two runs writing to
    # different files still produce identical reports
    settings = {k: v for k, v in settings.items() if k != "out"}
    canonical = json.dumps(_finite(settings), sort_keys=True, separators=(",", ":"))
    return {
        "command": command,
        "package_version": __version__,
        "git_revision": _git_revision(),
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "config": settings,
        "seed": settings.get("seed"),
        "tolerances": tolerances,
    }


def write_atomic(path: str | None, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename; stdout when no path."""
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(prov: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    for line in dumps_json(prov).splitlines():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def json_text(prov: dict, body: dict) -> str:
    return dumps_json({"provenance": prov, **body})


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_sample(s: dict) -> int:
    from .finite_eps_sim import StepPolicy, batch_transits, builtin_family
    from .limit_sampler import LimitSampleConfig, batch_T
    from .potentials import ModelSpec

    model = ModelSpec(s["d"], s["mu"])
    if s["family"] is not None:
        family = builtin_family(s["family"], model)
        policy = StepPolicy()
        prov = provenance("sample", s, {"step_base": policy.base, "step_curvature": policy.curvature,
                                        "step_move": policy.move})
        samples = batch_transits(family, s["eps"], s["x0"], s["a"], n=s["n"], base_seed=s["seed"],
                                 step_policy=policy)
        header = ["tau_raw", "tau_rescaled", "epsilon", "x0", "a", "seed", "exited_left"]
        rows = ((x.tau_raw, x.tau_rescaled, x.epsilon, x.x0, x.a, x.seed, x.exited_left) for x in samples)
        values = np.array([x.tau_rescaled for x in samples if not x.exited_left])
    else:
        cfg = LimitSampleConfig(model, scheme=s["scheme"])
        prov = provenance("sample", s, {"step": cfg.step, "accuracy": cfg.accuracy, "y_cut": cfg.cutoff,
                                        "start": cfg.start})
        samples = batch_T(cfg, s["n"], s["seed"])
        header = ["value", "scheme", "seed", "steps", "boundary_correction"]
        rows = ((x.value, x.scheme, x.seed, x.steps, x.boundary_correction) for x in samples)
        values = np.array([x.value for x in samples])
    text = csv_text(prov, header, rows)
    write_atomic(s["out"], text)
    summary = {"n": int(values.size), "mean": float(values.mean()),
               "sd": float(values.std(ddof=1)) if values.size > 1 else float("nan")}
    if s["out"] is not None:
        sys.stdout.write(dumps_json(summary))
    return EXIT_OK


def cmd_converge(s: dict) -> int:
    from .finite_eps_sim import batch_transits, builtin_family
    from .limit_sampler import LimitSampleConfig, batch_T
    from .potentials import ModelSpec
    from .stats import ks_two_sample

    d = 3 if s["family"].startswith("sine") or s["family"] == "cubic" else 4
    model = ModelSpec(d, s["mu"])
    family = builtin_family(s["family"], model)
    ref = batch_T(LimitSampleConfig(model), s["n_limit"], s["seed"] + 1, as_array=True)
    rows = []
    for eps in sorted(s["eps"], reverse=True):
        tau, left, _ = batch_transits(family, eps, n=s["n"], base_seed=s["seed"], as_arrays=True)
        kept = tau[~left]
        if kept.size < 0.5 * s["n"]:
            raise RuntimeError(f"only {kept.size} of {s['n']} transits reached a at eps={eps}")
        ks = ks_two_sample(kept, ref)
        rows.append({"eps": eps, "ks": ks.to_dict(), "left_fraction": float(left.mean()),
                     "mean_rescaled": float(kept.mean())})
    ks_vals = [r["ks"]["statistic"] for r in rows]
    lefts = [r["left_fraction"] for r in rows]
    ks_ok = all(a >= b for a, b in zip(ks_vals, ks_vals[1:]))
    left_ok = all(a >= b for a, b in zip(lefts, lefts[1:])) if model.odd else True
    report = {"family": s["family"], "d": d, "mu": s["mu"], "rows": rows, "limit_reference_n": int(ref.size),
              "ks_non_increasing": ks_ok, "left_fraction_non_increasing": left_ok, "passed": ks_ok and left_ok}
    write_atomic(s["out"], json_text(provenance("converge", s, {}), report))
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def cmd_laplace(s: dict) -> int:
    from .laplace_ode import ShootControls, shoot_g
    from .potentials import ModelSpec

    model = ModelSpec(s["d"], s["mu"])
    controls = ShootControls()
    rows = []
    ok = True
    for lam in s["lambda"]:
        if lam == 0.0:
            rows.append((lam, 1.0, 0.0, 0.0, True))
            continue
        res = shoot_g(model, 2.0 * lam, controls)
        val = res.phi
        good = res.converged and res.err_estimate <= s["tol"]
        ok &= good
        rows.append((lam, val.real, val.imag, res.err_estimate, good))
    prov = provenance("laplace", s, {"h0": controls.h0, "refine": controls.refine, "tol": s["tol"]})
    write_atomic(s["out"], csv_text(prov, ["lambda", "phi_re", "phi_im", "err", "converged"], rows))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_spectrum(s: dict) -> int:
    from .acceptance import load_fd_oracle
    from .oracles import fd_eigenvalues
    from .potentials import ModelSpec
    from .spectrum import spectral_data

    model = ModelSpec(s["d"], s["mu"])
    sd = spectral_data(model, tol=s["tol"])
    oracle = load_fd_oracle().get((s["d"], s["mu"]))
    source = "committed file"
    if oracle is None:
        oracle = [float(v) for v in fd_eigenvalues(model, k=2)]
        source = "computed now"
    rel = abs(sd.eta0 - oracle[0]) / oracle[0]
    body = {"spectral": sd.to_dict(), "fd_oracle": {"eta": oracle[:2], "source": source, "eta0_rel_err": rel},
            "passed": rel <= s["oracle_tol"]}
    write_atomic(s["out"], json_text(provenance("spectrum", s, {"tol": s["tol"], "oracle_tol": s["oracle_tol"]}),
                                     body))
    return EXIT_OK if body["passed"] else EXIT_CHECK_FAILED


def cmd_density(s: dict) -> int:
    from .density import DensityControls, default_t_grid, invert
    from .potentials import ModelSpec
    from .spectrum import find_eigenvalues

    model = ModelSpec(s["d"], s["mu"])
    lam0 = 0.5 * find_eigenvalues(model, 1, tol=1e-10)[0]
    controls = DensityControls(trunc_tol=s["tol"], lambda0=lam0)
    grid = default_t_grid(model, lam0)
    if s["t_max"] is not None:
        grid = grid[grid <= s["t_max"]]
    tab = invert(model, grid, controls)
    prov = provenance("density", s, {"trunc_tol": s["tol"], "s_step": tab.s_step, "s_max": tab.s_max})
    rows = zip(tab.t_grid, tab.f, tab.F, tab.S)
    if s["out"] is None:
        sys.stdout.write(json_text(prov, {"density": tab.to_dict()}))
        return EXIT_OK
    write_atomic(s["out"], csv_text(prov, ["t", "f", "F", "S"], rows))
    write_atomic(str(Path(s["out"]).with_suffix(".json")), json_text(prov, {"density": tab.to_dict()}))
    return EXIT_OK


def cmd_constants(s: dict) -> int:
    from .asymptotics import constants
    from .potentials import ModelSpec

    consts = constants(ModelSpec(s["d"], s["mu"]))
    body = consts.to_dict()
    body["C_2/3" if s["d"] == 4 else "C_3/4"] = consts.C23 if s["d"] == 4 else consts.C34
    body["C_1/3" if s["d"] == 4 else "C_1/4"] = consts.C13 if s["d"] == 4 else consts.C14
    write_atomic(s["out"], json_text(provenance("constants", s, {"two_way_guard": 1e-7}), {"constants": body}))
    return EXIT_OK


def cmd_validate(s: dict) -> int:
    from .acceptance import ValidationContext, run_criteria

    ctx = ValidationContext(seed=s["seed"], n_moments=s["n_moments"], n_mgf=s["n_mgf"], n_eps=s["n_eps"],
                            constant_offsets=dict(s["constant_offsets"]))
    results = run_criteria(s["criteria"], ctx, log=lambda line: print(line, file=sys.stderr, flush=True))
    report = {"results": [r.to_dict() for r in results], "passed": all(r.passed for r in results),
              "bootstrap": {"method": "percentile bootstrap", "B": 1000}}
    write_atomic(s["out"], json_text(provenance("validate", s, {}), report))
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


COMMANDS = {
    "sample": cmd_sample, "converge": cmd_converge, "laplace": cmd_laplace, "spectrum": cmd_spectrum,
    "density": cmd_density, "constants": cmd_constants, "validate": cmd_validate,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transitlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, model=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output path (stdout when omitted)")
        if model:
            p.add_argument("--d", type=int)
            p.add_argument("--mu", type=float)

    p = sub.add_parser("sample", help="draws of the limit law, or finite-eps transits with --family")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scheme", choices=["direct_sde", "time_change"])
    p.add_argument("--family")
    p.add_argument("--eps", type=float)
    p.add_argument("--x0", type=float)
    p.add_argument("--a", type=float)

    p = sub.add_parser("converge", help="KS distance to the limit law over a list of eps")
    common(p, model=False)
    p.add_argument("--family")
    p.add_argument("--mu", type=float)
    p.add_argument("--eps", help="comma-separated list, e.g. 0.2,0.1,0.05")
    p.add_argument("--n", type=int)
    p.add_argument("--n-limit", dest="n_limit", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("laplace", help="the transform E[exp(lambda T)] at given lambda")
    common(p)
    p.add_argument("--lambda", dest="lambda", help="comma-separated list")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("spectrum", help="ground state, residue and eigenvalue oracle check")
    common(p)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("density", help="density table by transform inversion")
    common(p)
    p.add_argument("--tol", type=float, help="truncation tolerance of the inversion integral")

    p = sub.add_parser("constants", help="large-|lambda| constants")
    common(p)

    p = sub.add_parser("validate", help="run the acceptance checks")
    common(p, model=False)
    p.add_argument("--criteria", help="comma-separated subset, e.g. 1,3,4")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", dest="n_moments", type=int, help="draws for the moment and tail checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = None
        if args.config:
            try:
                file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(file_values, dict):
                raise ConfigError("config file must hold a JSON object")
        settings = resolve_settings(args.command, file_values, flags)
    except ConfigError as exc:
        print(f"transitlab {args.command}: invalid settings: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](settings)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"transitlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
