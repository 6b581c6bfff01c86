"""Command line front end: ``saddlekit profile|solve|stability [--config path] [--key value ...]``.

Configuration is a flat ``key = value`` file (``#`` starts a comment);
``--key value`` options override it. Exit codes: 0 success, 2 unconverged
iteration, 3 configuration or geometry error, 1 anything else (including
failed diagnostics).
"""

from __future__ import annotations

import os
import sys

_threads = os.environ.get("SADDLEKIT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import csv  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import math  # noqa: E402
from dataclasses import dataclass, field  # noqa: E402
from fractions import Fraction  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import diagnostics as dg  # noqa: E402
from . import stability as stab  # noqa: E402
from .nonlinearity import builtin, validate  # noqa: E402
from .profile1d import build_profile, dissipation_integral  # noqa: E402
from .solver import GridError, SaddleField, solve_saddle  # noqa: E402

log = logging.getLogger("saddlekit")

EXIT_OK, EXIT_OTHER, EXIT_UNCONVERGED, EXIT_CONFIG = 0, 1, 2, 3
COMMANDS = ("profile", "solve", "stability")


class ConfigError(ValueError):
    pass


def _number(text: str) -> float:
    """Parse '0.125', '1/8' or '1e-10'."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _number_list(text: str) -> list[float]:
    text = text.strip()
    if text.lower() == "auto":
        return []
    return [_number(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _word_list(text: str) -> list[str]:
    return [x.strip() for x in text.replace(";", ",").split(",") if x.strip()]


@dataclass
class RunConfig:
    nonlinearity: str = "allen_cahn"
    m: int = 2
    R: float = 12.0
    h: float = 1.0 / 16
    tol: float = 1e-10
    k_max: int = 500
    commands: list = field(default_factory=list)
    output_dir: str = "saddlekit_out"
    seed: int = 0
    envelope: str = "continuous"
    tau_max: float = 8.0
    nodes: int = 1025
    a_list: list = field(default_factory=list)      # empty: fitted to the grid
    eta: list = field(default_factory=lambda: [0.1, 10.0, 1.75])
    trials: int = 20
    family_count: int = 3

    def validate(self) -> None:
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        if not (self.R > 0 and self.h > 0):
            raise ConfigError("R and h must be positive")
        ratio = self.R / self.h
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"h={self.h} does not divide R={self.R}")
        if len(self.eta) != 3:
            raise ConfigError("eta takes three numbers: rho1, rho2, alpha")
        for c in self.commands:
            if c not in COMMANDS:
                raise ConfigError(f"unknown command {c!r}; choose from {', '.join(COMMANDS)}")


PARSERS = {
    "nonlinearity": str.strip, "m": _int, "R": _number, "h": _number, "tol": _number,
    "k_max": _int, "commands": _word_list, "output_dir": str.strip, "seed": _int,
    "envelope": str.strip, "tau_max": _number, "nodes": _int, "a_list": _number_list,
    "eta": _number_list, "trials": _int, "family_count": _int,
}


def read_config_file(path: str | Path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        values[key] = val
    return values


def build_config(file_values: dict, overrides: dict, commands: list[str]) -> RunConfig:
    merged = {**file_values, **overrides}
    cfg = RunConfig()
    for key, text in merged.items():
        if key not in PARSERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        setattr(cfg, key, PARSERS[key](text))
    if commands:
        cfg.commands = list(commands)
    if not cfg.commands:
        raise ConfigError("no command given")
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- outputs

def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else "nan"


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")


def write_field_csv(field_: SaddleField, path: Path) -> None:
    """Columns s,t,u for every triangle node, row-major in (i, j); sidecar JSON alongside."""
    g = field_.grid
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "t", "u"])
        for i in range(g.n + 1):
            for j in range(i + 1):
                w.writerow([_fmt(i * g.h), _fmt(j * g.h), _fmt(field_.values[i, j])])
    _write_json(path.with_suffix(".json"), field_.metadata())


def _load(cfg: RunConfig):
    spec = builtin(cfg.nonlinearity)
    report = validate(spec)
    if not report.passed:
        bad = report.first_violation
        raise ConfigError(f"nonlinearity {spec.name} fails {bad.name} at {bad.location}")
    return spec, build_profile(spec, cfg.tau_max, cfg.nodes)


def cmd_profile(cfg: RunConfig, out: Path) -> int:
    spec, prof = _load(cfg)
    with (out / "profile.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "u0", "du0"])
        for t, u, du in zip(prof.tau, prof.u, prof.du):
            w.writerow([f"{t:.17g}", f"{u:.17g}", f"{du:.17g}"])
    summary = {"tau_max": prof.tau_max, "decay_rate": prof.decay_rate,
               "dissipation_integral": dissipation_integral(prof),
               "hamiltonian_residual_sup": prof.hamiltonian_residual}
    _write_json(out / "profile_summary.json", summary)
    log.info("profile: dissipation integral %.9f", summary["dissipation_integral"])
    return EXIT_OK


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    spec, prof = _load(cfg)
    maximal, minimal = solve_saddle(cfg.m, cfg.R, cfg.h, spec, prof, cfg.tol, cfg.k_max,
                                    envelope_kind=cfg.envelope)
    write_field_csv(maximal, out / "field_maximal.csv")
    write_field_csv(minimal, out / "field_minimal.csv")
    if not (maximal.converged and minimal.converged):
        log.error("iteration did not converge within k_max=%d", cfg.k_max)
        return EXIT_UNCONVERGED
    report = dg.build_report(maximal, prof, spec)
    report.bound_violation = max(report.bound_violation, dg.check_pointwise_bound(minimal, prof))
    _write_json(out / "diagnostics.json", report.to_json())
    checks = report.passed()
    order_ok = bool(np.nanmax(minimal.values - maximal.values) <= 1e-8)
    checks["ordering"] = order_ok
    for name, ok in checks.items():
        log.info("solve: %-12s %s", name, "pass" if ok else "FAIL")
    return EXIT_OK if all(checks.values()) else EXIT_OTHER


def default_a_list(R: float, rho2: float) -> list[float]:
    """Three scales a_max/4, a_max/2, a_max (clipped at 1) fitting 0.9 R/sqrt2."""
    a_max = stab.SUPPORT_MARGIN * R / math.sqrt(2.0) / rho2
    if a_max < 1:
        raise GridError(f"R={R} too small for eta with rho2={rho2}; "
                        f"need R >= {rho2 * math.sqrt(2.0) / stab.SUPPORT_MARGIN:.4g}")
    return sorted({max(1.0, a_max / 4), max(1.0, a_max / 2), a_max})


def cmd_stability(cfg: RunConfig, out: Path) -> int:
    spec, prof = _load(cfg)
    a_list = cfg.a_list or default_a_list(cfg.R, cfg.eta[1])
    # the geometry check comes before the (expensive) solve
    y_need = max(a_list) * cfg.eta[1]
    if y_need > stab.SUPPORT_MARGIN * cfg.R / math.sqrt(2.0):
        need = y_need * math.sqrt(2.0) / stab.SUPPORT_MARGIN
        raise stab.SupportError(f"a_list reaches y = {y_need:.4g}; need R >= {need:.4g}", need)
    maximal, _ = solve_saddle(cfg.m, cfg.R, cfg.h, spec, prof, cfg.tol, cfg.k_max,
                              envelope_kind=cfg.envelope)
    if not maximal.converged:
        return EXIT_UNCONVERGED
    sampler = stab.YZSampler(maximal)
    report = stab.instability_scan(maximal, spec, prof, a_list, tuple(cfg.eta), sampler=sampler)
    min_q, _ = stab.cone_vanishing_stability(maximal, spec, cfg.trials, cfg.seed, sampler=sampler)
    data = report.to_json()
    data["hardy_margin_exact"] = str(report.hardy_margin)
    data["cone_vanishing_min_q"] = min_q
    data["decreasing_in_a"] = report.extras["decreasing_in_a"]
    if cfg.m == 3:
        try:
            fam = stab.disjoint_instability_family(maximal, spec, cfg.family_count,
                                                   tuple(cfg.eta), sampler=sampler)
            data["disjoint_family"] = {"count": cfg.family_count, "status": "computed",
                                       "q_values": [q for _, q in fam],
                                       "all_negative": all(q < 0 for _, q in fam)}
        except stab.SupportError as exc:
            data["disjoint_family"] = {"count": cfg.family_count, "status": "grid_too_small",
                                       "required_R": exc.required_R}
    _write_json(out / "stability.json", data)
    log.info("stability: m=%d verdict %s", cfg.m, report.verdict)
    return EXIT_OK


HANDLERS = {"profile": cmd_profile, "solve": cmd_solve, "stability": cmd_stability}


def _split_overrides(extra: list[str]) -> dict:
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(f"option --{key} needs a value") from None
        out[key] = val
    return out


def run(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="saddlekit", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("commands", nargs="*", metavar="command",
                        help="one or more of: profile, solve, stability")
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, _split_overrides(extra), args.commands)
    except (ConfigError, OSError) as exc:
        print(f"saddlekit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        status = EXIT_OK
        for name in cfg.commands:
            code = HANDLERS[name](cfg, out)
            if code != EXIT_OK:
                status = code
                if code == EXIT_UNCONVERGED:
                    break
        return status
    except (ConfigError, GridError, stab.SupportError) as exc:
        print(f"saddlekit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"saddlekit: error: {exc}", file=sys.stderr)
        return EXIT_OTHER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
