"""Batch front end: ``afrelay design|sweep|validate --config FILE``.

Exit codes: 0 success, 1 usage or configuration error, 2 design hit the
iteration cap, 3 validation failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import validation
from .channel import CorrelationParams, build_model, format_matrices, load_preset
from .design import DesignConfig, alternate
from .objective import PowerBudget
from .simulate import SweepConfig, sweep, write_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_VALIDATION = 3

log = logging.getLogger("afrelay")


class ConfigError(ValueError):
    pass


# key -> (parser, default)
_FLOAT = float
_INT = int


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


CONFIG_KEYS = {
    "preset": (str, "paper-4x4"),
    "alpha": (_FLOAT, 0.5),
    "beta": (_FLOAT, 0.4),
    "sigma_e2": (_floats, (0.0, 0.002, 0.01)),
    "snr_sr_db": (_FLOAT, 30.0),
    "snr_rd_db": (_floats, (10.0, 15.0, 20.0, 25.0, 30.0)),
    "Ps": (_FLOAT, 4.0),
    "Pr": (_FLOAT, 4.0),
    "tol_mse": (_FLOAT, 1e-6),
    "max_iters": (_INT, 100),
    "tol_power": (_FLOAT, DesignConfig.tol_power),
    "tol_lambda": (_FLOAT, DesignConfig.tol_lambda),
    "seed": (_INT, 0),
    "n_symbols": (_INT, 10_000),
    "n_realizations": (_INT, 100),
}


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    cfg = {k: default for k, (_, default) in CONFIG_KEYS.items()}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        conv = CONFIG_KEYS[key][0]
        try:
            cfg[key] = conv(value)
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from err
    return cfg


def load_config(path, seed=None):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    cfg = parse_config(text)
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _design_config(cfg):
    return DesignConfig(
        tol_mse=cfg["tol_mse"],
        max_iters=cfg["max_iters"],
        tol_power=cfg["tol_power"],
        tol_lambda=cfg["tol_lambda"],
    )


def _model(cfg, sigma_e2, snr_rd_db):
    Hbar_sr, Hbar_rd = load_preset(cfg["preset"])
    corr = CorrelationParams(cfg["alpha"], cfg["beta"], sigma_e2)
    return build_model(Hbar_sr, Hbar_rd, corr, cfg["snr_sr_db"], snr_rd_db, cfg["Ps"], cfg["Pr"])


def cmd_design(cfg, out):
    """Design for the first ``sigma_e2`` and ``snr_rd_db`` values; writes
    ``transceiver.txt`` and ``trace.csv`` into directory ``out``."""
    model = _model(cfg, cfg["sigma_e2"][0], cfg["snr_rd_db"][0])
    budget = PowerBudget(cfg["Ps"], cfg["Pr"])
    t, trace = alternate(model, budget, _design_config(cfg))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transceiver.txt").write_text(format_matrices([("P", t.P), ("F", t.F), ("G", t.G)]))
    trace.write_csv(out / "trace.csv")
    log.info("%d sweeps, final MSE %.10g, converged=%s", len(trace), trace.mse[-1], trace.converged)
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def sweep_config(cfg):
    return SweepConfig(
        snr_rd_db=cfg["snr_rd_db"],
        sigma_e2=cfg["sigma_e2"],
        snr_sr_db=cfg["snr_sr_db"],
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        n_symbols=cfg["n_symbols"],
        n_realizations=cfg["n_realizations"],
        seed=cfg["seed"],
        budget=PowerBudget(cfg["Ps"], cfg["Pr"]),
        preset=cfg["preset"],
        design=_design_config(cfg),
    )


def cmd_sweep(cfg, out):
    scfg = sweep_config(cfg)
    points = sweep(scfg, progress=lambda i, n: log.info("sweep point %d/%d done", i, n))
    if out is None or str(out) == "-":
        write_csv(points, sys.stdout)
    else:
        with open(out, "w", newline="") as fh:
            write_csv(points, fh)
    return EXIT_OK


def cmd_validate(cfg, out=None):
    sigma_e2 = max(cfg["sigma_e2"])
    model = _model(cfg, sigma_e2, cfg["snr_rd_db"][0])
    budget = PowerBudget(cfg["Ps"], cfg["Pr"])
    results = validation.run_all(model, budget, _design_config(cfg), cfg["seed"])
    width = max(len(r.name) for r in results)
    lines = [f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}" for r in results]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if out is not None:
        Path(out).write_text(text)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {"design": cmd_design, "sweep": cmd_sweep, "validate": cmd_validate}


def build_parser():
    p = argparse.ArgumentParser(prog="afrelay", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value configuration file (defaults used if omitted)")
    p.add_argument("--out", help="output path (directory for 'design', CSV file for 'sweep')")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.config:
            cfg = load_config(args.config, args.seed)
        else:
            cfg = parse_config("")
            if args.seed is not None:
                cfg["seed"] = args.seed
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        out = args.out
        if args.command == "design" and out is None:
            out = "."
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, ValueError, OSError) as err:
        print(f"afrelay: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, np.linalg.LinAlgError) as err:
        print(f"afrelay: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
