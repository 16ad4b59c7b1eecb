"""Command line driver.

Every subcommand writes its outputs and a ``summary.json`` into the output
directory. Exit codes: 0 on success, 2 when the run stops at a topological
obstruction, 1 on any other error.
"""
import argparse
import dataclasses
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_TOL
from .diagnostics import (SpreadGeometry, chern_plaquette, convergence_csv, convergence_study,
                          regularity, solve_weights, spread)
from .errors import (ChernObstruction, EigenvalueWinding, TopologicalObstruction,
                     WannierError, WindingObstruction)
from .fileio import (MmnProvider, emit_field, parse_eig, parse_mmn, provider_from_mmn,
                     read_field, to_jsonable)
from .frames import build_frame, obstruction_loop, obstruction_surface
from .grid import KGrid
from .homotopy import (UnitaryField, contract_columns_1d, contract_columns_2d, contract_log,
                       winding_det, winding_eigenvalues)
from .models import (KaneMeleParams, berry_loop, haldane, kane_mele, min_gap,
                     random_tight_binding, toy_diag_loop)
from .transport import ArrayProvider

OUT_ENV = "WANNIER_HOMOTOPY_OUT"
MODELS = ("kane-mele", "haldane", "berry-loop", "random", "toy-diag")
COMMANDS = ("wind", "contract", "frame", "regularity", "chern", "spread", "converge", "ingest-w90")


@dataclass
class RunConfig:
    """Resolved settings of one run; mirrors the command line flags."""

    command: str
    model: str = None
    lambda_nu: float = 0.0
    lambda_r: float = 0.0
    winding: tuple = (1, -1)
    input: str = None
    mmn: str = None
    eig: str = None
    window: str = None
    strict: bool = False
    recip: tuple = None
    grid: str = None
    sizes: tuple = (24, 48, 96, 192)
    method: str = "columns"
    seed: int = 0
    t_points: int = 33
    tol: dict = field(default_factory=dict)
    out: str = "."

    def validate(self):
        sources = [s for s in (self.model, self.mmn, self.input) if s]
        if self.command == "converge":
            if not self.model:
                raise ValueError("converge needs --model")
        elif len(sources) != 1:
            raise ValueError("give exactly one input: --model, --mmn or --input")
        if self.command == "ingest-w90" and not self.mmn:
            raise ValueError("ingest-w90 needs --mmn")
        if self.mmn and not self.window:
            raise ValueError("--window is required with --mmn")
        if self.model and self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.method not in ("log", "columns", "log-forced"):
            raise ValueError(f"unknown method {self.method!r}")
        return self

    def tolerances(self):
        return DEFAULT_TOL.with_overrides(**self.tol) if self.tol else DEFAULT_TOL


# ---------------------------------------------------------------------------
# Argument and config parsing


def _int_list(text):
    return tuple(int(p) for p in str(text).replace(",", " ").split())


def _float_list(text):
    return tuple(float(p) for p in str(text).replace(",", " ").split())


_CONVERTERS = {
    "lambda_nu": float, "lambda_r": float, "seed": int, "t_points": int,
    "winding": _int_list, "sizes": _int_list, "recip": _float_list,
    "strict": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


def read_config_file(path):
    """Flat ``key = value`` file; keys are flag names, ``tol.NAME`` sets a tolerance."""
    values, tol = {}, {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key.startswith("tol."):
                tol[key[4:]] = float(value)
            else:
                values[key] = value
    return values, tol


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wannier-homotopy",
        description="Smooth Bloch frames by parallel transport and homotopy contraction.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "wind": "winding report of a loop file or of a model's obstruction loop",
        "contract": "homotopy to the identity of a loop or surface",
        "frame": "build a frame (1d, 2d or 3d) and its regularity field",
        "regularity": "regularity field of a frame",
        "chern": "Chern number by plaquettes and by the obstruction winding",
        "spread": "Marzari-Vanderbilt spread of a frame",
        "converge": "grid convergence study of frame_2d",
        "ingest-w90": "frame and spread from MMN/EIG overlap files",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="flat key = value file with defaults for these flags")
        p.add_argument("--model", help=f"one of {', '.join(MODELS)}")
        p.add_argument("--lambda-nu", type=float)
        p.add_argument("--lambda-r", type=float)
        p.add_argument("--winding", type=_int_list, help="diagonal windings for toy-diag, e.g. 1,-1")
        p.add_argument("--input", help="field file written by an earlier run")
        p.add_argument("--mmn", help="MMN overlap file")
        p.add_argument("--eig", help="EIG band energy file")
        p.add_argument("--window", help="occupied bands, 1-based inclusive, e.g. 1:4")
        p.add_argument("--strict", action="store_const", const=True,
                       help="reject MMN shifts inconsistent with the grid")
        p.add_argument("--recip", type=_float_list,
                       help="reciprocal lattice vectors as d*d numbers, row by row")
        p.add_argument("--grid", help="N, NxM or NxMxL")
        p.add_argument("--sizes", type=_int_list, help="grid sizes for converge, e.g. 24,48,96")
        p.add_argument("--method", choices=("log", "columns", "log-forced"))
        p.add_argument("--seed", type=int)
        p.add_argument("--t-points", type=int)
        p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                       help="override a tolerance; may be repeated")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    return parser


def resolve_config(args, environ=None):
    """Merge defaults, the config file, the environment and flags (later wins)."""
    environ = os.environ if environ is None else environ
    values, tol = {}, {}
    if args.config:
        values, tol = read_config_file(args.config)
    names = {f.name for f in dataclasses.fields(RunConfig)} - {"command", "tol"}
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    settings = {k: _CONVERTERS.get(k, str)(v) for k, v in values.items()}
    if "out" not in settings and environ.get(OUT_ENV):
        settings["out"] = environ[OUT_ENV]
    for name in names:
        flag = getattr(args, name, None)
        if flag is not None:
            settings[name] = flag
    for item in args.tol:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--tol expects NAME=VALUE, got {item!r}")
        tol[key.strip()] = float(value)
    cfg = RunConfig(command=args.command, tol=tol, **settings)
    return cfg.validate()


# ---------------------------------------------------------------------------
# Inputs


def make_model(cfg, dim=None):
    name = cfg.model
    if name == "kane-mele":
        return kane_mele(KaneMeleParams(cfg.lambda_nu, cfg.lambda_r))
    if name == "haldane":
        return haldane()
    if name == "berry-loop":
        return berry_loop()
    if name == "random":
        return random_tight_binding(dim or 2, 4, 2, seed=cfg.seed)
    raise ValueError(f"model {name!r} does not define a Hamiltonian")


def _grid(cfg, default=None):
    if cfg.grid:
        return KGrid.parse(cfg.grid)
    if default is None:
        raise ValueError("--grid is required")
    return KGrid(default)


def _window(text):
    lo, sep, hi = str(text).partition(":")
    if not sep:
        raise ValueError(f"--window expects FIRST:LAST, got {text!r}")
    return int(lo) - 1, int(hi)


def _recip(cfg, dim):
    if cfg.recip is None:
        return None
    vals = np.asarray(cfg.recip, dtype=float)
    if vals.size != dim * dim:
        raise ValueError(f"--recip needs {dim * dim} numbers for a {dim}d grid")
    return vals.reshape(dim, dim)


def make_provider(cfg, tol, results):
    if cfg.mmn:
        grid = _grid(cfg)
        with open(cfg.mmn, encoding="utf-8") as fh:
            data = parse_mmn(fh)
        energies = None
        window = _window(cfg.window)
        if cfg.eig:
            with open(cfg.eig, encoding="utf-8") as fh:
                energies = parse_eig(fh, n_bands=data.n_bands, n_kpts=data.n_kpts)
            if window[1] < data.n_bands:
                results["window_gap"] = float(np.min(energies[:, window[1]])
                                              - np.max(energies[:, window[1] - 1]))
        results["mmn"] = {"n_bands": data.n_bands, "n_kpts": data.n_kpts,
                          "n_neighbors": data.n_neighbors, "window": list(window)}
        return provider_from_mmn(data, window, grid, strict=cfg.strict, energies=energies)
    grid = _grid(cfg)
    model = make_model(cfg, grid.dim)
    if model.dim != grid.dim:
        raise ValueError(f"model {model.name} is {model.dim}d but the grid is {grid.dim}d")
    provider = ArrayProvider.from_model(model, grid, tol=tol)
    results["model"] = {"name": model.name, "params": model.params}
    return provider


def make_loop(cfg, tol, results):
    """Loop or surface for ``wind`` and ``contract``."""
    if cfg.input:
        obj = read_field(cfg.input)
        if isinstance(obj, UnitaryField):
            return obj
        if not hasattr(obj, "coeffs"):
            raise ValueError(f"{cfg.input} holds a {type(obj).__name__}, not a loop or frame")
        return UnitaryField(obj.grid, obj.coeffs)
    if cfg.model == "toy-diag":
        n = _grid(cfg, (64,)).sizes[0]
        return toy_diag_loop(tuple(cfg.winding), n_points=n)
    provider = make_provider(cfg, tol, results)
    if provider.grid.dim == 2:
        return obstruction_loop(provider, tol=tol)
    if provider.grid.dim == 3:
        return obstruction_surface(provider, seed=cfg.seed, tol=tol)
    raise ValueError("wind/contract need a 2d or 3d model, a loop file or toy-diag")


def _geometry(provider, cfg, tol):
    grid = provider.grid
    recip = _recip(cfg, grid.dim)
    if recip is None:
        recip = 2 * np.pi * np.eye(grid.dim)
    if isinstance(provider, MmnProvider):
        offsets = set()
        for key in provider.table:
            if any(key):
                offsets.update({key, tuple(-o for o in key)})
        offsets = sorted(offsets, reverse=True)
    else:
        offsets = [tuple(s if a == axis else 0 for a in range(grid.dim))
                   for axis in range(grid.dim) for s in (1, -1)]
    geom = SpreadGeometry(recip, offsets, np.zeros(len(offsets)))
    geom.weights = solve_weights(geom.bvectors(grid), tol=tol)
    return geom


# ---------------------------------------------------------------------------
# Commands


def _frame_outputs(cfg, tol, out, results, files, with_frame=True, with_spread=False):
    provider = make_provider(cfg, tol, results)
    frame = build_frame(provider, method=cfg.method, seed=cfg.seed, tol=tol)
    reg = regularity(frame, provider)
    results["frame"] = {
        "unitarity_error": frame.unitarity_error(),
        "periodicity_residual": frame.periodicity_residual(),
        "metadata": frame.metadata,
    }
    results["regularity"] = {"max": reg.max, "mean": reg.mean}
    if with_frame:
        files.append(emit_field(frame, out / "frame.dat",
                                metadata={"seed": cfg.seed, "tolerances": tol.to_dict()}))
    files.append(emit_field(reg, out / "regularity.csv"))
    if with_spread:
        rep = spread(frame, provider, _geometry(provider, cfg, tol), tol=tol)
        results["spread"] = {
            "omega_total": rep.omega_total,
            "omega_invariant": rep.omega_invariant,
            "per_band_spreads": rep.per_band_spreads,
            "per_band_centers": rep.per_band_centers,
        }


def cmd_wind(cfg, tol, out, results, files):
    loop = make_loop(cfg, tol, results)
    if loop.grid.dim != 1:
        raise ValueError("wind needs a loop, not a surface")
    rep = winding_eigenvalues(loop, tol=tol)
    results["winding"] = {"total": rep.total, "per_eigenvalue": rep.per_eigenvalue,
                          "max_phase_step": rep.max_phase_step}


def cmd_contract(cfg, tol, out, results, files):
    loop = make_loop(cfg, tol, results)
    if loop.grid.dim == 1:
        if cfg.method == "columns":
            hom = contract_columns_1d(loop, cfg.t_points, seed=cfg.seed, tol=tol)
        else:
            hom = contract_log(loop, cfg.t_points, forced=(cfg.method == "log-forced"), tol=tol)
    else:
        if cfg.method != "columns":
            raise ValueError("surfaces can only be contracted with --method columns")
        hom = contract_columns_2d(loop, cfg.t_points, seed=cfg.seed, tol=tol)
    results["homotopy"] = {"max_step": hom.max_step, "metadata": hom.metadata}
    files.append(emit_field(hom, out / "homotopy.dat", metadata={"tolerances": tol.to_dict()}))


def cmd_frame(cfg, tol, out, results, files):
    _frame_outputs(cfg, tol, out, results, files)


def cmd_regularity(cfg, tol, out, results, files):
    _frame_outputs(cfg, tol, out, results, files, with_frame=False)


def cmd_chern(cfg, tol, out, results, files):
    provider = make_provider(cfg, tol, results)
    results["chern_plaquette"] = chern_plaquette(provider, tol=tol)
    results["obstruction_winding"] = winding_det(obstruction_loop(provider, tol=tol), tol=tol)


def cmd_spread(cfg, tol, out, results, files):
    _frame_outputs(cfg, tol, out, results, files, with_spread=True)


def cmd_converge(cfg, tol, out, results, files):
    model = make_model(cfg, 2)
    rows = convergence_study(model, cfg.method, cfg.sizes, seed=cfg.seed, tol=tol)
    path = out / "convergence.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(convergence_csv(rows))
    files.append(path)
    results["convergence"] = rows


def cmd_ingest(cfg, tol, out, results, files):
    _frame_outputs(cfg, tol, out, results, files, with_spread=True)


HANDLERS = {
    "wind": cmd_wind, "contract": cmd_contract, "frame": cmd_frame,
    "regularity": cmd_regularity, "chern": cmd_chern, "spread": cmd_spread,
    "converge": cmd_converge, "ingest-w90": cmd_ingest,
}


def _obstruction_info(exc):
    info = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ChernObstruction):
        info["chern"] = list(exc.chern)
    elif isinstance(exc, WindingObstruction):
        info["winding"] = list(exc.winding)
    elif isinstance(exc, EigenvalueWinding):
        info["windings"] = list(exc.windings)
    return info


def write_summary(path, summary):
    text = json.dumps(to_jsonable(summary), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cli_main(argv=None, environ=None):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args, environ)
        tol = cfg.tolerances()
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(cfg.out)
    results, files = {}, []
    summary = {"command": cfg.command, "config": dataclasses.asdict(cfg),
               "tolerances": tol.to_dict(), "version": __version__}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            out.mkdir(parents=True, exist_ok=True)
            HANDLERS[cfg.command](cfg, tol, out, results, files)
            status, code = "ok", 0
        except TopologicalObstruction as exc:
            status, code = "obstruction", 2
            summary["error"] = _obstruction_info(exc)
        except (WannierError, ValueError, OSError) as exc:
            status, code = "error", 1
            summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
    summary.update(status=status, exit_code=code, results=results,
                   files=[Path(f).name for f in files],
                   warnings=sorted({str(w.message) for w in caught}))
    try:
        write_summary(out / "summary.json", summary)
    except OSError as exc:
        print(f"error: cannot write summary: {exc}", file=sys.stderr)
        return 1
    if code:
        print(f"{status}: {summary['error']['type']}: {summary['error']['message']}",
              file=sys.stderr)
    return code


def main():
    sys.exit(cli_main())
