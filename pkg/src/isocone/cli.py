"""Batch experiment runner.

Usage::

    isocone <workflow> --config path [--h val] [--seed n] [--out dir]

The config is one JSON object::

    {"workflow": "eigen",
     "domain": {"kind": "cap", "aperture": 1.0472} | "path/to/domain.json",
     "mesh": "optional/path/to/mesh.json",
     "h": 0.05, "seed": 0, "output_dir": "out",
     "params": {...}}

Every run writes ``report.json`` (inputs echoed, results, versions, wall
time) and workflow CSVs into the output directory. Exit codes: 0 success,
1 I/O error, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from . import __version__
from .legendre_oracle import cap_mu1
from .neumann_eigen import EigenSolverError, mu1, stability_sweep, sweep_csv
from .perimeter import (
    HypothesisError,
    Lemma1Params,
    lemma1_bound,
    perimeter,
    verify_elementary_inequalities,
)
from .solver import SolverOptions, VolumeProjectionError, dumbbell_counterexample, multistart
from .sphere import DIM
from .spherical_domain import DomainSpec, MeshError, SpecError, TriangulatedDomain, area, mesh_quality, triangulate
from .verification import small_graphs, verify_all

WORKFLOWS = ("eigen", "sweep", "minimize", "lemma1", "inequalities", "dumbbell", "verify")
EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalFailure(RuntimeError):
    """A workflow finished but a numerical result did not meet its contract."""


# -- file helpers -------------------------------------------------------------------


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _read_json(path: Path) -> Any:
    """Load JSON from disk; OSError propagates (I/O), bad JSON becomes ConfigError."""
    text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"malformed JSON: {exc}") from exc


# -- config --------------------------------------------------------------------------


def load_config(args: argparse.Namespace) -> dict:
    """Merge the JSON config with command-line overrides and validate it."""
    cfg: dict[str, Any] = {}
    base = Path(".")
    if args.config is not None:
        path = Path(args.config)
        cfg = _read_json(path)
        if not isinstance(cfg, dict):
            raise ConfigError("config", "expected a JSON object")
        base = path.parent
    elif args.workflow != "verify":
        raise ConfigError("config", "--config is required for this workflow")
    wf = cfg.get("workflow", args.workflow)
    if wf != args.workflow:
        raise ConfigError("workflow", f"config declares {wf!r} but {args.workflow!r} was requested")
    cfg["workflow"] = args.workflow
    if args.h is not None:
        cfg["h"] = args.h
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["output_dir"] = args.out
    cfg.setdefault("seed", 0)
    cfg.setdefault("output_dir", "isocone_out")
    cfg.setdefault("params", {})
    known = {"workflow", "domain", "mesh", "h", "seed", "output_dir", "params"}
    for key in cfg:
        if key not in known:
            raise ConfigError(key, "unknown config field")
    if not isinstance(cfg["params"], dict):
        raise ConfigError("params", "expected an object")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed", "expected an integer")
    if "h" in cfg:
        h = cfg["h"]
        if isinstance(h, bool) or not isinstance(h, (int, float)) or not math.isfinite(h) or h <= 0:
            raise ConfigError("h", f"must be a positive number, got {h!r}")
        cfg["h"] = float(h)
    # resolve the domain to an inline object so the report is self-contained
    dom = cfg.get("domain")
    if isinstance(dom, str):
        dom_path = (base / dom) if not Path(dom).is_absolute() else Path(dom)
        if not dom_path.exists():
            raise FileNotFoundError(f"domain file not found: {dom_path}")
        cfg["domain"] = _read_json(dom_path)
    if "mesh" in cfg:
        mesh_path = Path(cfg["mesh"])
        if not mesh_path.is_absolute():
            mesh_path = base / mesh_path
        if not mesh_path.exists():
            raise FileNotFoundError(f"mesh file not found: {mesh_path}")
        cfg["mesh"] = str(mesh_path)
    return cfg


def _spec(cfg: dict) -> DomainSpec:
    if "domain" not in cfg:
        raise ConfigError("domain", "required for this workflow")
    return DomainSpec.from_dict(cfg["domain"]).validate()


def _load_mesh_file(path: str) -> TriangulatedDomain:
    """Read a mesh file; unreadable or corrupted files are I/O errors."""
    try:
        return TriangulatedDomain.from_json(Path(path).read_text())
    except MeshError as exc:
        raise OSError(f"corrupted mesh file {path}: {exc}") from exc


def _mesh(cfg: dict, spec: DomainSpec | None) -> TriangulatedDomain:
    if "mesh" in cfg:
        return _load_mesh_file(cfg["mesh"])
    if spec is None:
        raise ConfigError("domain", "required for this workflow")
    if "h" not in cfg:
        raise ConfigError("h", "required when no mesh file is given")
    return triangulate(spec, cfg["h"])


def _param(params: dict, key: str, default, kind=float):
    val = params.get(key, default)
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"params.{key}", f"expected a number, got {val!r}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"params.{key}", f"expected an integer, got {val!r}")
        return val
    if not isinstance(val, kind):
        raise ConfigError(f"params.{key}", f"expected {kind.__name__}, got {val!r}")
    return val


# -- workflows -----------------------------------------------------------------------


def run_eigen(cfg: dict, out: Path) -> dict:
    spec = _spec(cfg) if "domain" in cfg else None
    mesh = _mesh(cfg, spec)
    res = mu1(mesh)
    results = res.to_dict()
    results["area"] = area(mesh)
    results["mesh"] = mesh_quality(mesh)
    results["exceeds_sqrt2_plus_0.01"] = res.mu1 > math.sqrt(2.0) + 0.01
    if spec is not None and spec.kind == "cap":
        ref = cap_mu1(spec.aperture)
        results["oracle_mu1"] = ref
        results["oracle_relative_error"] = abs(res.mu1 - ref) / ref
    v = res.eigenvector
    rows = [[i, *map(float, mesh.vertices[i]), float(v[i])] for i in range(mesh.n_vertices)]
    write_atomic(out / "eigenvector.csv", csv_text(["vertex", "x1", "x2", "x3", "v"], rows))
    return results


def run_sweep(cfg: dict, out: Path) -> dict:
    spec = _spec(cfg)
    if "h" not in cfg:
        raise ConfigError("h", "required")
    params = cfg["params"]
    eps = params.get("epsilons", [0.05, 0.02, 0.01])
    if not isinstance(eps, list) or not all(isinstance(e, (int, float)) and e >= 0 for e in eps):
        raise ConfigError("params.epsilons", "expected a list of nonnegative numbers")
    family = _param(params, "family", "both", str)
    families = ("concentric", "mode") if family == "both" else (family,)
    mode = _param(params, "mode", 3, int)
    results = {}
    for fam in families:
        rows = stability_sweep(spec, eps, cfg["h"], family=fam, mode=mode)
        write_atomic(out / f"sweep_{fam}.csv", sweep_csv(rows))
        deltas = [r.delta_mu1 for r in rows]
        results[fam] = {
            "rows": [r.__dict__ for r in rows],
            "delta_increasing_in_epsilon": all(b > a for a, b in zip(deltas, deltas[1:])),
        }
    return results


def run_minimize(cfg: dict, out: Path) -> dict:
    spec = _spec(cfg) if "domain" in cfg else None
    mesh = _mesh(cfg, spec)
    params = cfg["params"]
    opts = SolverOptions(
        step=_param(params, "step", 0.1),
        max_iter=_param(params, "max_iter", 2000, int),
        grad_tol=_param(params, "grad_tol", 1e-7),
        sector_tol=_param(params, "sector_tol", 1e-3),
        seed=cfg["seed"],
    )
    n_starts = _param(params, "starts", 1, int)
    amplitude = _param(params, "amplitude", 0.2)
    if n_starts < 1:
        raise ConfigError("params.starts", "must be at least 1")
    if not 0.0 < amplitude < 1.0:
        raise ConfigError("params.amplitude", "must lie in (0, 1)")
    a = area(mesh)
    target = _param(params, "target", a / DIM)
    results, points = multistart(mesh, target, n_starts, amplitude, opts)
    for k, r in enumerate(results):
        write_atomic(out / f"history_{k}.csv", r.history_csv())
    best = min(results, key=lambda r: r.history[-1][0])
    write_atomic(out / "graph.json", json.dumps(best.graph.to_dict()))
    write_atomic(out / "mesh.json", mesh.to_json())
    summary = {
        "area": a,
        "target_volume": target,
        "runs": [r.to_dict() for r in results],
        "stationary_points": points,
        "all_sector": all(r.is_sector for r in results),
        "all_converged": all(r.converged for r in results),
        "is_sector": best.is_sector,
    }
    if not summary["all_converged"]:
        raise NumericalFailure(summary)
    return summary


def run_lemma1(cfg: dict, out: Path) -> dict:
    spec = _spec(cfg) if "domain" in cfg else None
    mesh = _mesh(cfg, spec)
    params = cfg["params"]
    n = _param(params, "n_samples", 100, int)
    p = Lemma1Params(delta=_param(params, "delta", 0.1), epsilon=_param(params, "epsilon", 0.03))
    rng = np.random.default_rng(cfg["seed"])
    rows, holds = [], 0
    worst = math.inf
    for k, g in enumerate(small_graphs(mesh, n, p.epsilon, rng)):
        P, B = perimeter(g), lemma1_bound(g, p)
        holds += P >= B
        worst = min(worst, P - B)
        rows.append([k, P, B, P - B, g.sup_norm, g.grad_sup_norm])
    write_atomic(
        out / "lemma1.csv",
        csv_text(["sample", "perimeter", "bound", "margin", "sup_u", "sup_grad_u"], rows),
    )
    return {"samples": n, "holds": holds, "worst_margin": worst, "delta": p.delta, "epsilon": p.epsilon}


def run_inequalities(cfg: dict, out: Path) -> dict:
    n = _param(cfg["params"], "n_samples", 100_000, int)
    rep = verify_elementary_inequalities(n, cfg["seed"])
    rows = [[name, r["samples"], r["failures"], r["worst_margin"]] for name, r in rep.items()]
    write_atomic(out / "inequalities.csv", csv_text(["inequality", "samples", "failures", "worst_margin"], rows))
    write_atomic(out / "inequalities.json", json.dumps(rep, indent=2))
    return rep


def run_dumbbell(cfg: dict, out: Path) -> dict:
    spec = _spec(cfg)
    if spec.kind != "dumbbell":
        raise ConfigError("domain.kind", "the dumbbell workflow needs a dumbbell domain")
    if "h" not in cfg:
        raise ConfigError("h", "required")
    rho = _param(cfg["params"], "rho", 3.0)
    return dumbbell_counterexample(spec, cfg["h"], rho).to_dict()


def run_verify(cfg: dict, out: Path) -> dict:
    mesh = _load_mesh_file(cfg["mesh"]) if "mesh" in cfg else None
    checks = verify_all(cfg["seed"], mesh)
    rows = [[c.name, c.passed, c.worst_margin, c.detail] for c in checks]
    write_atomic(out / "verify.csv", csv_text(["check", "passed", "worst_margin", "detail"], rows))
    summary = {"checks": [c.to_dict() for c in checks], "all_passed": all(c.passed for c in checks)}
    if not summary["all_passed"]:
        raise NumericalFailure(summary)
    return summary


RUNNERS = {
    "eigen": run_eigen,
    "sweep": run_sweep,
    "minimize": run_minimize,
    "lemma1": run_lemma1,
    "inequalities": run_inequalities,
    "dumbbell": run_dumbbell,
    "verify": run_verify,
}


def versions() -> dict:
    return {
        "isocone": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run(cfg: dict) -> int:
    """Execute a validated config; returns the exit code and writes report.json."""
    out = Path(cfg["output_dir"])
    t0 = time.perf_counter()
    status, results, error = EXIT_OK, None, None
    try:
        results = RUNNERS[cfg["workflow"]](cfg, out)
    except NumericalFailure as exc:
        status, results = EXIT_NUMERICAL, exc.args[0]
        error = "numerical contract not met"
    except (EigenSolverError, VolumeProjectionError, np.linalg.LinAlgError) as exc:
        status, error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    except (SpecError, ConfigError, HypothesisError, MeshError) as exc:
        status, error = EXIT_INVALID, f"{type(exc).__name__}: {exc}"
    except OSError as exc:
        status, error = EXIT_IO, f"{type(exc).__name__}: {exc}"
    except ValueError as exc:
        status, error = EXIT_INVALID, f"{type(exc).__name__}: {exc}"
    report = {
        "workflow": cfg["workflow"],
        "inputs": cfg,
        "results": results,
        "status": status,
        "error": error,
        "versions": versions(),
        "wall_time_s": time.perf_counter() - t0,
    }
    if error:
        print(f"isocone {cfg['workflow']}: {error}", file=sys.stderr)
    try:
        write_atomic(out / "report.json", json.dumps(_jsonable(report), indent=2) + "\n")
    except OSError as exc:
        print(f"isocone: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="isocone",
        description="Isoperimetric experiments in cones over spherical domains (all angles in radians).",
    )
    p.add_argument("workflow", choices=WORKFLOWS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--h", type=float, help="override the mesh resolution")
    p.add_argument("--seed", type=int, help="override the random seed")
    p.add_argument("--out", help="override the output directory")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, SpecError) as exc:
        print(f"isocone: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"isocone: {exc}", file=sys.stderr)
        return EXIT_IO
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
