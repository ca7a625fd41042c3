"""Batch front end: simulate, verify, scan, scaling, emit-fixtures.

Exit codes: 0 all good, 1 at least one check failed, 2 configuration
problem, 3 resource or numerical-integrity failure.  All numbers in CSV
output carry 17 significant digits; JSON numbers use exact round-trip
rendering.  Outputs are deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .checks import DEFAULT_SEED, battery, scaling_study
from .config import (
    ConfigError,
    ExperimentConfig,
    GridsConfig,
    ModelConfig,
    build_model,
    emit_config,
    initial_state,
    load_config,
    scan_alphas,
)
from .linalg import FaithfulnessError
from .measures import AbsoluteContinuityError
from .models import ResourceLimitError
from .protocol import NumericalIntegrityError, char_function_grid, protocol_measure

__all__ = ["main", "EXIT_OK", "EXIT_CHECK_FAILED", "EXIT_CONFIG", "EXIT_RESOURCE"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

_NUMERIC_ERRORS = (
    ResourceLimitError,
    NumericalIntegrityError,
    FaithfulnessError,
    AbsoluteContinuityError,
    np.linalg.LinAlgError,
    MemoryError,
)


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _write_text(path: Path, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True))


def _out_dir(args, cfg: ExperimentConfig | None) -> Path:
    if args.out is not None:
        out = Path(args.out)
    elif cfg is not None and cfg.out_dir is not None:
        out = Path(cfg.out_dir)
    else:
        out = Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(cfg: ExperimentConfig, out: Path, jobs: int, seed: int | None) -> int:
    model = build_model(cfg)
    nu = initial_state(cfg, model, seed=seed)

    def one(t: float):
        return protocol_measure(
            nu,
            model.reference,
            model.hamiltonian,
            t,
            cluster_tol=cfg.tolerances.cluster_tol,
            atom_merge_tol=cfg.tolerances.atom_merge_tol,
        )

    times = cfg.grids.times
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, times))
    else:
        results = [one(t) for t in times]

    entries = []
    for t, q in zip(times, results):
        name = f"measure_t{_g17(t)}.csv"
        _write_text(out / name, q.to_csv())
        entries.append(
            {
                "time": t,
                "file": name,
                "atom_count": len(q.atoms()),
                "mean": float(np.dot(q.locations, q.weights)),
            }
        )
        print(f"wrote {name} ({len(q.atoms())} atoms)")
    manifest = {
        "command": "simulate",
        "fingerprint": model.fingerprint,
        "state": cfg.state.tag,
        "seed": cfg.state.seed if seed is None else seed,
        "outputs": entries,
    }
    _write_json(out / "manifest.json", manifest)
    print(f"wrote manifest.json ({len(entries)} measures)")
    return EXIT_OK


def _reports_with_threshold(reports, threshold: float | None):
    if threshold is None:
        return reports
    return [dataclasses.replace(r, threshold=threshold) for r in reports]


def _print_report_lines(reports) -> None:
    for r in reports:
        print(
            f"{r.verdict:<4} {r.check:<24} residual={r.residual_max:.3e} "
            f"threshold={r.threshold:.1e} ({r.seconds:.2f}s)"
        )


def _cmd_verify(cfg: ExperimentConfig, out: Path, jobs: int, seed: int | None) -> int:
    model = build_model(cfg)
    reports = battery(
        model,
        times=cfg.grids.times,
        seed=DEFAULT_SEED if seed is None else seed,
        jobs=jobs,
    )
    reports = _reports_with_threshold(reports, cfg.tolerances.threshold)
    _write_json(out / "reports.json", [r.to_dict() for r in reports])
    _print_report_lines(reports)
    failed = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return EXIT_OK if not failed else EXIT_CHECK_FAILED


def _cmd_scan(cfg: ExperimentConfig, out: Path, jobs: int, seed: int | None) -> int:
    model = build_model(cfg)
    nu = initial_state(cfg, model, seed=seed)
    alphas = scan_alphas(cfg)
    for t in cfg.grids.times:
        lines = ["re_alpha,im_alpha,re_f,im_f,route"]
        for route in cfg.scan.routes:
            pts = alphas[alphas.real == 0.0] if route == "cocycle-product" else alphas
            if pts.size == 0:
                continue
            grid = char_function_grid(
                nu,
                model.reference,
                model.hamiltonian,
                t,
                pts,
                route,
                atom_merge_tol=cfg.tolerances.atom_merge_tol,
            )
            for a, f in zip(grid.alphas, grid.values):
                lines.append(
                    f"{_g17(a.real)},{_g17(a.imag)},{_g17(f.real)},{_g17(f.imag)},{route}"
                )
        name = f"scan_t{_g17(t)}.csv"
        _write_text(out / name, "\n".join(lines))
        print(f"wrote {name} ({len(lines) - 1} rows)")
    return EXIT_OK


def _cmd_scaling(cfg: ExperimentConfig, out: Path, jobs: int, seed: int | None) -> int:
    if cfg.model.kind != "open-system":
        raise ConfigError("scaling needs an open-system model")
    betas = tuple(spec.beta for spec in cfg.model.reservoirs)
    nu_s = cfg.state.weights if cfg.state.weights is not None else (0.9, 0.1)
    study = scaling_study(
        cfg.scaling.chain_lengths,
        betas=betas,
        reservoir=cfg.scaling.reservoir,
        beta_prime=cfg.scaling.beta_prime,
        t=cfg.scaling.time,
        nu_s=nu_s,
        dim_s=cfg.model.dim_s,
        coupling_strength=cfg.model.coupling_strength,
        level_splitting=cfg.model.level_splitting,
    )
    lines = ["n,w1"] + [f"{n},{_g17(w1)}" for n, w1 in study.table()]
    _write_text(out / "scaling.csv", "\n".join(lines))
    report = {
        "params": study.params,
        "passed": study.passed,
        "rows": [
            {
                "chain_length": row.chain_length,
                "dim": row.dim,
                "w1": row.w1,
                "passed": row.passed,
                "reports": [r.to_dict() for r in row.reports],
            }
            for row in study.rows
        ],
    }
    _write_json(out / "scaling_report.json", report)
    for row in study.rows:
        state = "ok" if row.passed else "FAILED"
        print(f"n={row.chain_length} dim={row.dim} w1={_g17(row.w1)} checks={state}")
    print("wrote scaling.csv and scaling_report.json")
    return EXIT_OK if study.passed else EXIT_CHECK_FAILED


def _fixture_two_level() -> ExperimentConfig:
    return ExperimentConfig(
        model=ModelConfig(
            kind="two-level",
            omega_diag=(0.75, 0.25),
            hamiltonian=((0.0, 1.0), (1.0, 0.0)),
        ),
        grids=GridsConfig(times=(1.5707963267948966,)),
    )


def _fixture_open_system() -> ExperimentConfig:
    from .models import ReservoirSpec

    return ExperimentConfig(
        model=ModelConfig(
            kind="open-system",
            dim_s=2,
            level_splitting=1.0,
            coupling_strength=0.5,
            reservoirs=(ReservoirSpec(1, 1.0), ReservoirSpec(1, 2.0)),
        ),
        grids=GridsConfig(times=(0.25, 0.5, 1.0, 2.0)),
    )


def _cmd_emit_fixtures(out: Path) -> int:
    fixtures = [
        ("two_level", _fixture_two_level()),
        ("open_system", _fixture_open_system()),
    ]
    for stem, cfg in fixtures:
        _write_text(out / f"{stem}.toml", emit_config(cfg))
        model = build_model(cfg)
        reports = battery(model, times=cfg.grids.times, seed=DEFAULT_SEED, jobs=1)
        measures = {}
        for t in cfg.grids.times:
            q = protocol_measure(model.reference, model.reference, model.hamiltonian, t)
            measures[_g17(t)] = [[s, w] for s, w in q.atoms()]
        manifest = {
            "config": f"{stem}.toml",
            "fingerprint": model.fingerprint,
            "reports": [
                {k: v for k, v in r.to_dict().items() if k != "seconds"} for r in reports
            ],
            "reference_measures": measures,
        }
        _write_json(out / f"{stem}_manifest.json", manifest)
        print(f"wrote {stem}.toml and {stem}_manifest.json")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmep",
        description="Two-times measurement entropy production toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("simulate", "compute the entropy production measure over the time grid"),
        ("verify", "run the full check battery and write JSON reports"),
        ("scan", "evaluate the characteristic function over the alpha grid"),
        ("scaling", "run the chain-length scaling study"),
        ("emit-fixtures", "write canonical configs and expected-output manifests"),
    ]
    for name, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        if name != "emit-fixtures":
            p.add_argument("--config", required=True, help="path to a TOML experiment config")
        p.add_argument("--out", default=None, help="output directory (default: config out_dir or .)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for independent jobs")
        p.add_argument("--seed", type=int, default=None, help="override the configured random seed")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "emit-fixtures":
            return _cmd_emit_fixtures(_out_dir(args, None))
        cfg = load_config(args.config)
        out = _out_dir(args, cfg)
        jobs = max(1, args.jobs)
        handler = {
            "simulate": _cmd_simulate,
            "verify": _cmd_verify,
            "scan": _cmd_scan,
            "scaling": _cmd_scaling,
        }[args.command]
        return handler(cfg, out, jobs, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
