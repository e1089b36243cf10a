"""Command line entry point: file-based access to every capability.

Exit codes: 0 success, 1 domain failure (fall, no safe region, solver
failure), 2 usage error, 3 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import criteria as crit
from . import locomotion as loco
from . import qpsolver
from . import regions as reg
from . import safenet
from . import sim as simulation
from .pgm import PgmError, read_pgm, write_pgm
from .terrain import (GridSpec, TerrainError, extract_window, generate_flat,
                      generate_rough, generate_stairs, load_terrain_pgm,
                      sample_height, save_terrain_pgm)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_IO = 3


class DomainFailure(RuntimeError):
    pass


def _parse_vec(text: str, n: int) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
    return np.array([float(p) for p in parts])


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_mask_pgm(mask: crit.SafetyMask, path: Path) -> None:
    write_pgm(path, np.where(mask.safe, 255, 0).astype(np.uint8), 255)
    sidecar = {"center_xy": list(mask.center_xy), "resolution": mask.resolution}
    path.with_suffix(".json").write_text(json.dumps(sidecar))


def _load_mask_pgm(path: Path) -> crit.SafetyMask:
    pixels, maxval = read_pgm(path)
    if maxval != 255:
        raise PgmError(f"{path}: mask PGM must be 8-bit")
    safe = pixels >= 128
    center = (0.0, 0.0)
    resolution = 0.02
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        center = tuple(meta.get("center_xy", center))
        resolution = float(meta.get("resolution", resolution))
    return crit.SafetyMask(safe=safe, kinematic=safe, roughness=safe,
                           frontal=safe, leg=safe, center_xy=center,
                           resolution=resolution)


# ---------------------------------------------------------------------------
# subcommands


def cmd_terrain(args) -> int:
    out = _outdir(args)
    spec = GridSpec(args.rows, args.cols, args.resolution, tuple(args.origin))
    if args.kind == "stairs":
        grid = generate_stairs(args.rise, args.run, args.steps, spec)
    elif args.kind == "rough":
        grid = generate_rough(args.amplitude, args.correlation, args.seed, spec)
    else:
        grid = generate_flat(spec)
    path = out / f"{args.kind}.pgm"
    save_terrain_pgm(grid, path)
    print(f"terrain {args.kind}: {grid.n_rows}x{grid.n_cols} cells @ {grid.resolution} m "
          f"-> {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    out = _outdir(args)
    grid = load_terrain_pgm(Path(args.terrain))
    geom = crit.default_geometry()
    center = args.center if args.center is not None else args.hip[:2]
    window = extract_window(grid, center)
    query = crit.FootQuery(
        leg_id=args.leg, hip_touchdown=args.hip, foot_liftoff=args.liftoff,
        stance_base_heights=np.full(geom.n_phase_samples, args.hip[2]))
    mask = crit.evaluate(window, query, geom)
    _save_mask_pgm(mask, out / "mask.pgm")
    diag = {
        "false_counts": mask.false_counts(),
        "safe_cells": int(mask.safe.sum()),
        "eval_time_us": mask.eval_time_us,
    }
    (out / "diagnostics.json").write_text(json.dumps(diag, indent=2))
    print(f"safety mask: {int(mask.safe.sum())}/1024 safe cells "
          f"({mask.eval_time_us:.0f} us) -> {out / 'mask.pgm'}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    out = _outdir(args)
    mask = _load_mask_pgm(Path(args.mask))
    geom = crit.default_geometry()
    selection = reg.decompose_and_select(mask, args.nominal, geom)
    payload = {
        "nominal_xy": args.nominal.tolist(),
        "selected_index": selection.selected_index,
        "regions": [
            {
                "vertices": r.polygon.vertices.tolist(),
                "normals": r.normals.tolist(),
                "offsets": r.offsets.tolist(),
                "area": r.area,
                "terrain_z_ref": r.terrain_z_ref,
                "selected": i == selection.selected_index,
            }
            for i, r in enumerate(selection.regions)
        ],
    }
    (out / "regions.json").write_text(json.dumps(payload, indent=2))
    if selection.no_region:
        print("no safe region survives decomposition")
        return EXIT_DOMAIN
    print(f"{len(selection.regions)} region(s); selected #{selection.selected_index} "
          f"area {selection.selected.area:.4f} m^2 -> {out / 'regions.json'}")
    return EXIT_OK


def cmd_qp(args) -> int:
    problem = qpsolver.load_problem(Path(args.infile))
    sol = qpsolver.solve(problem)
    result = {
        "status": sol.status,
        "iterations": sol.iterations,
        "x": sol.x.tolist(),
        "y": sol.y.tolist(),
        "primal_res": sol.primal_res,
        "dual_res": sol.dual_res,
    }
    if args.out:
        out = _outdir(args)
        (out / "solution.json").write_text(json.dumps(result, indent=2))
    print(f"qp: {sol.status} in {sol.iterations} iters "
          f"(primal {sol.primal_res:.2e}, dual {sol.dual_res:.2e})")
    return EXIT_OK if sol.status == "solved" else EXIT_DOMAIN


def cmd_simulate(args) -> int:
    out = _outdir(args)
    config = simulation.load_config(Path(args.config))
    if args.mode:
        mode = "convex_region" if args.mode == "convex" else args.mode
        config = replace(config, mode=mode)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    log = simulation.run_scenario(config)
    log.to_csv(out / f"{config.mode}.csv")
    summary = log.summary()
    (out / f"{config.mode}_summary.json").write_text(json.dumps(summary, indent=2))
    print(f"simulate [{config.mode}]: fall={summary['fall']} "
          f"peak roll {summary['peak_roll']:.3f} rad, peak pitch {summary['peak_pitch']:.3f} rad")
    return EXIT_DOMAIN if summary["fall"] else EXIT_OK


def cmd_compare(args) -> int:
    config = simulation.load_config(Path(args.config))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    report = simulation.compare_modes(config)
    summary = report["summary"]
    if args.out:
        out = _outdir(args)
        for mode, log in report["logs"].items():
            log.to_csv(out / f"{mode}.csv")
        (out / "compare.json").write_text(json.dumps(summary, indent=2))
    for mode in ("convex_region", "heuristic"):
        s = summary[mode]
        print(f"{mode:>13}: fall={s['fall']} peak roll {s['peak_roll']:.3f} rad "
              f"peak pitch {s['peak_pitch']:.3f} rad mean solve {s['mean_solve_us']:.0f} us")
    print(f"convex better: {summary['ordering_ok']}")
    return EXIT_OK if summary["ordering_ok"] else EXIT_DOMAIN


def cmd_dataset(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    samples = safenet.generate_dataset(args.count, args.seed)
    safenet.save_dataset(samples, out)
    n_safe = sum(int(lab.sum()) for _, lab in samples)
    total = args.count * 32 * 32
    print(f"dataset: {args.count} samples, {n_safe}/{total} safe pixels -> {out}")
    return EXIT_OK


def cmd_net(args) -> int:
    weights = safenet.load_weights(Path(args.weights))
    if args.net_cmd == "predict":
        out = _outdir(args)
        grid = load_terrain_pgm(Path(args.terrain))
        window = extract_window(grid, args.center)
        mask = safenet.predict_mask(weights, window)
        _save_mask_pgm(mask, out / "predicted_mask.pgm")
        print(f"predicted {int(mask.safe.sum())}/1024 safe cells "
              f"({mask.eval_time_us:.0f} us) -> {out / 'predicted_mask.pgm'}")
        return EXIT_OK
    # bench
    geom = crit.default_geometry()
    samples = safenet.generate_dataset(args.count, args.seed, geom)
    from .terrain import HeightmapWindow
    windows = [HeightmapWindow((0.0, 0.0), 0.02, h) for h, _ in samples]
    report = safenet.benchmark(weights, windows, geom)
    print(json.dumps(report, indent=2))
    if args.out:
        out = _outdir(args)
        (out / "bench.json").write_text(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    """Control-rate budget: per-tick cost of 4-leg criteria + decomposition + MPC."""
    config = simulation.paper_scenario()
    config = replace(config, duration=min(config.duration, args.duration))
    terrain = config.build_terrain()
    geom = config.geometry
    gait = config.gait
    controller = simulation.MpcController(config.mpc)
    state = simulation.SrbdState(
        p=np.array([0.0, 0.0, simulation._clamped_height(terrain, (0, 0)) + config.base_height]),
        v=np.array([config.v_des[0], config.v_des[1], 0.0]),
        theta=np.zeros(3), omega=np.zeros(3))
    per_tick = []
    t_sim = 0.0
    for tick in range(args.ticks + 1):
        t0 = time.perf_counter()
        stance, phases = loco.contact_state(gait, t_sim)
        plans = [simulation.LegPlan() for _ in range(4)]
        masks_us = 0.0
        for leg in range(4):
            hip = state.p + geom.hip_offsets[leg]
            nominal = np.array([hip[0], hip[1],
                                simulation._clamped_height(terrain, hip[:2])])
            window = extract_window(terrain, nominal[:2])
            query = crit.FootQuery(
                leg_id=leg, hip_touchdown=np.array([hip[0], hip[1], nominal[2] + config.base_height]),
                foot_liftoff=nominal - np.array([0.15, 0.0, 0.0]),
                stance_base_heights=np.full(geom.n_phase_samples, nominal[2] + config.base_height))
            mask = crit.evaluate(window, query, geom)
            selection = reg.decompose_and_select(mask, nominal[:2], geom, window=window)
            if stance[leg]:
                plans[leg].current_position = nominal
                plans[leg].target = simulation.FootholdTarget("fixed", nominal)
            elif selection.selected is not None:
                plans[leg].target = simulation.FootholdTarget(
                    "optimize", np.array([nominal[0], nominal[1], selection.selected.terrain_z_ref]),
                    normals=selection.selected.normals, offsets=selection.selected.offsets)
            else:
                plans[leg].target = simulation.FootholdTarget("fixed", nominal)
        contact_h = np.stack([
            loco.contact_state(gait, t_sim + k * config.mpc.dt)[0]
            for k in range(config.mpc.horizon)])
        x_ref = simulation.build_reference(
            state, config.v_des,
            lambda xy: simulation._clamped_height(terrain, xy) + config.base_height,
            config.mpc)
        controller.solve(state, contact_h, plans, x_ref)
        if tick > 0:  # first tick warms caches (JIT load, factorization)
            per_tick.append(time.perf_counter() - t0)
        t_sim += 1.0 / config.control_rate
        state.p = state.p + np.array([config.v_des[0], config.v_des[1], 0.0]) / config.control_rate
    per_tick_ms = np.asarray(per_tick) * 1e3
    report = {
        "ticks": len(per_tick),
        "mean_ms": float(per_tick_ms.mean()),
        "median_ms": float(np.median(per_tick_ms)),
        "p95_ms": float(np.percentile(per_tick_ms, 95)),
        "budget_ms_150hz": 1000.0 / 150.0,
    }
    print(json.dumps(report, indent=2))
    if args.out:
        out = _outdir(args)
        (out / "bench.json").write_text(json.dumps(report, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="footplan",
                                     description="foothold planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("terrain", help="generate benchmark terrains")
    tsub = p.add_subparsers(dest="terrain_cmd", required=True)
    g = tsub.add_parser("gen", help="generate a terrain and export PGM")
    g.add_argument("--kind", choices=["stairs", "rough", "flat"], required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--rows", type=int, default=200)
    g.add_argument("--cols", type=int, default=300)
    g.add_argument("--resolution", type=float, default=0.02)
    g.add_argument("--origin", type=lambda s: _parse_vec(s, 2), default=np.array([-1.0, -2.0]))
    g.add_argument("--rise", type=float, default=0.08)
    g.add_argument("--run", type=float, default=0.30)
    g.add_argument("--steps", type=int, default=4)
    g.add_argument("--amplitude", type=float, default=0.06)
    g.add_argument("--correlation", type=float, default=0.3)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_terrain)

    p = sub.add_parser("eval", help="evaluate foothold safety on a terrain")
    p.add_argument("--terrain", required=True)
    p.add_argument("--hip", type=lambda s: _parse_vec(s, 3), required=True)
    p.add_argument("--liftoff", type=lambda s: _parse_vec(s, 3), required=True)
    p.add_argument("--center", type=lambda s: _parse_vec(s, 2))
    p.add_argument("--leg", type=int, default=0, choices=range(4))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("decompose", help="convex-decompose a safety mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--nominal", type=lambda s: _parse_vec(s, 2), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("qp", help="QP solver debugging interface")
    qsub = p.add_subparsers(dest="qp_cmd", required=True)
    q = qsub.add_parser("solve", help="solve a problem JSON")
    q.add_argument("--in", dest="infile", required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_qp)

    p = sub.add_parser("simulate", help="run one closed-loop scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["heuristic", "convex", "convex_region"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run both modes on one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dataset", help="dataset export for the trainer")
    dsub = p.add_subparsers(dest="dataset_cmd", required=True)
    dgen = dsub.add_parser("gen", help="generate an SFDS dataset")
    dgen.add_argument("--count", type=int, required=True)
    dgen.add_argument("--seed", type=int, default=0)
    dgen.add_argument("--out", required=True)
    dgen.set_defaults(func=cmd_dataset)

    p = sub.add_parser("net", help="surrogate network inference")
    nsub = p.add_subparsers(dest="net_cmd", required=True)
    npred = nsub.add_parser("predict", help="predict a safety mask")
    npred.add_argument("--weights", required=True)
    npred.add_argument("--terrain", required=True)
    npred.add_argument("--center", type=lambda s: _parse_vec(s, 2), required=True)
    npred.add_argument("--out", required=True)
    npred.set_defaults(func=cmd_net)
    nbench = nsub.add_parser("bench", help="surrogate vs exact criteria benchmark")
    nbench.add_argument("--weights", required=True)
    nbench.add_argument("--count", type=int, default=100)
    nbench.add_argument("--seed", type=int, default=0)
    nbench.add_argument("--out")
    nbench.set_defaults(func=cmd_net)

    p = sub.add_parser("bench", help="control-rate budget of the full pipeline")
    p.add_argument("--ticks", type=int, default=50)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PgmError, TerrainError, safenet.WeightFormatError,
            safenet.DatasetFormatError, json.JSONDecodeError, IsADirectoryError,
            PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (reg.RegionError, qpsolver.QpError, simulation.MpcError, DomainFailure,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
