"""Command-line front end: ``radarbf simulate | process | score``.

Standard output is line oriented.  Scalars are ``key = value`` lines and
tables start with a ``# col col ...`` header followed by space-separated
rows.  Every command first echoes the effective settings as
``setting.<name> = value`` lines.

Exit codes: 0 success, 2 invalid input, 3 malformed file, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .config import RadarConfig, default_config, load_config, load_scene
from .errors import RadarError, ValidationError

EXIT_OK, EXIT_INPUT, EXIT_FORMAT, EXIT_NUMERICAL = 0, 2, 3, 4
TABLE_II_RESOLUTIONS = (0.2, 0.1, 0.05, 0.02, 0.01)


def _out(line: str = "") -> None:
    sys.stdout.write(line + "\n")


def _echo_settings(cfg: RadarConfig, extra: dict | None = None) -> None:
    wf, geo = cfg.waveform, cfg.geometry
    items = {
        "carrier_frequency_hz": wf.carrier_frequency,
        "chirp_slope_hz_per_s": wf.chirp_slope,
        "sample_rate_hz": wf.sample_rate,
        "samples_per_chirp": wf.samples_per_chirp,
        "chirps_per_frame": wf.chirps_per_frame,
        "chirp_interval_s": wf.chirp_interval,
        "tdm_interleaved": wf.tdm_interleaved,
        "range_resolution_m": wf.range_resolution,
        "velocity_resolution_mps": wf.velocity_resolution,
        "antennas": geo.num_antennas,
        "zero_elevation_antennas": len(geo.zero_elevation_indices),
        "transmitters": geo.num_tx,
    }
    items.update(cfg.pipeline.describe())
    items.update(extra or {})
    for k, v in items.items():
        _out(f"setting.{k} = {_fmt(v)}")


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return f"{v:.10g}"
    return str(v)


def _config(path) -> RadarConfig:
    return load_config(path) if path else default_config()


def cmd_simulate(args) -> int:
    from .radar_io import write_cube
    from .scene import expected_detection, simulate

    cfg = _config(args.config)
    scene = load_scene(args.scene)
    _echo_settings(cfg, {"sample_format": args.format, "noise_std": scene.noise_std,
                         "seed": scene.rng_seed})
    cube = simulate(scene, cfg.waveform, cfg.geometry)
    write_cube(args.out, cube, args.format)
    _out(f"scatterers = {len(scene.scatterers)}")
    _out("# scatterer range_bin mu_bin nu_bin doppler_bin")
    for i, s in enumerate(scene.scatterers):
        e = expected_detection(s, cfg.waveform, cfg.pipeline.grid)
        _out(f"{i} {e.range_bin} {e.mu_bin} {e.nu_bin} {e.doppler_bin}")
    return EXIT_OK


def cmd_process(args) -> int:
    from .capon import process_frame
    from .fft_baseline import process_frame_fft
    from .radar_io import read_cube, write_pointcloud

    cfg = _config(args.config)
    pipe = cfg.pipeline
    if args.pipeline:
        pipe = pipe.with_(pipeline=args.pipeline)
    cfg = RadarConfig(cfg.waveform, cfg.geometry, pipe)
    _echo_settings(cfg, {"output_format": args.format})
    cube = read_cube(args.cube, cfg.waveform, cfg.geometry)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    run = process_frame if pipe.pipeline == "capon" else process_frame_fft
    points = run(cube, pipe, timings)
    total = time.perf_counter() - t0
    write_pointcloud(points, args.out, args.format)
    _out(f"points = {len(points)}")
    for stage, sec in timings.items():
        _out(f"timing.{stage}_s = {sec:.6f}")
    _out(f"timing.total_s = {total:.6f}")
    return EXIT_OK


def _parse_resolutions(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad --resolutions value {text!r}") from exc
    if not vals or any(not v > 0 for v in vals):
        raise ValidationError("--resolutions needs positive numbers")
    return vals


def cmd_score(args) -> int:
    from .metrics import EmptyCloudError, chamfer_table, format_chamfer_table, recovery_report
    from .radar_io import cloud_to_radar_points, read_pointcloud

    cfg = _config(args.config)
    resolutions = _parse_resolutions(args.resolutions)
    _echo_settings(cfg, {"resolutions": ",".join(f"{r:g}" for r in resolutions)})
    est = read_pointcloud(args.points)
    if args.scene:
        scene = load_scene(args.scene)
        rep = recovery_report(cloud_to_radar_points(est, cfg.waveform), scene,
                              cfg.waveform, cfg.pipeline.grid)
        sys.stdout.write(rep.to_text())
        sys.stdout.write(rep.to_table())
    else:
        truth = read_pointcloud(args.truth)
        if len(est) == 0 or len(truth) == 0:
            raise EmptyCloudError("cannot score an empty point cloud")
        sys.stdout.write(format_chamfer_table(chamfer_table(est, truth, resolutions)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radarbf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize a cube from a scene file")
    s.add_argument("scene")
    s.add_argument("--config", help="radar/pipeline YAML (default: built-in)")
    s.add_argument("--out", required=True, help="output cube file")
    s.add_argument("--format", choices=("cf32", "ci16"), default="cf32")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("process", help="turn a cube into a point cloud")
    s.add_argument("cube")
    s.add_argument("--config")
    s.add_argument("--pipeline", choices=("capon", "fft"),
                   help="overrides the config file's pipeline")
    s.add_argument("--out", required=True, help="output point-cloud file")
    s.add_argument("--format", choices=("table", "binary"), default="table")
    s.set_defaults(func=cmd_process)

    s = sub.add_parser("score", help="score a point cloud against a scene or a truth cloud")
    s.add_argument("points")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--scene", help="scene file: recovery report")
    g.add_argument("--truth", help="truth point cloud: Chamfer table")
    s.add_argument("--config")
    s.add_argument("--resolutions", default=",".join(f"{r:g}" for r in TABLE_II_RESOLUTIONS))
    s.set_defaults(func=cmd_score)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RadarError as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, EXIT_INPUT)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(exc, EXIT_NUMERICAL)


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(f"radarbf: error: {exc}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
