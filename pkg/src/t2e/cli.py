"""Batch command line: run episode suites, safe-zone snapshots, map tools,
the policy bridge, and log replay verification.

Exit codes: 0 success, 2 config error, 3 map error, 4 safe-zone position
error, 5 bridge protocol violation.  Machine-readable output is JSON.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from . import mapgen
from .bridge import BridgeProtocolError, serve_episode
from .eikonal import (SourceInObstacleError, SourceOutOfBoundsError,
                      compute_asz, soa_series)
from .engine import (SPEED_RATIO_PRESETS, EpisodeConfig, SpawnConfig,
                     TrajectoryLog, compute_metrics, run_episode)
from .gridmap import (MAP_SUFFIX, OutOfBoundsError, ParseError,
                      ValidationError, find_map, load_map, save_map,
                      shipped_map_paths)
from .rewards import CaptureMethod, RewardConfig, RewardMode

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MAP = 3
EXIT_POSITION = 4
EXIT_PROTOCOL = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _fail(message: str, code: int) -> "CliError":
    return CliError(message, code)


def _load_grid(ref: str):
    try:
        return find_map(ref)
    except FileNotFoundError as exc:
        raise _fail(str(exc), EXIT_MAP) from None
    except (ParseError, ValidationError) as exc:
        raise _fail(f"invalid map {ref!r}: {exc}", EXIT_MAP) from None


def _parse_point(text: str) -> tuple[float, float]:
    try:
        x, y = text.split(",")
        return float(x), float(y)
    except ValueError:
        raise _fail(f"expected X,Y position, got {text!r}", EXIT_CONFIG) from None


def _episode_config(args, map_refs) -> EpisodeConfig:
    reward = RewardConfig(
        mode=RewardMode(args.mode),
        f_thre=args.f_thre,
    )
    method = (CaptureMethod.ASZ_THRESHOLD if args.capture_method == "asz"
              else CaptureMethod.COLLISION_PROXY)
    try:
        return EpisodeConfig(
            map=map_refs if len(map_refs) > 1 else map_refs[0],
            n_captors=args.captors,
            speed_ratio=args.speed_ratio,
            max_steps=args.max_steps,
            seed=args.seed,
            dt=args.dt,
            capture_method=method,
            reward=reward,
            spawn=SpawnConfig(),
        )
    except ValueError as exc:
        raise _fail(str(exc), EXIT_CONFIG) from None


def _add_episode_flags(p: argparse.ArgumentParser):
    p.add_argument("--map", action="append", required=False, default=None,
                   help="map name or path; repeat for per-episode random choice")
    p.add_argument("--captors", type=int, default=3)
    p.add_argument("--speed-ratio", type=float, default=1.0,
                   help="target speed over captor speed, presets "
                        + "/".join(str(r) for r in SPEED_RATIO_PRESETS))
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--mode", choices=["cooperative", "competitive"],
                   default="cooperative")
    p.add_argument("--capture-method", choices=["proxy", "asz"], default="proxy")
    p.add_argument("--f-thre", type=float, default=0.5)
    p.add_argument("--captor-policy", default="heuristic-pursuer")
    p.add_argument("--target-policy", default="heuristic-evader")


def cmd_run(args) -> int:
    if args.manifest:
        try:
            manifest = json.loads(Path(args.manifest).read_text())
            episodes = manifest.get("episodes", 1)
            base = EpisodeConfig.from_json(manifest["config"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise _fail(f"bad manifest {args.manifest!r}: {exc}",
                        EXIT_CONFIG) from None
        out_dir = Path(manifest.get("output_dir", args.out))
        emit = set(manifest.get("emit", ["logs", "metrics"]))
        captor_policy = manifest.get("captor_policy", args.captor_policy)
        target_policy = manifest.get("target_policy", args.target_policy)
    else:
        if not args.map:
            raise _fail("--map or --manifest is required", EXIT_CONFIG)
        episodes = args.episodes
        base = _episode_config(args, args.map)
        out_dir = Path(args.out)
        emit = set(args.emit.split(",")) if args.emit else {"logs", "metrics"}
        captor_policy = args.captor_policy
        target_policy = args.target_policy
    if episodes < 1:
        raise _fail("episodes must be >= 1", EXIT_CONFIG)
    for ref in base.map_refs():
        _load_grid(ref)  # fail fast on bad maps

    out_dir.mkdir(parents=True, exist_ok=True)
    policies = {"captor": captor_policy, "target": target_policy}
    record_obs = "obs" in emit

    from dataclasses import replace
    seeds = [base.seed + i for i in range(episodes)]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            logs = list(pool.map(
                _run_one,
                [(replace(base, seed=s), policies, record_obs) for s in seeds]))
    else:
        logs = [_run_one((replace(base, seed=s), policies, record_obs))
                for s in seeds]

    if "logs" in emit or "obs" in emit:
        for log in logs:
            log.write(out_dir / f"ep_{log.config.seed:08d}.jsonl")
    if "soa" in emit:
        soa = {}
        for log in logs:
            grid = log.grid()
            series = soa_series(log, grid, log.config.specs(),
                                every=args.soa_every, f_thre=base.reward.f_thre)
            soa[str(log.config.seed)] = [[s, a] for s, a in series]
        (out_dir / "soa.json").write_text(json.dumps(soa, indent=2))
    metrics = compute_metrics(logs)
    if "metrics" in emit:
        (out_dir / "metrics.json").write_text(
            json.dumps(metrics.to_json(), indent=2) + "\n")
    print(json.dumps(metrics.to_json()))
    print(metrics.table(), file=sys.stderr)
    return EXIT_OK


def _run_one(packed) -> TrajectoryLog:
    config, policies, record_obs = packed
    return run_episode(config, policies, record_observations=record_obs)


def cmd_asz(args) -> int:
    grid = _load_grid(args.map[0] if isinstance(args.map, list) else args.map)
    captors = [_parse_point(p) for p in args.captor]
    target = _parse_point(args.target)
    try:
        report = compute_asz(grid, captors, args.captor_speed, target,
                             args.target_speed, f_thre=args.f_thre)
    except (SourceInObstacleError, SourceOutOfBoundsError, OutOfBoundsError) as exc:
        raise _fail(f"position not in free space: {exc}", EXIT_POSITION) from None
    rendering = report.render(grid)
    if args.out:
        Path(args.out).write_text(rendering)
    else:
        sys.stdout.write(rendering)
    print(json.dumps({"area_m2": report.area, "captured": report.captured}))
    return EXIT_OK


def cmd_bridge(args) -> int:
    if not args.map:
        raise _fail("--map is required", EXIT_CONFIG)
    config = _episode_config(args, args.map)
    if args.endpoint == "stdio":
        reader, writer = sys.stdin, sys.stdout
        close = None
    elif args.endpoint.startswith("tcp:"):
        port = int(args.endpoint.split(":", 1)[1])
        srv = socket.create_server(("127.0.0.1", port))
        conn, _ = srv.accept()
        if args.timeout:
            conn.settimeout(args.timeout)
        reader = conn.makefile("r", encoding="ascii")
        writer = conn.makefile("w", encoding="ascii")
        close = lambda: (reader.close(), writer.close(), conn.close(), srv.close())
    else:
        raise _fail(f"unknown endpoint {args.endpoint!r}", EXIT_CONFIG)
    try:
        log = serve_episode(config, reader, writer,
                            control=args.control,
                            captor_policy=args.captor_policy,
                            target_policy=args.target_policy,
                            record_observations=args.emit_obs or bool(args.log))
        if args.log:
            log.write(Path(args.log))
        return EXIT_OK
    except (BridgeProtocolError, socket.timeout) as exc:
        err = {"v": 1, "error": "protocol", "detail": str(exc)}
        try:
            writer.write(json.dumps(err) + "\n")
            writer.flush()
        except OSError:
            pass
        print(f"bridge protocol violation: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    finally:
        if close:
            close()


def cmd_map_info(args) -> int:
    paths = []
    if args.map:
        try:
            from .gridmap import resolve_map
            paths = [resolve_map(args.map)]
        except FileNotFoundError as exc:
            raise _fail(str(exc), EXIT_MAP) from None
    elif args.dir:
        paths = sorted(Path(args.dir).glob("*" + MAP_SUFFIX))
    else:
        paths = shipped_map_paths()
    infos = []
    for p in paths:
        try:
            grid = load_map(p)
        except (ParseError, ValidationError) as exc:
            raise _fail(f"invalid map {p}: {exc}", EXIT_MAP) from None
        info = mapgen.describe(grid)
        from .engine import map_hash
        info["hash"] = map_hash(grid)
        info["path"] = str(p)
        infos.append(info)
    print(json.dumps(infos if len(infos) != 1 else infos[0], indent=2))
    return EXIT_OK


def cmd_replay(args) -> int:
    from .replay import verify_log

    try:
        log = TrajectoryLog.read(args.log)
    except OSError as exc:
        raise _fail(f"cannot read log {args.log!r}: {exc}", EXIT_CONFIG) from None
    except (ValueError, KeyError) as exc:
        raise _fail(f"malformed log {args.log!r}: {exc}", EXIT_CONFIG) from None
    result = verify_log(log)
    print(json.dumps(result.to_json(), indent=2))
    return EXIT_OK if result.clean else 1


def cmd_gen_maps(args) -> int:
    out = Path(args.out)
    (out / "fixtures").mkdir(parents=True, exist_ok=True)
    built = mapgen.build_standard_set()
    for grid in built.samples:
        save_map(grid, out / f"{grid.name}{MAP_SUFFIX}")
    for grid in built.fixtures:
        save_map(grid, out / "fixtures" / f"{grid.name}{MAP_SUFFIX}")
    print(json.dumps({"samples": len(built.samples),
                      "fixtures": len(built.fixtures), "dir": str(out)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="t2e", description="Target-trapping simulation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a batch of episodes")
    _add_episode_flags(p_run)
    p_run.add_argument("--episodes", type=int, default=1)
    p_run.add_argument("--manifest", help="JSON manifest instead of flags")
    p_run.add_argument("--out", default="runs")
    p_run.add_argument("--emit", default="logs,metrics",
                       help="comma list of logs,metrics,soa,obs")
    p_run.add_argument("--soa-every", type=int, default=10)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.set_defaults(func=cmd_run)

    p_asz = sub.add_parser("asz", help="compute a safe-zone snapshot")
    p_asz.add_argument("--map", required=True)
    p_asz.add_argument("--captor", action="append", required=True,
                       help="captor position X,Y in meters; repeatable")
    p_asz.add_argument("--target", required=True, help="target position X,Y")
    p_asz.add_argument("--captor-speed", type=float, default=1.0)
    p_asz.add_argument("--target-speed", type=float, default=1.0)
    p_asz.add_argument("--f-thre", type=float, default=0.5)
    p_asz.add_argument("--out", help="write the mask rendering to a file")
    p_asz.set_defaults(func=cmd_asz)

    p_bridge = sub.add_parser("bridge", help="serve the policy bridge")
    _add_episode_flags(p_bridge)
    p_bridge.add_argument("--control", choices=["captors", "target", "all"],
                          default="captors")
    p_bridge.add_argument("--endpoint", default="stdio",
                          help="stdio or tcp:PORT")
    p_bridge.add_argument("--timeout", type=float, default=None,
                          help="client read timeout in seconds (tcp only)")
    p_bridge.add_argument("--emit-obs", action="store_true",
                          help="embed observations in the episode log")
    p_bridge.add_argument("--log", help="write the episode log to this path")
    p_bridge.set_defaults(func=cmd_bridge)

    p_info = sub.add_parser("map-info", help="describe maps")
    p_info.add_argument("--map")
    p_info.add_argument("--dir")
    p_info.set_defaults(func=cmd_map_info)

    p_replay = sub.add_parser("replay",
                              help="re-derive rewards/states from a log and diff")
    p_replay.add_argument("log")
    p_replay.set_defaults(func=cmd_replay)

    p_gen = sub.add_parser("gen-maps", help="regenerate the shipped map set")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen_maps)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
