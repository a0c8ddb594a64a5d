"""Command-line entry point.

Subcommands cover the whole pipeline: serve the realtime game, simulate
bot populations into the event log, export bubble maps, aggregate them
into importance maps, run the statistical battery, compare against
external heatmaps, and print the leaderboard.

Exit codes: 0 success, 1 usage error, 2 data error (with a single
machine-readable ``error: <reason>`` line on the diagnostic stream).
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from coguess import config as config_mod
from coguess import manifest as manifest_mod, report, scenarios, stats
from coguess.bots import simulate_population
from coguess.config import ConfigError
from coguess.lobby import Leaderboard
from coguess.manifest import ManifestError
from coguess.maps import MapError, load_heatmaps, write_grid, write_grid_csv
from coguess.stats import StatsError, TooFewPairs
from coguess.storage import EventLog, StorageError, export_bubble_maps, \
    load_exported_maps, replay


class DataError(Exception):
    """Raised for missing or unusable input data; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"usage error: {message}\n")
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="coguess",
                     description="cooperative object-recognition game and "
                                 "bubble-map analysis pipeline")
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, help="seed for randomized steps")
    parser.add_argument("--data-dir", help="root for logs, exports, reports")
    parser.add_argument("--verbose", action="store_true",
                        help="progress detail on stderr")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker cap for parallel file work")
    parser.add_argument("--out", help="write report here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the realtime game server")
    p.add_argument("--host")
    p.add_argument("--tcp-port", type=int)
    p.add_argument("--ws-port", type=int)
    p.add_argument("--manifest", help="image manifest JSONL")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="play bot populations into the log")
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--images", type=int, default=10)
    p.add_argument("--scenario", choices=["hotspot", "uniform", "mixed"],
                   default="hotspot")
    p.add_argument("--width", type=int, default=100)
    p.add_argument("--height", type=int, default=100)
    p.add_argument("--skip-after", type=int, default=400)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export", help="rasterize logged games to bubble maps")
    p.add_argument("--experiment")
    p.add_argument("--include-bots", action="store_true")
    p.add_argument("--include-abandoned", action="store_true")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("aggregate", help="mean exported maps into importance maps")
    p.add_argument("--experiment")
    p.add_argument("--include-skipped", action="store_true")
    p.add_argument("--csv", action="store_true",
                   help="also write grids as CSV")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("analyze", help="run the statistical battery")
    p.add_argument("--experiment")
    p.add_argument("--iterations", type=int)
    p.add_argument("--include-skipped", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="correlate against external heatmaps")
    p.add_argument("--heatmaps", required=True,
                   help="heatmap manifest JSONL")
    p.add_argument("--source", help="restrict to one heatmap source")
    p.add_argument("--experiment")
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("leaderboard", help="print the board from the log")
    p.set_defaults(func=cmd_leaderboard)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_mod.load_config(args.config)
        if args.seed is not None:
            config_mod.apply_overrides(cfg, {("analysis", "seed"): args.seed})
        if args.data_dir is not None:
            config_mod.apply_overrides(cfg, {("paths", "data_dir"): args.data_dir})
        if args.jobs < 1:
            raise DataError("--jobs must be >= 1")
        return args.func(args, cfg)
    except (DataError, StorageError, StatsError, MapError, ManifestError,
            ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _data_dir(cfg) -> Path:
    return Path(config_mod.get_str(cfg, "paths", "data_dir"))


def _events_dir(cfg) -> Path:
    return _data_dir(cfg) / "events"


def _experiment(args, cfg) -> str:
    if getattr(args, "experiment", None):
        return args.experiment
    return config_mod.get_str(cfg, "analysis", "experiment")


def _seed(cfg) -> int:
    return config_mod.get_int(cfg, "analysis", "seed")


def _iterations(args, cfg) -> int:
    if getattr(args, "iterations", None):
        return args.iterations
    return config_mod.get_int(cfg, "analysis", "iterations")


def _open_log(cfg) -> EventLog:
    events = _events_dir(cfg)
    log = EventLog(events, shards=config_mod.get_int(cfg, "analysis", "shards"))
    if not log.files():
        raise DataError(f"no events found under {events}")
    return log


def _note(args, text: str) -> None:
    if args.verbose:
        print(text, file=sys.stderr)


def _emit_report(args, text: str, tables: dict[str, str]) -> None:
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        for name, body in tables.items():
            (out.parent / name).write_text(body, encoding="utf-8")
        print(f"report written to {out}")
    else:
        print(text, end="")


def _load_maps(args, cfg):
    experiment = _experiment(args, cfg)
    export_root = _data_dir(cfg) / "exports" / experiment
    include_skipped = bool(getattr(args, "include_skipped", False))
    if not (export_root / "index.csv").exists():
        raise DataError("no bubble maps found")
    maps = load_exported_maps(export_root, include_skipped=include_skipped)
    if not maps:
        raise DataError("no bubble maps found")
    return maps, experiment


def cmd_serve(args, cfg) -> int:
    from coguess.server import GameServer, SessionHub

    game_cfg = config_mod.game_config(cfg)
    manifest_path = args.manifest or config_mod.get_str(cfg, "paths", "manifest")
    if manifest_path:
        records = manifest_mod.load_manifest(manifest_path)
    else:
        records = scenarios.synthetic_manifest(game_cfg.rounds_per_game)
        _note(args, f"no manifest configured; synthesized "
                    f"{len(records)} images")
    if len(records) < game_cfg.rounds_per_game:
        raise DataError(
            f"manifest has {len(records)} images; "
            f"{game_cfg.rounds_per_game} rounds need at least that many")
    log = EventLog(_events_dir(cfg),
                   shards=config_mod.get_int(cfg, "analysis", "shards"))
    hub = SessionHub(records, game_cfg, log=log, seed=_seed(cfg))
    host = args.host or config_mod.get_str(cfg, "server", "host")
    tcp_port = args.tcp_port if args.tcp_port is not None \
        else config_mod.get_int(cfg, "server", "tcp_port")
    ws_port = args.ws_port if args.ws_port is not None \
        else config_mod.get_int(cfg, "server", "ws_port")
    server = GameServer(hub, host=host, tcp_port=tcp_port, ws_port=ws_port,
                        tick_ms=config_mod.get_float(cfg, "server", "tick_ms"))

    async def run() -> None:
        tcp, ws = await server.start()
        print(f"listening on tcp://{host}:{tcp} and ws://{host}:{ws}")
        try:
            await asyncio.Event().wait()
        finally:
            await server.stop()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    finally:
        log.close()
    return 0


def _build_scenario(args, cfg):
    seed = _seed(cfg)
    dims = (args.height, args.width)
    if args.scenario == "hotspot":
        return scenarios.hotspot_population(n_images=args.images, dims=dims,
                                            seed=seed + 1)
    if args.scenario == "uniform":
        return scenarios.uniform_population(n_images=args.images, dims=dims)
    return scenarios.mixed_population(args.pairs, n_images=args.images,
                                      dims=dims, seed=seed + 1)


def cmd_simulate(args, cfg) -> int:
    seed = args.seed if args.seed is not None else _seed(cfg)
    records, teachers, students, game_cfg = _build_scenario(args, cfg)
    data_dir = _data_dir(cfg)
    with EventLog(data_dir / "events",
                  shards=config_mod.get_int(cfg, "analysis", "shards")) as log:
        sessions = simulate_population(records, args.pairs, teachers, students,
                                       seed=seed, config=game_cfg, log=log,
                                       skip_after=args.skip_after)
    manifest_mod.write_manifest(records, data_dir / "manifest.jsonl")
    total_rounds = sum(len(s.rounds) for s in sessions)
    print(f"simulated {len(sessions)} pairs, {total_rounds} rounds "
          f"({args.scenario}, seed {seed}) -> {data_dir / 'events'}")
    return 0


def cmd_export(args, cfg) -> int:
    log = _open_log(cfg)
    experiment = _experiment(args, cfg)
    out_root = _data_dir(cfg) / "exports"
    root = export_bubble_maps(log, out_root, experiment=experiment,
                              include_bots=args.include_bots,
                              include_abandoned=args.include_abandoned)
    n = sum(1 for _ in root.glob("*/*.fimap"))
    print(f"exported {n} bubble maps -> {root}")
    return 0


def cmd_aggregate(args, cfg) -> int:
    maps, experiment = _load_maps(args, cfg)
    importance = report.group_importance(maps)
    out_root = _data_dir(cfg) / "importance" / experiment
    out_root.mkdir(parents=True, exist_ok=True)

    def write_one(item):
        image_id, im = item
        write_grid(im.grid, out_root / f"{image_id}.fimap")
        if args.csv:
            write_grid_csv(im.grid, out_root / f"{image_id}.csv")

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        list(pool.map(write_one, sorted(importance.items())))
    index = ["image_id,n_pairs"]
    index += [f"{image_id},{im.n_pairs}"
              for image_id, im in sorted(importance.items())]
    (out_root / "index.csv").write_text("\n".join(index) + "\n",
                                        encoding="utf-8")
    print(f"aggregated {len(importance)} importance maps -> {out_root}")
    return 0


def cmd_analyze(args, cfg) -> int:
    maps, experiment = _load_maps(args, cfg)
    seed = _seed(cfg)
    iterations = _iterations(args, cfg)
    _note(args, f"analyzing {len(maps)} maps "
                f"({iterations} iterations, seed {seed})")
    split = stats.split_half_consistency(maps, n_iterations=iterations,
                                         seed=seed)
    try:
        median = stats.median_split_efficiency(maps, n_iterations=iterations,
                                               seed=seed)
    except TooFewPairs:
        median = None
    params = {"experiment": experiment, "seed": seed,
              "iterations": iterations, "n_maps": len(maps),
              "include_skipped": bool(args.include_skipped)}
    text = report.analysis_report(maps, split, median, params)
    tables = report.analysis_tables(maps, split, median)
    _emit_report(args, text, tables)
    return 0


def cmd_compare(args, cfg) -> int:
    maps, experiment = _load_maps(args, cfg)
    importance = report.group_importance(maps)
    manifest_path = _data_dir(cfg) / "manifest.jsonl"
    configured = config_mod.get_str(cfg, "paths", "manifest")
    if configured:
        manifest_path = Path(configured)
    if not manifest_path.exists():
        raise DataError(f"no image manifest at {manifest_path}")
    records = manifest_mod.load_manifest(manifest_path)
    category_of = {image_id: rec.category for image_id, rec in records.items()}
    heatmaps = load_heatmaps(args.heatmaps)
    by_source: dict[str, dict] = {}
    for hm in heatmaps.values():
        by_source.setdefault(hm.source, {})[hm.image_id] = hm
    if args.source:
        if args.source not in by_source:
            raise DataError(f"no heatmaps with source {args.source}")
        by_source = {args.source: by_source[args.source]}
    seed = _seed(cfg)
    iterations = _iterations(args, cfg)
    split = stats.split_half_consistency(maps, n_iterations=iterations,
                                         seed=seed)
    results = []
    for source in sorted(by_source):
        covered = {image_id: importance[image_id]
                   for image_id in importance if image_id in by_source[source]}
        if not covered:
            raise DataError(f"{source} heatmaps cover no exported images")
        result = stats.compare_to_external(covered, by_source[source],
                                           category_of, source=source)
        result.permutation_p = stats.permutation_p(split,
                                                   result.overall_mean_rho)
        results.append(result)
    params = {"experiment": experiment, "seed": seed,
              "iterations": iterations, "heatmaps": str(args.heatmaps)}
    text = report.comparison_report(results, params)
    _emit_report(args, text, report.comparison_tables(results))
    return 0


def cmd_leaderboard(args, cfg) -> int:
    log = _open_log(cfg)
    board = Leaderboard()
    for session_id in log.session_ids():
        replayed = replay(log, session_id)
        if replayed.with_bot or replayed.abandoned:
            continue
        session = replayed.session
        if not session.complete:
            continue
        last_at = max(e.at for e in log.iter_events()
                      if e.session_id == session_id)
        team = f"{session.player_a}+{session.player_b}"
        board.record_result(team, session.score, last_at)
    rows = board.export_rows()
    if not rows:
        print("leaderboard: empty")
        return 0
    print("rank team score completed_at")
    for rank, team, score, completed_at in rows:
        print(f"{rank} {team} {score} {completed_at:.0f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
