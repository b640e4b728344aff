"""Command line interface: serve, replay, bench."""

from __future__ import annotations

import argparse
import logging
import sys
import threading

from streammap import __version__
from streammap.config import PipelineConfig, load_config

log = logging.getLogger(__name__)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (else $STREAMMAP_CONFIG)")
    parser.add_argument("--tick-ms", type=int, dest="tick_ms")
    parser.add_argument("--theta", type=float, dest="theta")
    parser.add_argument("--k", type=int, dest="k")
    parser.add_argument("--window-capacity", type=int, dest="window_capacity")
    parser.add_argument("--window-max-age-ms", type=int, dest="window_max_age_ms")
    parser.add_argument("--cell-divisor", type=float, dest="cell_divisor")
    parser.add_argument("--margin-cells", type=float, dest="margin_cells")
    parser.add_argument("--refresh-utilization", type=float, dest="refresh_utilization")
    parser.add_argument("--refresh-period-ticks", type=int, dest="refresh_period_ticks")
    parser.add_argument("--layout-max-iter", type=int, dest="layout_max_iter")
    parser.add_argument("--layout-rtol", type=float, dest="layout_rtol")
    parser.add_argument("--seed", type=int, dest="seed")
    parser.add_argument("--replay-speed", type=float, dest="replay_speed")
    parser.add_argument("--palette", dest="palette_path")
    parser.add_argument("--stopwords", dest="stopwords_path")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "tick_ms", "theta", "k", "window_capacity", "window_max_age_ms",
            "cell_divisor", "margin_cells", "refresh_utilization",
            "refresh_period_ticks", "layout_max_iter", "layout_rtol", "seed",
            "replay_speed", "palette_path", "stopwords_path",
        )
    }
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streammap",
                                     description="live text-stream topic maps")
    parser.add_argument("--version", action="version", version=f"streammap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the live map server")
    serve.add_argument("--listen", default="127.0.0.1:8571", help="host:port")
    serve.add_argument(
        "--source", default="http",
        help="message source: 'replay:<file>', 'stdin', or 'http' (POST /ingest only)",
    )
    _add_config_flags(serve)

    replay = sub.add_parser("replay", help="batch-replay a file into frame files")
    replay.add_argument("--in", dest="infile", required=True)
    replay.add_argument("--out", dest="outdir", required=True)
    replay.add_argument("--no-svg", action="store_true", help="skip SVG export")
    _add_config_flags(replay)

    bench = sub.add_parser("bench", help="batch-replay and print the metrics CSV")
    bench.add_argument("--in", dest="infile", required=True)
    _add_config_flags(bench)
    return parser


def _feed(hub, source) -> None:
    for msg in source:
        hub.ingest(msg)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from streammap.server import create_app
    from streammap.sources import ReplaySource, StdinSource

    config = _config_from_args(args)
    app = create_app(config)
    hub = app.state.hub

    spec = args.source
    if spec.startswith("replay:"):
        speed = config.replay_speed if config.replay_speed > 0 else 1.0
        source = ReplaySource(spec.split(":", 1)[1], speed=speed)
    elif spec == "stdin":
        source = StdinSource()
    elif spec == "http":
        source = None
    else:
        print(f"unknown --source {spec!r}", file=sys.stderr)
        return 2
    if source is not None:
        threading.Thread(target=_feed, args=(hub, source), daemon=True).start()

    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    from streammap.pipeline import run_replay

    config = _config_from_args(args)
    try:
        result = run_replay(args.infile, config, args.outdir, write_svg=not args.no_svg)
    except OSError as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.frames} frames to {args.outdir} "
          f"({result.malformed} malformed, {result.duplicates} duplicate ids)")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    from streammap.pipeline import run_replay

    config = _config_from_args(args)
    try:
        result = run_replay(args.infile, config, out_dir=None)
    except OSError as exc:
        print(f"bench failed: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(result.csv_text)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = {"serve": cmd_serve, "replay": cmd_replay, "bench": cmd_bench}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
