"""livehost command line: serve-dialogue, serve-media, replay."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .config import load_config
from .session import LEGAL_EDGES, SessionStage


def _add_service_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML config file overlaying the defaults")
    parser.add_argument("--host", help="listen address")
    parser.add_argument("--port", type=int, help="listen port")
    parser.add_argument("--catalogue", type=Path, help="catalogue file path")


def _overlaid_config(args: argparse.Namespace) -> dict:
    cfg = load_config(args.config)
    if args.host:
        cfg["service"]["listen_host"] = args.host
    if getattr(args, "catalogue", None):
        cfg["service"]["catalogue_path"] = str(args.catalogue)
    return cfg


def serve_dialogue(args: argparse.Namespace) -> int:
    import uvicorn

    from .services import create_dialogue_app

    cfg = _overlaid_config(args)
    if args.backend_endpoint:
        cfg["service"]["backend_endpoint"] = args.backend_endpoint
    if args.media_endpoint:
        cfg["service"]["media_endpoint"] = args.media_endpoint
    if args.event_log_dir:
        cfg["service"]["event_log_dir"] = str(args.event_log_dir)
    if args.seed is not None:
        cfg["service"]["stub_seed"] = args.seed
    if args.hold_ms is not None:
        cfg["session"]["hold_period_ms"] = args.hold_ms
    port = args.port or cfg["service"]["dialogue_port"]
    uvicorn.run(create_dialogue_app(cfg), host=cfg["service"]["listen_host"], port=port)
    return 0


def serve_media(args: argparse.Namespace) -> int:
    import uvicorn

    from .services import create_media_app

    cfg = _overlaid_config(args)
    port = args.port or cfg["service"]["media_port"]
    uvicorn.run(create_media_app(cfg), host=cfg["service"]["listen_host"], port=port)
    return 0


def replay(args: argparse.Namespace) -> int:
    """Validate an event log (gapless sequence, legal stage edges) and print a
    human-readable transcript."""
    path: Path = args.event_log
    stage = SessionStage.IDLE_NARRATION  # Init->IdleNarration precedes the log
    expected_seq = 1
    problems: list[str] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            event = json.loads(line)
            if event["seq"] != expected_seq:
                problems.append(f"line {lineno}: seq {event['seq']}, expected {expected_seq}")
                expected_seq = event["seq"]
            expected_seq += 1
            kind, data, at = event["type"], event["data"], event["at"]
            if kind == "stage_change":
                edge = (SessionStage(data["from"]), SessionStage(data["to"]))
                if edge not in LEGAL_EDGES:
                    problems.append(f"line {lineno}: illegal edge {data['from']}->{data['to']}")
                if edge[0] is not stage:
                    problems.append(f"line {lineno}: edge leaves {data['from']}, "
                                    f"but session was in {stage.value}")
                stage = edge[1]
                line_out = f"stage {data['from']} -> {data['to']}"
            elif kind == "narration_segment":
                line_out = (f"narration [{data['script_index']}:{data['sentence_index']}] "
                            f"{data['text']}")
            elif kind == "response_delivery":
                line_out = f"response ({data['comment_id']}) {data['response']['spoken']}"
            elif kind == "comment_received":
                line_out = f"comment {data['comment_id']} {data['author']}: {data['text']}"
            elif kind == "comment_dropped":
                line_out = f"dropped {data['comment_id']}"
            elif kind == "product_focus":
                line_out = f"focus {data['product_name']}"
            else:
                line_out = kind
            if not args.quiet:
                print(f"{at:>10}ms  {line_out}")
    if problems:
        for problem in problems:
            print(f"VIOLATION: {problem}", file=sys.stderr)
        return 1
    if not args.quiet:
        print("event log OK")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="livehost",
                                     description="virtual live-commerce host services")
    sub = parser.add_subparsers(dest="command", required=True)

    p_dialogue = sub.add_parser("serve-dialogue", help="run the dialogue gateway")
    _add_service_args(p_dialogue)
    p_dialogue.add_argument("--backend-endpoint", help="remote generation endpoint")
    p_dialogue.add_argument("--media-endpoint", help="remote media service endpoint")
    p_dialogue.add_argument("--event-log-dir", type=Path)
    p_dialogue.add_argument("--seed", type=int, help="stub backend seed")
    p_dialogue.add_argument("--hold-ms", type=int, help="hold period in milliseconds")
    p_dialogue.set_defaults(func=serve_dialogue)

    p_media = sub.add_parser("serve-media", help="run the media service")
    _add_service_args(p_media)
    p_media.set_defaults(func=serve_media)

    p_replay = sub.add_parser("replay", help="validate and print a session event log")
    p_replay.add_argument("event_log", type=Path)
    p_replay.add_argument("--quiet", action="store_true", help="only report violations")
    p_replay.set_defaults(func=replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
