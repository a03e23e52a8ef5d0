"""Command-line client and server launcher.

Every subcommand except `serve` talks to a running service over HTTP,
so the CLI sees exactly what the web UI sees.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from datetime import datetime
from pathlib import Path

import httpx
import uvicorn

from .config import load_config
from .service import API_TOKEN_HEADER, create_app

DEFAULT_SERVER = "http://127.0.0.1:8621"
SERVER_ENV = "MANIMATOR_SERVER"

ACTIVE_POLL_STATES = {"queued", "planning", "coding", "rendering"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manimator",
        description="Turn a prompt, PDF, or arXiv ID into an explanatory animation.",
    )
    parser.add_argument(
        "--server",
        default=os.environ.get(SERVER_ENV, DEFAULT_SERVER),
        help=f"service base URL (or ${SERVER_ENV}); default {DEFAULT_SERVER}",
    )
    parser.add_argument(
        "--token",
        default=None,
        help="API token if the service requires one (or $MANIMATOR_API_TOKEN)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    submit = commands.add_parser("submit", help="submit a new animation job")
    source = submit.add_mutually_exclusive_group(required=True)
    source.add_argument("--prompt", help="free-text topic prompt")
    source.add_argument("--arxiv", help="arXiv identifier, e.g. 2107.03374")
    source.add_argument("--pdf", type=Path, help="path to a local PDF")
    submit.add_argument(
        "--mode", choices=("auto", "review"), default="auto",
        help="review pauses after planning for human approval",
    )
    submit.add_argument(
        "--wait", action="store_true", help="poll until the job settles"
    )
    submit.add_argument(
        "--poll-interval", type=float, default=1.0, help=argparse.SUPPRESS
    )
    submit.set_defaults(func=cmd_submit)

    status = commands.add_parser("status", help="show a job's state and history")
    status.add_argument("job_id")
    status.set_defaults(func=cmd_status)

    fetch = commands.add_parser("fetch-video", help="download a finished job's video")
    fetch.add_argument("job_id")
    fetch.add_argument("-o", "--output", type=Path, help="target path (default <id>.mp4)")
    fetch.set_defaults(func=cmd_fetch_video)

    rate = commands.add_parser("rate", help="rate a job on the five dimensions, 1-5")
    rate.add_argument("job_id")
    rate.add_argument("dims", type=int, nargs=5, metavar="N",
                      help="accuracy, relevance, flow, layout, consistency")
    rate.set_defaults(func=cmd_rate)

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", type=Path, help="path to the YAML config file")
    serve.set_defaults(func=cmd_serve)

    return parser


def _client(args: argparse.Namespace) -> httpx.Client:
    headers = {}
    token = args.token or os.environ.get("MANIMATOR_API_TOKEN")
    if token:
        headers[API_TOKEN_HEADER] = token
    return httpx.Client(base_url=args.server, headers=headers, timeout=60.0)


def _report_error(response: httpx.Response) -> int:
    try:
        body = response.json()
        message = f"{body['code']}: {body['message']}"
        if body.get("detail"):
            message += f"\n{body['detail']}"
    except Exception:
        message = f"HTTP {response.status_code}"
    print(f"error: {message}", file=sys.stderr)
    return 1


def _print_job(body: dict) -> None:
    print(f"job {body['id']}")
    print(f"  state: {body['state']}")
    print(f"  mode:  {body['mode']}")
    print(f"  input: {body['input_label']}")
    print("  history:")
    for entry in body["history"]:
        stamp = datetime.fromtimestamp(entry["at"]).isoformat(timespec="seconds")
        detail = f"  {entry['detail']}" if entry["detail"] else ""
        print(f"    {stamp}  {entry['state']:<16}{detail}")
    if body["failure"]:
        print(f"  failed in {body['failure']['stage']}: {body['failure']['reason']}")


def cmd_submit(args: argparse.Namespace) -> int:
    with _client(args) as client:
        params = {"mode": args.mode}
        if args.prompt is not None:
            response = client.post("/jobs", params=params, json={"prompt": args.prompt})
        elif args.arxiv is not None:
            response = client.post("/jobs", params=params, json={"arxiv_id": args.arxiv})
        else:
            data = args.pdf.read_bytes()
            response = client.post(
                "/jobs", params=params,
                files={"pdf": (args.pdf.name, data, "application/pdf")},
            )
        if response.status_code != 202:
            return _report_error(response)
        body = response.json()
        print(f"submitted job {body['id']}")
        if not args.wait:
            return 0
        return _wait_for_job(client, body["id"], args.poll_interval)


def _wait_for_job(client: httpx.Client, job_id: str, interval: float) -> int:
    seen = ""
    while True:
        response = client.get(f"/jobs/{job_id}")
        if response.status_code != 200:
            return _report_error(response)
        body = response.json()
        if body["state"] != seen:
            seen = body["state"]
            print(f"  {seen}")
        if seen == "failed":
            print(f"failed in {body['failure']['stage']}: {body['failure']['reason']}",
                  file=sys.stderr)
            return 1
        if seen == "awaiting_review":
            print("plan is awaiting review; approve it in the web UI")
            return 0
        if seen == "done":
            print(f"video ready: fetch with `manimator fetch-video {job_id}`")
            return 0
        time.sleep(interval)


def cmd_status(args: argparse.Namespace) -> int:
    with _client(args) as client:
        response = client.get(f"/jobs/{args.job_id}")
        if response.status_code != 200:
            return _report_error(response)
        _print_job(response.json())
        return 0


def cmd_fetch_video(args: argparse.Namespace) -> int:
    with _client(args) as client:
        response = client.get(f"/jobs/{args.job_id}/video")
        if response.status_code != 200:
            return _report_error(response)
        target = args.output or Path(f"{args.job_id}.mp4")
        target.write_bytes(response.content)
        print(f"saved {len(response.content)} bytes to {target}")
        return 0


def cmd_rate(args: argparse.Namespace) -> int:
    with _client(args) as client:
        response = client.post(
            "/ratings", json={"job_id": args.job_id, "dims": args.dims}
        )
        if response.status_code != 201:
            return _report_error(response)
        print(f"rating recorded for job {args.job_id}")
        return 0


def cmd_serve(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach the service: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
