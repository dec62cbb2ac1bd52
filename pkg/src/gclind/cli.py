"""Command-line front end; a thin client of the HTTP service.

By default each subcommand runs the bundled service in-process over an ASGI
transport, so no server needs to be running; ``--server URL`` targets a
remote instance started with ``gclind serve`` instead.  Output documents
returned by the service are written byte-for-byte into the ``--out``
directory.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .config import SCENARIO_KINDS, load_config_data
from .errors import ValidationFailure
from .version import __version__

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gclind",
        description="Grand-canonical Lindblad simulations: evolve, steady states, "
        "equilibrium checks, chemical-potential extraction, and chain sampling.",
    )
    parser.add_argument("--version", action="version", version=f"gclind {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("config_positional", nargs="?", metavar="CONFIG",
                       help="config file (alternative to --config)")
        p.add_argument("--config", help="path to the JSON config file")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's numerics.seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.add_argument("--server", default=None,
                       help="base URL of a running service; default runs in-process")

    for kind in SCENARIO_KINDS:
        add_common(sub.add_parser(kind, help=f"run a {kind} scenario"))
    add_common(sub.add_parser("validate", help="schema-check a config without running it"))

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8077)
    return parser


def _config_path(args) -> Path:
    if args.config and args.config_positional:
        raise ValidationFailure("give the config either positionally or via --config, not both")
    path = args.config or args.config_positional
    if not path:
        raise ValidationFailure("a config file is required (--config PATH)")
    return Path(path)


async def _post(path: str, payload: dict, server: str | None) -> httpx.Response:
    if server is None:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://gclind.local",
                                     timeout=None) as client:
            return await client.post(path, json=payload)
    async with httpx.AsyncClient(base_url=server, timeout=None) as client:
        return await client.post(path, json=payload)


def _say(args, message: str):
    if not args.quiet:
        print(message)


def _print_defects(defects, detail: str | None = None):
    if detail:
        print(f"error: {detail}", file=sys.stderr)
    for d in defects:
        loc = d.get("location") or "<root>"
        print(f"  {loc}: {d.get('message')}", file=sys.stderr)


def _run_scenario(kind: str, args) -> int:
    data = load_config_data(_config_path(args))
    if args.seed is not None:
        data.setdefault("numerics", {})["seed"] = args.seed
    response = asyncio.run(_post(f"/run/{kind}", data, args.server))

    if response.status_code == 200:
        body = response.json()
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for doc in body["outputs"]:
            target = out_dir / doc["filename"]
            target.write_text(doc["content"])
            _say(args, f"wrote {target}")
        _say(args, f"{kind}: ok (config_hash={body['config_hash']})")
        if not args.quiet:
            print(json.dumps(body["report"], indent=2, sort_keys=True))
        return EXIT_OK

    try:
        body = response.json()
    except ValueError:
        print(f"error: service answered {response.status_code}: {response.text}", file=sys.stderr)
        return EXIT_NUMERICAL
    kind_field = body.get("kind")
    if kind_field == "validation":
        _print_defects(body.get("defects", []), body.get("detail"))
        return EXIT_VALIDATION
    print(f"error: {body.get('detail', response.text)}", file=sys.stderr)
    return EXIT_NUMERICAL


def _run_validate(args) -> int:
    data = load_config_data(_config_path(args))
    response = asyncio.run(_post("/validate", data, args.server))
    body = response.json()
    if response.status_code != 200:
        _print_defects(body.get("defects", []), body.get("detail"))
        return EXIT_VALIDATION
    if body["ok"]:
        _say(args, f"config ok (scenario: {body['scenario']})")
        return EXIT_OK
    _print_defects(body.get("defects", []), "config has defects")
    return EXIT_VALIDATION


def _run_serve(args) -> int:
    import uvicorn

    uvicorn.run("gclind.service:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _run_serve(args)
        if args.command == "validate":
            return _run_validate(args)
        return _run_scenario(args.command, args)
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
