"""Command-line client for the verification service.

By default the service app is mounted in-process, so no server has to be
running; ``--server URL`` points the same commands at a remote instance.
stdout carries only machine-readable JSON; everything else goes to stderr.

Exit codes: 0 success, 2 per-instance or request failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import Any

import httpx

from .core import canonical_json

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _post(server: str | None, path: str, payload: dict[str, Any]) -> tuple[int, dict[str, Any]]:
    async def call() -> tuple[int, dict[str, Any]]:
        if server:
            async with httpx.AsyncClient(base_url=server, timeout=600.0) as client:
                response = await client.post(path, json=payload)
                return response.status_code, response.json()
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://citecheck.internal", timeout=600.0
        ) as client:
            response = await client.post(path, json=payload)
            return response.status_code, response.json()

    return asyncio.run(call())


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _transport_options(args: argparse.Namespace) -> dict[str, Any]:
    if getattr(args, "replay", None):
        return {"mode": "replay", "fixture_dir": str(Path(args.replay).resolve())}
    if getattr(args, "record", None):
        return {"mode": "record", "fixture_dir": str(Path(args.record).resolve())}
    return {"mode": "live", "fixture_dir": None}


class _RequestFailed(Exception):
    def __init__(self, code: int):
        self.code = code


def _fail_on_http_error(status: int, body: dict[str, Any]) -> None:
    if status != 200:
        detail = body.get("detail", body)
        print(f"request failed ({status}): {detail}", file=sys.stderr)
        raise _RequestFailed(EXIT_PARTIAL)


def cmd_verify(args: argparse.Namespace) -> int:
    abstract = None
    if args.abstract:
        try:
            abstract = Path(args.abstract).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"cannot read abstract file: {exc}", file=sys.stderr)
            return EXIT_USAGE
    payload = {
        "claim": args.claim,
        "citation": args.citation,
        "abstract": abstract,
        "config": _load_config(args.config),
        "transport": _transport_options(args),
    }
    status, body = _post(args.server, "/verify", payload)
    _fail_on_http_error(status, body)
    if body.get("error"):
        print(canonical_json({"error": body["error"]}))
        return EXIT_PARTIAL
    print(canonical_json(body["result"]))
    return EXIT_OK


def _read_instance_lines(
    path: str,
) -> tuple[list[dict[str, Any] | None], dict[int, dict[str, Any]]]:
    """Parse the input JSONL; malformed lines become local error records."""
    payloads: list[dict[str, Any] | None] = []
    local_errors: dict[int, dict[str, Any]] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    position = 0
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            if not isinstance(doc, dict):
                raise ValueError("instance line must be a JSON object")
            instance_id = str(doc.get("id", "")) or f"line-{line_number}"
            payloads.append(
                {
                    "id": instance_id,
                    "claim": str(doc.get("claim", "") or ""),
                    "citation": str(doc.get("citation", "") or ""),
                    "gold_label": doc.get("gold_label"),
                    "abstract": doc.get("abstract"),
                }
            )
        except (ValueError, json.JSONDecodeError) as exc:
            print(f"skipping malformed input line {line_number}: {exc}", file=sys.stderr)
            local_errors[position] = {
                "id": f"line-{line_number}",
                "error": {"type": "MalformedLine", "message": str(exc)},
            }
            payloads.append(None)  # placeholder keeps positions aligned
        position += 1
    return payloads, local_errors


def cmd_batch(args: argparse.Namespace) -> int:
    try:
        payloads, local_errors = _read_instance_lines(args.input)
    except OSError as exc:
        print(f"cannot read input file: {exc}", file=sys.stderr)
        return EXIT_USAGE

    request_payloads = [p for p in payloads if p is not None]
    body_payload: dict[str, Any] = {
        "instances": request_payloads,
        "config": _load_config(args.config),
        "transport": _transport_options(args),
    }
    if args.mode:
        body_payload["mode"] = args.mode
    if args.workers:
        body_payload["workers"] = args.workers

    status, body = _post(args.server, "/batch", body_payload)
    _fail_on_http_error(status, body)

    produced = iter(body["records"])
    records = [
        local_errors[index] if payload is None else next(produced)
        for index, payload in enumerate(payloads)
    ]
    summary = dict(body["summary"])
    summary["total"] = len(records)
    summary["errors"] = summary.get("errors", 0) + len(local_errors)

    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(
        "".join(canonical_json(record) + "\n" for record in records), encoding="utf-8"
    )
    summary_path = output.with_name(output.name + ".summary.json")
    summary_path.write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(canonical_json(summary))

    succeeded = sum(1 for record in records if "result" in record)
    return EXIT_OK if succeeded >= 1 else EXIT_PARTIAL


def _read_jsonl(path: str, what: str) -> list[dict[str, Any]]:
    docs: list[dict[str, Any]] = []
    for line_number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            if not isinstance(doc, dict):
                raise ValueError("not a JSON object")
            docs.append(doc)
        except (ValueError, json.JSONDecodeError) as exc:
            print(f"skipping malformed {what} line {line_number}: {exc}", file=sys.stderr)
    return docs


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        predictions = _read_jsonl(args.pred, "prediction")
        golds = _read_jsonl(args.gold, "gold")
    except OSError as exc:
        print(f"cannot read input file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    skipped = [doc for doc in predictions if "error" in doc]
    if skipped:
        print(f"ignoring {len(skipped)} error records in predictions", file=sys.stderr)
    predictions = [doc for doc in predictions if "error" not in doc]

    status, body = _post(
        args.server,
        "/eval",
        {"predictions": predictions, "golds": golds, "setting": args.setting},
    )
    _fail_on_http_error(status, body)
    print(canonical_json(body))

    from .evaluation import render_escalation_table, render_metrics_table

    print(render_metrics_table(body["metrics"]), file=sys.stderr)
    if body.get("escalation"):
        print("", file=sys.stderr)
        print(render_escalation_table(body["escalation"]), file=sys.stderr)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        docs = _read_jsonl(args.traces, "trace")
    except OSError as exc:
        print(f"cannot read traces file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    traces = []
    for doc in docs:
        if "stages" in doc:
            traces.append(doc)
        elif isinstance(doc.get("result"), dict) and "trace" in doc["result"]:
            traces.append(doc["result"]["trace"])
        elif "error" in doc:
            continue
        else:
            print(f"skipping record without a trace: {list(doc)[:4]}", file=sys.stderr)

    status, body = _post(args.server, "/report", {"traces": traces})
    _fail_on_http_error(status, body)
    print(canonical_json(body["report"]))

    from .evaluation import render_coverage_table

    print(render_coverage_table(body["report"]), file=sys.stderr)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="citecheck", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p: _Parser, transport: bool = True):
        p.add_argument("--server", help="base URL of a running service; default runs in-process")
        p.add_argument("--config", help="flat JSON config file mirroring the pipeline knobs")
        if transport:
            group = p.add_mutually_exclusive_group()
            group.add_argument("--record", metavar="DIR", help="record live responses as fixtures")
            group.add_argument("--replay", metavar="DIR", help="replay fixtures; no network access")

    verify = sub.add_parser("verify", help="verify one claim against its citation")
    verify.add_argument("--claim", required=True)
    verify.add_argument("--citation", required=True)
    verify.add_argument("--abstract", metavar="FILE", help="file holding the provided abstract")
    add_common(verify)
    verify.set_defaults(func=cmd_verify)

    batch = sub.add_parser("batch", help="verify a JSONL file of instances")
    batch.add_argument("--input", required=True, metavar="FILE")
    batch.add_argument("--output", required=True, metavar="FILE")
    batch.add_argument("--mode", choices=["provided-abstract", "retrieve"])
    batch.add_argument("--workers", type=int)
    add_common(batch)
    batch.set_defaults(func=cmd_batch)

    evaluate = sub.add_parser("eval", help="score predictions against gold labels")
    evaluate.add_argument("--pred", required=True, metavar="FILE")
    evaluate.add_argument("--gold", required=True, metavar="FILE")
    evaluate.add_argument("--setting", choices=["2class", "3class"], default="3class")
    add_common(evaluate, transport=False)
    evaluate.set_defaults(func=cmd_eval)

    report = sub.add_parser("report", help="coverage and latency report from traces")
    report.add_argument("--traces", required=True, metavar="FILE")
    add_common(report, transport=False)
    report.set_defaults(func=cmd_report)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _RequestFailed as exc:
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
