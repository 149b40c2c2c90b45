#!/usr/bin/env python3
"""Regenerate docs/api-routes.md from the live route tables."""

import tempfile
from pathlib import Path

from miniops.gateway.app import ROUTE_TABLE
from miniops.server import CoreServices, build_core_app

HEADER = """# API routes

Generated by `python3 scripts/gen_api_docs.py`; do not edit by hand.

Every core route below is also re-exposed by the gateway under `/api/...`
(drop the `/v1` prefix): mutating methods require
`Authorization: Bearer $MINIOPS_TOKEN`. The gateway adds `GET /api/health`
(aggregated per-subsystem status, queue lag, store partition count) and
serves the console's static assets at `/` when built.

## Core routes (`/v1`)

| method | path | summary |
|--------|------|---------|
"""

FOOTER = """
## Gateway routing table

| first path segment under /api | upstream subsystem |
|-------------------------------|--------------------|
"""


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        app = build_core_app(CoreServices.create(tmp))
    lines = []
    for route in app.routes:
        methods = getattr(route, "methods", None)
        if not methods or not route.path.startswith("/v1"):
            continue
        summary = (route.endpoint.__doc__ or "").strip().splitlines()
        doc = summary[0] if summary else ""
        for method in sorted(methods - {"HEAD", "OPTIONS"}):
            lines.append(f"| {method} | `{route.path}` | {doc} |")
    body = HEADER + "\n".join(sorted(lines)) + FOOTER
    body += "\n".join(f"| `{seg}` | {up} |" for seg, up in sorted(ROUTE_TABLE.items()))
    body += "\n"
    out = Path(__file__).resolve().parent.parent / "docs" / "api-routes.md"
    out.write_text(body)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
