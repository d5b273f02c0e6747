#!/usr/bin/env python3
"""Regenerate docs/openapi.json from the live app definition."""

import json
from pathlib import Path

from phoenix.config import ServiceConfig
from phoenix.service import create_app


def main():
    app = create_app(ServiceConfig())
    doc = app.openapi()
    out = Path(__file__).resolve().parents[1] / "docs" / "openapi.json"
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
