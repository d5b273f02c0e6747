"""Keeps the published docs in sync with the code."""

import json
import random
from pathlib import Path

import jsonschema

from phoenix.config import ServiceConfig
from phoenix.service import create_app
from phoenix.workspace import workspace_to_dict
from _generators import gen_workspace

DOCS = Path(__file__).resolve().parents[1] / "docs"


def test_openapi_document_current():
    app = create_app(ServiceConfig())
    generated = app.openapi()
    published = json.loads((DOCS / "openapi.json").read_text())
    assert generated == published, \
        "docs/openapi.json is stale; run scripts/gen_openapi.py"


def test_generated_workspaces_validate_against_published_schema():
    schema = json.loads((DOCS / "workspace.schema.json").read_text())
    rng = random.Random(21)
    for _ in range(40):
        ws = gen_workspace(rng)
        jsonschema.validate(workspace_to_dict(ws), schema)


def test_word_allowlist_documented():
    from phoenix.mathml import WORD_MATHML_ALLOWLIST
    doc = (DOCS / "word-mathml.md").read_text()
    for element in WORD_MATHML_ALLOWLIST:
        assert element in doc, f"allowlist element {element} undocumented"
