"""HTTP API: transcription, voice edits, workspace CRUD, exports.

Handlers are synchronous (FastAPI runs them in a thread pool) so the
per-workspace locks have plain threading semantics. Every error body is
{"code", "message"}; the code set is documented in docs/api.md and the
generated OpenAPI document.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional

from fastapi import Body, Depends, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import commands as cmd_mod
from . import context as ctx
from . import workspace as ws_mod
from .auth import TokenError, token_fingerprint, verify_token
from .config import ServiceConfig
from .exprs import InvalidExpressionError, expr_to_json
from .exporters import (
    EmptyNode, export_latex, export_print_html, export_word_mathml,
)
from .latex import LatexSyntaxError
from .lexicon import Lexicon, default_lexicon, load_lexicon_file
from .ratelimit import TokenBucketLimiter
from .spoken import NoMathFound, SpokenSyntaxError
from .storage import MemoryStore, FileStore, WorkspaceStore

MAX_DOCUMENT_BYTES = 20 * 1024 * 1024
MAX_UTTERANCE_CHARS = 2000
ENGINE_INFLIGHT_CAP = 8


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 headers: Optional[Dict[str, str]] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.headers = headers or {}


class FocusRef(BaseModel):
    node_id: str
    equation_id: str


class TranscribeRequest(BaseModel):
    workspace_id: str
    focus: Optional[FocusRef] = None
    utterance: str


class EditRequest(BaseModel):
    workspace_id: str
    equation_id: str
    utterance: str


class ExportRequest(BaseModel):
    workspace_id: str
    node_id: str
    format: str


class ParseLatexRequest(BaseModel):
    latex: str


class CreateWorkspaceRequest(BaseModel):
    title: Optional[str] = None
    document: Optional[dict] = None


def _etag(data: bytes) -> str:
    return '"' + hashlib.sha256(data).hexdigest() + '"'


@dataclass
class _State:
    config: ServiceConfig
    store: WorkspaceStore
    limiter: TokenBucketLimiter
    backend: ctx.TranscriptionBackend
    lexicon: Lexicon
    clock: Callable[[], float]
    engine_slots: threading.Semaphore
    ws_locks: Dict[str, threading.Lock]
    ws_locks_guard: threading.Lock

    def lock_for(self, user_id: str, workspace_id: str) -> threading.Lock:
        key = f"{user_id}/{workspace_id}"
        with self.ws_locks_guard:
            lock = self.ws_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self.ws_locks[key] = lock
            return lock


def build_backend(config: ServiceConfig,
                  lexicon: Lexicon) -> ctx.TranscriptionBackend:
    if config.backend_mode == "remote":
        return ctx.RemoteBackend(config.remote_endpoint, config.remote_key)
    return ctx.GrammarBackend(lexicon)


def build_lexicon(config: ServiceConfig) -> Lexicon:
    lexicon = default_lexicon()
    for path in config.lexicon_files:
        lexicon = lexicon.merge(load_lexicon_file(path))
    return lexicon


def create_app(config: Optional[ServiceConfig] = None, *,
               store: Optional[WorkspaceStore] = None,
               backend: Optional[ctx.TranscriptionBackend] = None,
               limiter: Optional[TokenBucketLimiter] = None,
               clock: Callable[[], float] = time.time) -> FastAPI:
    config = config or ServiceConfig()
    if not config.token_issuer_keys:
        from .auth import LOCAL_TEST_ISSUER, LOCAL_TEST_KEY
        config.token_issuer_keys = {LOCAL_TEST_ISSUER: LOCAL_TEST_KEY}
    if store is None:
        store = FileStore(config.storage_dir) if config.storage_dir \
            else MemoryStore()
    lexicon = build_lexicon(config)
    state = _State(
        config=config, store=store,
        limiter=limiter or TokenBucketLimiter(config.rate_capacity,
                                              config.rate_refill),
        backend=backend or build_backend(config, lexicon),
        lexicon=lexicon, clock=clock,
        engine_slots=threading.Semaphore(ENGINE_INFLIGHT_CAP),
        ws_locks={}, ws_locks_guard=threading.Lock(),
    )

    app = FastAPI(title="Phoenix API", version="1.0.0",
                  description="Voice-driven math workspace API")
    app.state.phoenix = state

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse({"code": exc.code, "message": exc.message},
                            status_code=exc.status, headers=exc.headers)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            {"code": "invalid_request", "message": str(exc.errors()[:3])},
            status_code=422)

    def authenticate(request: Request) -> str:
        header = request.headers.get("authorization", "")
        token = None
        if header.lower().startswith("bearer "):
            token = header[7:].strip()
        try:
            claims = verify_token(token, state.config.token_issuer_keys,
                                  now=state.clock())
        except TokenError as exc:
            raise ApiError(401, exc.code, str(exc))
        user_id = claims["sub"]
        record = state.store.get_account(user_id) or {
            "user_id": user_id,
            "display_name": claims.get("name", user_id),
            "token_fingerprints": [],
            "created": state.clock(),
        }
        fp = token_fingerprint(token)
        if fp not in record["token_fingerprints"]:
            record["token_fingerprints"] = record["token_fingerprints"] + [fp]
            state.store.put_account(user_id, record)
        return user_id

    def rate_limited(user_id: str = Depends(authenticate)) -> str:
        admitted, retry_after = state.limiter.allow(user_id)
        if not admitted:
            seconds = max(1, int(retry_after + 0.999))
            raise ApiError(429, "rate_limited",
                           f"rate limit exceeded; retry in {seconds}s",
                           headers={"Retry-After": str(seconds)})
        return user_id

    def _load_ws(user_id: str, workspace_id: str) -> ws_mod.Workspace:
        data = state.store.get(user_id, workspace_id)
        if data is None:
            raise ApiError(404, "workspace_not_found",
                           f"no workspace {workspace_id!r}")
        return ws_mod.load(data)

    def _persist(user_id: str, ws: ws_mod.Workspace) -> bytes:
        data = ws_mod.save(ws)
        state.store.put(user_id, ws.id, data)
        return data

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/transcribe")
    def transcribe(body: TranscribeRequest,
                   user_id: str = Depends(rate_limited)):
        if len(body.utterance) > MAX_UTTERANCE_CHARS:
            raise ApiError(422, "utterance_too_long",
                           f"utterance exceeds {MAX_UTTERANCE_CHARS} chars")
        lock = state.lock_for(user_id, body.workspace_id)
        with lock:
            ws = _load_ws(user_id, body.workspace_id)
        focus = None
        if body.focus is not None:
            focus = ctx.EquationRef(body.focus.node_id,
                                    body.focus.equation_id)
        with state.engine_slots:
            try:
                result = ctx.transcribe(ws, focus, body.utterance,
                                        state.backend, state.lexicon)
            except ctx.BackendUnavailable as exc:
                raise ApiError(503, "backend_unavailable", str(exc))
            except NoMathFound as exc:
                raise ApiError(422, "no_math_found", str(exc))
            except SpokenSyntaxError as exc:
                raise ApiError(422, "spoken_syntax_error", str(exc))
            except ctx.NoMathInOutput as exc:
                raise ApiError(422, "no_math_in_output", str(exc))
            except LatexSyntaxError as exc:
                raise ApiError(422, "latex_syntax_error", str(exc))
            except InvalidExpressionError as exc:
                raise ApiError(422, "invalid_expression", str(exc))
            except ws_mod.EquationNotFound as exc:
                raise ApiError(404, "equation_not_found", str(exc))
        return {"latex": result.latex, "expr": expr_to_json(result.expr),
                "residual_text": result.residual_text,
                "kind": result.kind}

    @app.post("/v1/parse-latex")
    def parse_latex_endpoint(body: ParseLatexRequest,
                             user_id: str = Depends(rate_limited)):
        # backs the UI's direct-LaTeX editing fallback
        from .exprs import normalize, validate_expr
        from .latex import parse_latex as parse, render_latex
        try:
            expr = normalize(parse(body.latex))
            validate_expr(expr)
        except LatexSyntaxError as exc:
            raise ApiError(422, "latex_syntax_error", str(exc))
        except InvalidExpressionError as exc:
            raise ApiError(422, "invalid_expression", str(exc))
        return {"latex": render_latex(expr), "expr": expr_to_json(expr)}

    @app.post("/v1/edit")
    def edit(body: EditRequest, user_id: str = Depends(rate_limited)):
        lock = state.lock_for(user_id, body.workspace_id)
        with lock:
            ws = _load_ws(user_id, body.workspace_id)
            try:
                node, entry = ws_mod.find_equation(ws, body.equation_id)
            except ws_mod.EquationNotFound as exc:
                raise ApiError(404, "equation_not_found", str(exc))
            try:
                command = cmd_mod.parse_command(body.utterance, state.lexicon)
            except cmd_mod.NotACommand as exc:
                raise ApiError(422, "not_a_command", str(exc))
            try:
                edited = cmd_mod.apply_command(entry.expr, command)
            except cmd_mod.AmbiguousTarget as exc:
                raise ApiError(422, "ambiguous_target", str(exc))
            except cmd_mod.TargetNotFound as exc:
                raise ApiError(422, "target_not_found", str(exc))
            eq_id = ws_mod.add_equation(ws, node.id, edited,
                                        parent_equation=entry.id)
            _persist(user_id, ws)
        new_entry = ws_mod.find_equation(ws, eq_id)[1]
        return {"latex": new_entry.latex_cache,
                "expr": expr_to_json(new_entry.expr),
                "equation_id": eq_id,
                "parent_equation_id": entry.id}

    @app.post("/v1/workspaces", status_code=201)
    def create_workspace(body: CreateWorkspaceRequest = Body(
                             default=CreateWorkspaceRequest()),
                         user_id: str = Depends(rate_limited)):
        if body.document is not None:
            try:
                ws = ws_mod.workspace_from_dict(body.document)
            except ws_mod.SchemaVersionUnsupported as exc:
                raise ApiError(422, "schema_version_unsupported", str(exc))
            except ws_mod.MalformedDocument as exc:
                raise ApiError(422, "malformed_document", str(exc))
            if state.store.get(user_id, ws.id) is not None:
                raise ApiError(409, "workspace_exists",
                               f"workspace {ws.id!r} already exists")
        else:
            ws = ws_mod.new_workspace(body.title or "Untitled")
            ws.preferences = ws_mod.Preferences(
                decay=state.config.context_decay,
                context_cap=state.config.context_cap)
        with state.lock_for(user_id, ws.id):
            data = _persist(user_id, ws)
        return JSONResponse({"id": ws.id,
                             "document": ws_mod.workspace_to_dict(ws)},
                            status_code=201,
                            headers={"ETag": _etag(data)})

    @app.get("/v1/workspaces")
    def list_workspaces(user_id: str = Depends(rate_limited)):
        out = []
        for ws_id in state.store.list_ids(user_id):
            data = state.store.get(user_id, ws_id)
            if data is None:
                continue
            try:
                ws = ws_mod.load(data)
            except ws_mod.WorkspaceError:
                continue
            out.append({"id": ws.id, "title": ws.title,
                        "modified": ws.modified})
        return {"workspaces": out}

    @app.get("/v1/workspaces/{workspace_id}")
    def get_workspace(workspace_id: str,
                      user_id: str = Depends(rate_limited)):
        with state.lock_for(user_id, workspace_id):
            data = state.store.get(user_id, workspace_id)
        if data is None:
            raise ApiError(404, "workspace_not_found",
                           f"no workspace {workspace_id!r}")
        ws = ws_mod.load(data)
        return JSONResponse(ws_mod.workspace_to_dict(ws),
                            headers={"ETag": _etag(data)})

    @app.put("/v1/workspaces/{workspace_id}")
    def put_workspace(workspace_id: str, request: Request,
                      doc: dict = Body(...),
                      user_id: str = Depends(rate_limited)):
        length = request.headers.get("content-length")
        if length is not None and int(length) > MAX_DOCUMENT_BYTES:
            raise ApiError(413, "document_too_large",
                           f"document exceeds {MAX_DOCUMENT_BYTES} bytes")
        try:
            ws = ws_mod.workspace_from_dict(doc)
        except ws_mod.SchemaVersionUnsupported as exc:
            raise ApiError(422, "schema_version_unsupported", str(exc))
        except ws_mod.MalformedDocument as exc:
            raise ApiError(422, "malformed_document", str(exc))
        if ws.id != workspace_id:
            raise ApiError(422, "workspace_id_mismatch",
                           "document id does not match the URL")
        lock = state.lock_for(user_id, workspace_id)
        with lock:
            existing = state.store.get(user_id, workspace_id)
            if existing is None:
                raise ApiError(404, "workspace_not_found",
                               f"no workspace {workspace_id!r}")
            if_match = request.headers.get("if-match")
            if if_match is not None and if_match.strip() != _etag(existing):
                raise ApiError(409, "etag_mismatch",
                               "workspace changed since you fetched it")
            data = _persist(user_id, ws)
        return JSONResponse({"id": ws.id}, headers={"ETag": _etag(data)})

    @app.post("/v1/export")
    def export(body: ExportRequest, user_id: str = Depends(rate_limited)):
        with state.lock_for(user_id, body.workspace_id):
            ws = _load_ws(user_id, body.workspace_id)
        try:
            node = ws_mod.find_node(ws, body.node_id)
        except ws_mod.NodeNotFound as exc:
            raise ApiError(404, "node_not_found", str(exc))
        exporters = {"latex": export_latex, "word": export_word_mathml,
                     "print": export_print_html}
        fn = exporters.get(body.format)
        if fn is None:
            raise ApiError(422, "unknown_format",
                           f"format must be one of {sorted(exporters)}")
        try:
            bundle = fn(node)
        except EmptyNode as exc:
            raise ApiError(422, "empty_node", str(exc))
        # exact media_type, no implicit charset suffix
        return Response(content=bundle.payload,
                        headers={"Content-Type": bundle.media_type,
                                 "X-Export-Label": bundle.human_label})

    return app
