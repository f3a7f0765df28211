"""HTTP/JSON remote API.

URL grammar: keyword search with type and field criteria on /search,
projection via /{name}/?show=..., FoaF traversal on /{name}/neighbors/{kind}/,
lineage on /{name}/lineage, plus plain POST/PUT/DELETE curation verbs. GETs
are side-effect-free; every response is also reproducible through the CLI
(one code path). Status codes: 200 ok, 400 bad parameter, 404 not found,
409 ambiguous name.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .curation import CurationError
from .engine import Engine
from .network import AmbiguousName
from .query import UnknownKind
from .sources import SourceError

RESERVED_PARAMS = {"query", "type", "offset", "limit"}


class LabelRequest(BaseModel):
    target: str
    text: str


class GroupRequest(BaseModel):
    name: str
    members: list[str]


class FieldRequest(BaseModel):
    value: str


class EntityRequest(BaseModel):
    kind: str
    origin: str
    fields: dict[str, str]


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="biznet", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    ui_dir = engine.config.ui_dir
    if ui_dir is not None and Path(ui_dir).is_dir():
        # registered before the /{name} catch-alls so the prefix wins
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    @app.exception_handler(AmbiguousName)
    async def on_ambiguous(_request, exc: AmbiguousName):
        return JSONResponse(
            {"error": f"name {exc.name!r} is ambiguous", "candidates": exc.candidates},
            status_code=409,
        )

    @app.exception_handler(KeyError)
    async def on_missing(_request, exc: KeyError):
        return JSONResponse({"error": f"not found: {exc.args[0]}"}, status_code=404)

    @app.exception_handler(UnknownKind)
    async def on_unknown_kind(_request, exc: UnknownKind):
        return JSONResponse({"error": f"unknown kind {exc.args[0]!r}"}, status_code=400)

    @app.exception_handler(CurationError)
    async def on_curation(_request, exc: CurationError):
        return JSONResponse({"error": str(exc)}, status_code=400)

    @app.exception_handler(SourceError)
    async def on_source(_request, exc: SourceError):
        return JSONResponse({"error": str(exc)}, status_code=400)

    @app.get("/search")
    def search_route(request: Request):
        params = request.query_params
        term = params.get("query") or None
        type_ = params.get("type") or None
        try:
            offset = int(params.get("offset", "0"))
            limit = int(params["limit"]) if "limit" in params else None
        except ValueError:
            return JSONResponse(
                {"error": "offset/limit must be integers"}, status_code=400
            )
        if offset < 0 or (limit is not None and limit < 0):
            return JSONResponse(
                {"error": "offset/limit must be non-negative"}, status_code=400
            )
        filters = {
            name: value
            for name, value in params.items()
            if name not in RESERVED_PARAMS
        }
        if term is None and type_ is None and not filters:
            return JSONResponse(
                {"error": "need a query, a type or a field criterion"},
                status_code=400,
            )
        return engine.search_doc(term, type_, filters, offset, limit)

    @app.get("/export")
    def export_route():
        return engine.export_doc()

    @app.get("/enhancements")
    def enhancements_route():
        return engine.enhancements_doc()

    @app.get("/enhancements/{enhancement_id}")
    def enhancement_route(enhancement_id: str):
        return engine.enhancement_doc(enhancement_id)

    @app.post("/labels", status_code=201)
    def add_label_route(body: LabelRequest):
        return engine.add_label(body.target, body.text)

    @app.post("/groups", status_code=201)
    def add_group_route(body: GroupRequest):
        return engine.add_group(body.name, body.members)

    @app.post("/entities", status_code=202)
    def create_entity_route(body: EntityRequest):
        return engine.enhance_create(body.kind, body.origin, body.fields)

    @app.post("/deploy/{enhancement_id}")
    def deploy_route(enhancement_id: str):
        return engine.deploy(enhancement_id)

    @app.put("/{name}/fields/{field}")
    def modify_route(name: str, field: str, body: FieldRequest):
        return engine.enhance_modify(name, field, body.value)

    @app.delete("/{name}", status_code=202)
    def delete_route(name: str):
        return engine.enhance_delete(name)

    @app.get("/{name}/neighbors/")
    @app.get("/{name}/neighbors")
    def neighbors_all_route(name: str):
        return engine.neighbors_doc(name)

    @app.get("/{name}/neighbors/{kind}/")
    @app.get("/{name}/neighbors/{kind}")
    def neighbors_kind_route(name: str, kind: str):
        return engine.neighbors_doc(name, kind)

    @app.get("/{name}/lineage")
    def lineage_route(name: str):
        return engine.lineage_doc(name)

    @app.get("/{name}/")
    @app.get("/{name}")
    def project_route(name: str, request: Request):
        show = request.query_params.get("show", "")
        paths = [p for p in show.split(",") if p.strip()] if show else []
        return engine.project_doc(name, paths)

    return app
