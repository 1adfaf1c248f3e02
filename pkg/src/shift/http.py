"""HTTP service (``/v1``) over the same engine core as the CLI.

Queries run asynchronously on a thread pool; clients poll
``GET /v1/executions/{id}``. Execution ids are content hashes of the query,
the catalog version and the result-affecting options, so resubmitting an
identical query returns the same id.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse

from shift.catalog import ModelRecord
from shift.errors import DuplicateId, InvalidField, ShiftError, ShiftQLSyntaxError, UnknownId
from shift.readers import SampleSource
from shift.shiftql.parser import parse

QUERY_OPTIONS = ("force_mode", "budget", "chunk_size", "seed", "use_cache")


def _error(status: int, exc: Exception) -> HTTPException:
    detail = exc.to_dict() if isinstance(exc, ShiftError) else {"kind": type(exc).__name__, "message": str(exc)}
    return HTTPException(status_code=status, detail=detail)


def create_app(engine, max_workers: int = 4) -> FastAPI:
    pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="shift-query")

    @asynccontextmanager
    async def lifespan(_):
        yield
        pool.shutdown(wait=False)

    app = FastAPI(title="shift", version="1", lifespan=lifespan)
    executions: dict[str, dict] = {}
    lock = threading.Lock()
    app.state.engine = engine
    app.state.executions = executions

    def run(eid: str, text: str, bindings: dict, options: dict) -> None:
        try:
            result = engine.execute(text, bindings=bindings, **options)
            state = {"execution_id": eid, "status": "done", "result": result.to_dict(), "error": None}
        except ShiftError as exc:
            state = {"execution_id": eid, "status": "failed", "result": None, "error": exc.to_dict()}
        except Exception as exc:  # reported to the client, never swallowed silently
            state = {"execution_id": eid, "status": "failed", "result": None,
                     "error": {"kind": type(exc).__name__, "message": str(exc)}}
        with lock:
            executions[eid] = state

    @app.post("/v1/query", status_code=202)
    def submit(body: dict = Body(...)):
        text = body.get("text")
        if not isinstance(text, str):
            raise HTTPException(400, {"kind": "InvalidField", "message": "body needs a 'text' string"})
        options = dict(body.get("options") or {})
        bindings = dict(options.pop("bindings", None) or body.get("bindings") or {})
        unknown = set(options) - set(QUERY_OPTIONS)
        if unknown:
            raise HTTPException(400, {"kind": "InvalidField", "message": f"unknown options {sorted(unknown)}"})
        try:
            tree = parse(text)
        except ShiftQLSyntaxError as exc:
            raise _error(400, exc)
        eid = engine.execution_id(tree, bindings, **options)
        with lock:
            existing = executions.get(eid)
            if existing is None or existing["status"] == "failed":
                executions[eid] = {"execution_id": eid, "status": "running", "result": None, "error": None}
                pool.submit(run, eid, text, bindings, options)
        return {"execution_id": eid}

    @app.get("/v1/executions/{eid}")
    def status(eid: str):
        with lock:
            state = executions.get(eid)
        if state is not None:
            return state
        stored = engine.catalog.store.get_execution(eid)
        if stored is None:
            raise HTTPException(404, {"kind": "UnknownExecution", "message": f"unknown execution {eid}"})
        return {"execution_id": eid, "status": "done", "result": stored["result"], "error": None}

    @app.post("/v1/models", status_code=201)
    def register_model(body: dict = Body(...)):
        try:
            record = ModelRecord.from_dict(body)
            engine.catalog.register_model(record)
        except DuplicateId as exc:
            raise _error(409, exc)
        except (InvalidField, KeyError, TypeError, ValueError) as exc:
            raise _error(400, exc)
        return record.to_dict()

    @app.post("/v1/readers", status_code=201)
    def register_reader(body: dict = Body(...)):
        try:
            src = SampleSource(np.asarray(body["X"], dtype=np.float32), np.asarray(body["y"]))
            record = engine.catalog.register_reader(
                body["reader_id"], src, modality=body.get("modality", "Vision"),
                type_tag=body.get("type_tag", ""), n_classes=body.get("n_classes"),
            )
        except DuplicateId as exc:
            raise _error(409, exc)
        except (InvalidField, KeyError, TypeError, ValueError) as exc:
            raise _error(400, exc)
        return record.to_dict()

    @app.post("/v1/results", status_code=201)
    def record_result(body: dict = Body(...)):
        try:
            engine.catalog.record_benchmark_result(
                body["model_id"], body["reader_id"], body["accuracy"], body.get("wall_time"))
        except UnknownId as exc:
            raise _error(404, exc)
        except (KeyError, TypeError, ValueError) as exc:
            raise _error(400, exc)
        return {"model_id": body["model_id"], "reader_id": body["reader_id"], "accuracy": body["accuracy"]}

    @app.get("/v1/catalog/models")
    def list_models(filter: str | None = None):
        text = "SELECT * FROM Models" + (f" WHERE {filter}" if filter else "")
        try:
            rel = engine.catalog.sql_eval(text)
        except ShiftQLSyntaxError as exc:
            raise _error(400, exc)
        except ShiftError as exc:
            raise _error(400, exc)
        return {"columns": rel.columns, "rows": [list(t) for t in rel.tuples()]}

    @app.exception_handler(ShiftError)
    def shift_error(_, exc: ShiftError):
        return JSONResponse(status_code=400, content={"detail": exc.to_dict()})

    return app
