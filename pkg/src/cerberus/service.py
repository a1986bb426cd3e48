"""Operator-facing HTTP API: detection timelines, the review queue, and
rule editing. All mutations funnel through the rulebase/evolution
operations under a single writer lock."""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Query, Request, Response
from fastapi.responses import FileResponse, JSONResponse

from .cascade import VerdictRecord, load_verdicts
from .errors import AlreadyDecided, DuplicateRule, EmptyRuleText, StoreCorrupt, UnknownItem
from .evolution import FeedbackQueue, apply_uil
from .rulebase import add_custom_rule, load_rulebase, save_rulebase
from .evaluation import load_report


@dataclass
class ApiSession:
    rulebase_path: Path
    verdicts_path: Path | None = None
    queue_path: Path | None = None
    frames_dir: Path | None = None
    report_path: Path | None = None
    auth_token: str | None = None


class ServiceState:
    def __init__(self, session: ApiSession):
        self.session = session
        self.lock = threading.Lock()
        try:
            self.rulebase = load_rulebase(session.rulebase_path)
        except Exception as e:
            raise StoreCorrupt(f"rulebase: {e}") from e
        self.queue = FeedbackQueue(session.queue_path)
        self.verdicts: list[VerdictRecord] = []
        if session.verdicts_path and Path(session.verdicts_path).exists():
            try:
                self.verdicts = load_verdicts(session.verdicts_path)
            except Exception as e:
                raise StoreCorrupt(f"verdicts: {e}") from e

    def persist_rulebase(self) -> None:
        save_rulebase(self.rulebase, self.session.rulebase_path)


def create_app(session: ApiSession) -> FastAPI:
    state = ServiceState(session)
    app = FastAPI(title="cerberus review API")
    app.state.engine = state

    def check_auth(authorization: str | None) -> None:
        if session.auth_token is None:
            return
        if authorization != f"Bearer {session.auth_token}":
            raise HTTPException(status_code=401, detail="unauthorized")

    def versioned(payload, status_code: int = 200, etag: str | None = None) -> JSONResponse:
        resp = JSONResponse(payload, status_code=status_code)
        resp.headers["X-Rulebase-Version"] = str(state.rulebase.version)
        if etag is not None:
            resp.headers["ETag"] = etag
        return resp

    @app.get("/api/health")
    def health():
        return versioned({"status": "ok", "rulebase_version": state.rulebase.version})

    @app.get("/api/rulebase")
    def get_rulebase():
        rb = state.rulebase
        return versioned({
            "version": rb.version,
            "normal_rules": [{"text": r.text, "source": r.source,
                              "created_version": r.created_version}
                             for r in rb.normal_rules],
            "custom_anomaly_rules": [{"text": r.text, "source": r.source,
                                      "created_version": r.created_version}
                                     for r in rb.custom_anomaly_rules],
            "perturbed_label_count": len(rb.perturbed_labels),
            "params": rb.params.__dict__,
        })

    @app.post("/api/rules")
    async def post_rule(request: Request, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        body = await request.json()
        text = body.get("text", "")
        kind = body.get("kind", "anomaly")
        expected = body.get("expected_version")
        with state.lock:
            if expected is not None and expected != state.rulebase.version:
                return versioned({"error": "stale version",
                                  "current_version": state.rulebase.version}, 409)
            try:
                state.rulebase = add_custom_rule(state.rulebase, text, kind=kind)
            except DuplicateRule:
                return versioned({"error": "DuplicateRule"}, 409)
            except (EmptyRuleText, ValueError) as e:
                return versioned({"error": str(e)}, 422)
            state.persist_rulebase()
        return versioned({"version": state.rulebase.version}, 200)

    @app.get("/api/feedback/pending")
    def pending(request: Request, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        items = [{
            "id": i.id, "frame_id": i.frame_id, "kind": i.kind,
            "evidence": i.evidence, "status": i.status, "created_at": i.created_at,
        } for i in state.queue.pending("uil_pending")]
        body = json.dumps(items, sort_keys=True)
        etag = '"' + hashlib.sha256(body.encode()).hexdigest()[:16] + '"'
        if request.headers.get("if-none-match") == etag:
            resp = Response(status_code=304)
            resp.headers["ETag"] = etag
            resp.headers["X-Rulebase-Version"] = str(state.rulebase.version)
            return resp
        return versioned(items, etag=etag)

    @app.post("/api/feedback/{item_id}")
    async def decide(item_id: str, request: Request,
                     authorization: str | None = Header(default=None)):
        check_auth(authorization)
        body = await request.json()
        decision = body.get("decision")
        rule_text = body.get("rule_text")
        if decision not in ("confirm", "reject"):
            return versioned({"error": f"unknown decision: {decision}"}, 422)
        with state.lock:
            try:
                state.rulebase = apply_uil(state.rulebase, state.queue, item_id,
                                           decision, rule_text)
            except UnknownItem:
                return versioned({"error": "UnknownItem"}, 404)
            except AlreadyDecided:
                return versioned({"error": "AlreadyDecided"}, 409)
            except DuplicateRule:
                return versioned({"error": "DuplicateRule"}, 409)
            state.persist_rulebase()
        return versioned({"version": state.rulebase.version})

    @app.get("/api/timeline")
    def timeline(scene: str,
                 start: int = Query(default=0, alias="from"),
                 end: int | None = Query(default=None, alias="to"),
                 authorization: str | None = Header(default=None)):
        check_auth(authorization)
        points = sorted((r for r in state.verdicts if r.scene_id == scene),
                        key=lambda r: r.seq)
        if not points:
            return versioned({"error": "UnknownScene"}, 404)
        window = [p for p in points if p.seq >= start and (end is None or p.seq < end)]
        return versioned([{
            "frame_id": r.frame_id, "seq": r.seq, "anomaly_score": r.anomaly_score,
            "final_label": r.final_label, "p": r.p,
        } for r in window])

    @app.get("/api/metrics/latest")
    def metrics(authorization: str | None = Header(default=None)):
        check_auth(authorization)
        if not session.report_path or not Path(session.report_path).exists():
            return versioned({"error": "no report"}, 404)
        return versioned(load_report(session.report_path))

    @app.get("/frames/{name}")
    def frame_file(name: str):
        if not session.frames_dir:
            raise HTTPException(status_code=404)
        path = (Path(session.frames_dir) / name).resolve()
        if not str(path).startswith(str(Path(session.frames_dir).resolve())) \
                or not path.exists():
            raise HTTPException(status_code=404)
        return FileResponse(path)

    return app


def serve(session: ApiSession, host: str = "127.0.0.1", port: int = 8787) -> None:
    import uvicorn

    uvicorn.run(create_app(session), host=host, port=port)
