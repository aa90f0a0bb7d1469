"""HTTP API serving annotation tasks from a campaign plan.

Endpoints (JSON unless noted):

  GET  /tasks/next?annotator=ID   next unfinished task envelope, or {"task": null}
  POST /annotations               submit answers for a task (idempotent on annotation_id)
  GET  /progress                  per-annotator and per-system completion counts
  GET  /export                    the annotation log as line-delimited JSON (seq order)
  POST /campaigns                 upload a plan (ndjson body); only while the log is empty

Task payloads are blind: they never contain a system identity. Errors are
structured JSON: {"error": {"code", "message"}}. State is recovered by
replaying the annotation log, so a restart over the same files reproduces
progress and task serving exactly.
"""

from __future__ import annotations

import tempfile
import threading
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from . import campaign as campaign_mod
from .campaign import CampaignPlan, FacetTask, PairwiseTask
from .corpus import AnnotationLog, Corpus, CorpusError
from .humaneval import (
    FACET_FIELDS,
    FACET_QUESTIONS,
    PAIRWISE_QUESTION,
    FacetAnnotation,
    PairwiseAnnotation,
    ValidationError,
)


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class AnnotationService:
    """Task serving and submission over an immutable plan and an append-only log."""

    def __init__(self, corpus: Corpus, plan: CampaignPlan | None, log: AnnotationLog):
        self.corpus = corpus
        self.log = log
        self._lock = threading.Lock()
        self.plan: CampaignPlan | None = None
        self._tasks: dict[str, FacetTask | PairwiseTask] = {}
        self._by_annotator: dict[str, list[FacetTask | PairwiseTask]] = {}
        self._done: set[str] = set()
        if plan is not None:
            self._install_plan(plan)

    def _install_plan(self, plan: CampaignPlan) -> None:
        tasks = plan.tasks
        ids = [t.task_id for t in tasks]
        if len(set(ids)) != len(ids):
            raise CorpusError("plan contains duplicate task ids")
        for t in tasks:
            if isinstance(t, FacetTask):
                if (t.system_id, t.review_id) not in self.corpus.summaries:
                    raise CorpusError(f"task {t.task_id}: no summary for ({t.system_id}, {t.review_id})")
            else:
                for s in (t.system_a, t.system_b):
                    if (s, t.review_id) not in self.corpus.summaries:
                        raise CorpusError(f"task {t.task_id}: no summary for ({s}, {t.review_id})")
        self.plan = plan
        self._tasks = {t.task_id: t for t in tasks}
        self._by_annotator = {}
        for t in tasks:
            self._by_annotator.setdefault(t.annotator, []).append(t)
        self._done = set()
        for entry in self.log.entries:
            if entry.task_id is not None and entry.task_id in self._tasks:
                self._done.add(entry.task_id)

    def upload_plan(self, plan_text: str) -> int:
        with self._lock:
            if len(self.log) > 0:
                raise ServiceError(409, "campaign_locked",
                                   "annotations already logged; cannot replace the campaign")
            with tempfile.NamedTemporaryFile("w", suffix=".jsonl", delete=False) as fh:
                fh.write(plan_text)
                tmp = fh.name
            try:
                plan = campaign_mod.load_plan(tmp)
                self._install_plan(plan)
            except (CorpusError, KeyError, ValueError) as e:
                raise ServiceError(422, "invalid_plan", str(e)) from None
            finally:
                Path(tmp).unlink(missing_ok=True)
            return len(self._tasks)

    def _require_plan(self) -> None:
        if self.plan is None:
            raise ServiceError(409, "no_campaign", "no campaign plan loaded")

    def _envelope(self, task: FacetTask | PairwiseTask) -> dict:
        target = self.corpus.reviews[task.review_id].target
        if isinstance(task, FacetTask):
            generated = self.corpus.summaries[(task.system_id, task.review_id)].summary
            return {
                "task_id": task.task_id,
                "kind": "facet",
                "target": target,
                "generated": generated,
                "questions": FACET_QUESTIONS,
            }
        return {
            "task_id": task.task_id,
            "kind": "pairwise",
            "target": target,
            "summary_a": self.corpus.summaries[(task.system_a, task.review_id)].summary,
            "summary_b": self.corpus.summaries[(task.system_b, task.review_id)].summary,
            "question": PAIRWISE_QUESTION,
        }

    def next_task(self, annotator_id: str) -> dict | None:
        self._require_plan()
        if annotator_id not in self._by_annotator:
            raise ServiceError(404, "unknown_annotator", f"unknown annotator {annotator_id!r}")
        for task in self._by_annotator[annotator_id]:
            if task.task_id not in self._done:
                return self._envelope(task)
        return None

    def submit(self, body: Mapping) -> dict:
        self._require_plan()
        for name in ("annotation_id", "annotator_id", "task_id"):
            if not body.get(name):
                raise ServiceError(422, "missing_field", f"missing field {name!r}")
        task = self._tasks.get(body["task_id"])
        if task is None:
            raise ServiceError(404, "unknown_task", f"unknown task {body['task_id']!r}")
        if task.annotator != body["annotator_id"]:
            raise ServiceError(403, "task_annotator_mismatch",
                               f"task {task.task_id} is not assigned to {body['annotator_id']!r}")
        try:
            record: FacetAnnotation | PairwiseAnnotation
            if isinstance(task, FacetTask):
                answers = {name: str(body[name]) for name in FACET_FIELDS if name in body}
                missing = [name for name in FACET_FIELDS if name not in answers]
                if missing:
                    raise ServiceError(422, "missing_answer", f"missing answers: {missing}")
                record = FacetAnnotation(
                    annotation_id=body["annotation_id"],
                    annotator_id=body["annotator_id"],
                    review_id=task.review_id,
                    system_id=task.system_id,
                    comment=body.get("comment"),
                    **answers,
                )
            else:
                record = PairwiseAnnotation(
                    annotation_id=body["annotation_id"],
                    annotator_id=body["annotator_id"],
                    review_id=task.review_id,
                    system_a=task.system_a,
                    system_b=task.system_b,
                    preference=str(body.get("preference", "")),
                    justification=body.get("justification"),
                )
        except ValidationError as e:
            raise ServiceError(422, "invalid_answer", str(e)) from None
        with self._lock:
            if task.task_id in self._done:
                # only an identical resubmission may be re-acknowledged
                try:
                    ack = self.log.existing_ack(record)
                except ValidationError as e:
                    raise ServiceError(409, "task_already_done", str(e)) from None
                if ack is None:
                    raise ServiceError(409, "task_already_done",
                                       f"task {task.task_id} already has a different annotation")
            else:
                try:
                    ack = self.log.append(record, task_id=task.task_id)
                except ValidationError as e:
                    raise ServiceError(409, "annotation_conflict", str(e)) from None
                self._done.add(task.task_id)
        return {"annotation_id": ack.annotation_id, "seq": ack.seq, "duplicate": ack.duplicate}

    def progress(self) -> dict:
        self._require_plan()
        annotators = {}
        for annotator in sorted(self._by_annotator):
            tasks = self._by_annotator[annotator]
            done = [t for t in tasks if t.task_id in self._done]
            annotators[annotator] = {
                "total": len(tasks),
                "done": len(done),
                "facet_done": sum(1 for t in done if isinstance(t, FacetTask)),
                "pairwise_done": sum(1 for t in done if isinstance(t, PairwiseTask)),
            }
        systems: dict[str, dict[str, int]] = {}
        for t in self._tasks.values():
            names = [t.system_id] if isinstance(t, FacetTask) else [t.system_a, t.system_b]
            for s in names:
                row = systems.setdefault(s, {"total": 0, "done": 0})
                row["total"] += 1
                row["done"] += int(t.task_id in self._done)
        return {
            "annotators": annotators,
            "systems": dict(sorted(systems.items())),
            "total": len(self._tasks),
            "done": len(self._done),
        }


def build_app(service: AnnotationService) -> FastAPI:
    app = FastAPI(title="annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ServiceError)
    async def _service_error(_request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.get("/tasks/next")
    def tasks_next(annotator: str = Query(...)):
        return {"task": service.next_task(annotator)}

    @app.post("/annotations")
    async def annotations(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise ServiceError(400, "invalid_json", "request body is not valid JSON")
        if not isinstance(body, dict):
            raise ServiceError(400, "invalid_json", "request body must be a JSON object")
        return service.submit(body)

    @app.get("/progress")
    def progress():
        return service.progress()

    @app.get("/export")
    def export():
        return PlainTextResponse(service.log.export_text(), media_type="application/x-ndjson")

    @app.post("/campaigns")
    async def campaigns(request: Request):
        text = (await request.body()).decode("utf-8")
        return {"tasks": service.upload_plan(text)}

    return app


def serve(service: AnnotationService, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Run the service until terminated."""
    import uvicorn

    uvicorn.run(build_app(service), host=host, port=port, log_level="warning")
