"""Long-running reward endpoint for RL trainers.

A deliberately small HTTP surface so trainers in any ecosystem can call it
without client libraries:

    POST /score   JSON body {batch_id, items: [{candidate_id, task_id,
                  source}], alpha?, normalize?} -> {batch_id, rewards: [...],
                  timing: {...}}. Item order is preserved; an unknown task_id
                  yields a per-item error record, the batch still succeeds.
    GET  /health  {status, queue_depth}

Scoring fans out to a shared worker pool; responses are assembled in request
order so results are deterministic under concurrency.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from rewardengine.detectors import DetectorRegistry
from rewardengine.harness import HarnessError, ResourceLimits
from rewardengine.reward import RewardConfig, hybrid_reward, normalize_batch
from rewardengine.tasks import CandidateProgram, TaskSpec

logger = logging.getLogger(__name__)

MAX_BATCH_ITEMS = 1024


class RewardService:
    def __init__(self, tasks: list[TaskSpec], registry: DetectorRegistry,
                 limits: ResourceLimits | None = None,
                 config: RewardConfig | None = None,
                 workers: int = 4,
                 max_batch_items: int = MAX_BATCH_ITEMS):
        self.tasks = {t.task_id: t for t in tasks}
        self.registry = registry
        self.limits = limits or ResourceLimits(workers=1)
        self.config = config or RewardConfig()
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self.max_batch_items = max_batch_items
        self._in_flight = 0
        self._lock = threading.Lock()

    @property
    def queue_depth(self) -> int:
        with self._lock:
            return self._in_flight

    def _score_item(self, item: dict, config: RewardConfig) -> dict:
        candidate_id = str(item.get("candidate_id", ""))
        task_id = str(item.get("task_id", ""))
        task = self.tasks.get(task_id)
        if task is None:
            return {"candidate_id": candidate_id, "task_id": task_id,
                    "error": f"unknown task_id {task_id!r}"}
        candidate = CandidateProgram(candidate_id, task_id,
                                     str(item.get("source", "")))
        try:
            breakdown = hybrid_reward(candidate, task, self.registry,
                                      self.limits, config)
        except HarnessError as exc:
            return {"candidate_id": candidate_id, "task_id": task_id,
                    "error": f"infrastructure: {exc}"}
        return breakdown.to_record()

    def score_batch(self, request: dict) -> dict:
        items = request.get("items", [])
        if not isinstance(items, list):
            raise ValueError("items must be a list")
        if len(items) > self.max_batch_items:
            raise ValueError(
                f"batch of {len(items)} items exceeds limit {self.max_batch_items}")
        config = self.config
        overrides = {}
        if "alpha" in request:
            overrides["alpha"] = float(request["alpha"])
        if "normalize" in request:
            overrides["normalize"] = bool(request["normalize"])
        if overrides:
            config = RewardConfig(
                alpha=overrides.get("alpha", config.alpha),
                penalty=config.penalty,
                normalize=overrides.get("normalize", config.normalize),
                epsilon=config.epsilon,
            )
        with self._lock:
            self._in_flight += len(items)
        start = time.monotonic()
        try:
            records = list(self.pool.map(
                lambda item: self._score_item(item, config), items))
        finally:
            with self._lock:
                self._in_flight -= len(items)
        if config.normalize and records:
            scored = [r for r in records if "r_hybrid" in r]
            if scored:
                from rewardengine.reward import RewardBreakdown
                fake = [RewardBreakdown(
                    candidate_id=r["candidate_id"], r_quality=r["r_quality"],
                    r_function=r["r_function"], r_hybrid=r["r_hybrid"],
                    runnable=r["runnable"], findings_count=r["findings_count"],
                    tests_passed=r["tests_passed"], tests_total=r["tests_total"],
                ) for r in scored]
                for r, b in zip(scored, normalize_batch(fake, config)):
                    r["normalized"] = b.normalized
        return {
            "schema_version": 1,
            "batch_id": request.get("batch_id"),
            "rewards": records,
            "timing": {"wall_ms": round((time.monotonic() - start) * 1000.0, 3)},
        }


class _Handler(BaseHTTPRequestHandler):
    service: RewardService  # set by make_server

    def log_message(self, fmt, *args):
        logger.debug("http: " + fmt, *args)

    def _reply(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            self._reply(200, {"status": "ok",
                              "queue_depth": self.service.queue_depth})
        else:
            self._reply(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/score":
            self._reply(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length) or b"{}")
            response = self.service.score_batch(request)
        except ValueError as exc:
            self._reply(400, {"error": str(exc)})
            return
        except Exception as exc:  # defensive: a batch must never kill the server
            logger.exception("batch scoring failed")
            self._reply(500, {"error": f"internal error: {exc}"})
            return
        self._reply(200, response)


def make_server(host: str, port: int, service: RewardService) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    return server


def serve_forever(host: str, port: int, service: RewardService) -> None:
    server = make_server(host, port, service)
    logger.info("reward service listening on %s:%d", host, server.server_port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        service.pool.shutdown(wait=True)
