"""JSON-over-HTTP service exposing the train/explain/evaluate pipeline.

Stateless per request apart from the model registry; identical requests
produce identical responses. Infeasible CE models come back as 409 with
the conflicting criterion tags in the body.
"""

from __future__ import annotations

import hashlib
import json
import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__, learners
from .builder import CeConfig, ConfigError, InfeasibleError, generate
from .dataset import Dataset, ParseError
from .evaluate import hull_membership, score_set
from .schema import SchemaError


class ApiError(Exception):
    def __init__(self, status: int, detail: str, **extra):
        super().__init__(detail)
        self.status = status
        self.body = {"detail": detail, **extra}


def _model_id(family: str, hyperparams: dict | None, seed: int) -> str:
    blob = json.dumps({"family": family, "hyperparams": hyperparams or {}, "seed": seed},
                      sort_keys=True)
    return f"{family}-s{seed}-{hashlib.sha1(blob.encode()).hexdigest()[:8]}"


def create_app(dataset: Dataset, default_time_limit: float = 30.0) -> FastAPI:
    app = FastAPI(title="cemio service", version=__version__)
    registry: dict[str, learners.TrainedModel] = {}
    lock = threading.Lock()

    def envelope(payload: dict) -> dict:
        return {"engine_version": __version__, **payload}

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body)

    @app.exception_handler(RequestValidationError)
    async def _malformed(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed request body"})

    @app.exception_handler(json.JSONDecodeError)
    async def _bad_json(_req: Request, exc: json.JSONDecodeError):
        return JSONResponse(status_code=400, content={"detail": "malformed JSON"})

    async def read_json(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "malformed JSON body") from None
        if not isinstance(body, dict):
            raise ApiError(400, "request body must be a JSON object")
        return body

    @app.get("/schema")
    def get_schema():
        return envelope({"schema": dataset.schema.to_dict(),
                         "n_rows": len(dataset),
                         "labels": dataset.class_labels()})

    @app.get("/instances")
    def get_instances(limit: int = 20, offset: int = 0):
        rows = []
        for i in range(offset, min(offset + limit, len(dataset))):
            rows.append({"index": i, "record": dict(dataset.rows[i]),
                         "label": dataset.labels[i]})
        return envelope({"instances": rows, "total": len(dataset)})

    @app.get("/models")
    def get_models():
        with lock:
            items = [{"model_id": mid, "family": m.family, "task": m.task,
                      "classes": list(m.classes), "train_accuracy": m.train_accuracy}
                     for mid, m in registry.items()]
        return envelope({"models": items})

    @app.post("/train")
    async def post_train(request: Request):
        body = await read_json(request)
        family = body.get("family")
        if family not in learners.FAMILIES:
            raise ApiError(422, f"unknown family {family!r}")
        hyperparams = body.get("hyperparams")
        seed = int(body.get("seed", 0))
        mid = _model_id(family, hyperparams, seed)
        with lock:
            cached = mid in registry
        if not cached:
            try:
                model = learners.train(dataset, family, hyperparams, seed=seed)
            except (ValueError, learners.TrainingError) as exc:
                raise ApiError(422, str(exc)) from None
            with lock:
                registry[mid] = model
        with lock:
            model = registry[mid]
        return envelope({"model_id": mid, "family": family,
                         "train_accuracy": model.train_accuracy, "cached": cached})

    def _resolve_model(model_id) -> learners.TrainedModel:
        with lock:
            model = registry.get(model_id)
        if model is None:
            raise ApiError(422, f"unknown model_id {model_id!r}; POST /train first")
        return model

    @app.post("/explain")
    async def post_explain(request: Request):
        body = await read_json(request)
        model = _resolve_model(body.get("model_id"))
        has_index = "row_index" in body
        has_inline = "instance" in body
        if has_index == has_inline:
            raise ApiError(422, "provide exactly one of row_index or instance")
        if has_index:
            idx = body["row_index"]
            if not isinstance(idx, int) or not 0 <= idx < len(dataset):
                raise ApiError(422, f"row_index out of range: {idx!r}")
            factual = dict(dataset.rows[idx])
        else:
            factual = body["instance"]
            if not isinstance(factual, dict):
                raise ApiError(422, "instance must be a record object")
        try:
            config = CeConfig.from_dict(body.get("config", {}))
            if "target" in body:
                config.target_label = body["target"]
            if "m" in body:
                config.m = int(body["m"])
            if config.m < 1:
                raise ApiError(422, "m must be >= 1")
            if config.time_limit is None or config.time_limit > default_time_limit:
                config.time_limit = default_time_limit
            result = generate(factual, model, dataset, config)
        except ApiError:
            raise
        except InfeasibleError as exc:
            raise ApiError(409, "counterfactual model is infeasible", tags=exc.tags) from None
        except (ConfigError, SchemaError, ParseError, ValueError) as exc:
            raise ApiError(422, str(exc)) from None

        metrics = None
        degraded = False
        if result.counterfactuals:
            metrics = score_set(factual, [ce.record for ce in result.counterfactuals],
                                model, dataset, config.target_label)
            degraded = metrics.validity < 1.0
        return envelope({
            "result": result.to_dict(),
            "metrics": metrics.to_dict() if metrics else None,
            "degraded": degraded,
            "solve_stats": result.solve_stats,
        })

    @app.post("/hull-check")
    async def post_hull_check(request: Request):
        body = await read_json(request)
        label = body.get("label")
        if label not in dataset.labels:
            raise ApiError(422, f"unknown class label {label!r}")
        point = body.get("point")
        if not isinstance(point, dict):
            raise ApiError(422, "point must be a record object")
        epsilon = float(body.get("epsilon", 0.0))
        norm = body.get("p", 1)
        if norm not in (1, "inf"):
            raise ApiError(422, "p must be 1 or 'inf'")
        try:
            encoded = dataset.encode(point).vector
        except ParseError as exc:
            raise ApiError(422, str(exc)) from None
        cert = hull_membership(encoded, dataset, label, epsilon, norm)
        class_rows = dataset.class_indices(label)
        weights = [] if cert.weights is None else cert.weights
        support = sorted(
            ((int(class_rows[i]), float(w)) for i, w in enumerate(weights) if w > 1e-9),
            key=lambda t: -t[1])[:20]
        return envelope({
            "inside": cert.inside,
            "slack_norm": cert.slack_norm,
            "violation": cert.violation,
            "epsilon": epsilon,
            "p": norm,
            "lambda_support": support,
        })

    return app
