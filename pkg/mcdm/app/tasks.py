"""Celery tasks computing analysis rows, with an inline fallback."""
from __future__ import annotations

import logging
from typing import Any, Sequence

from celery import group
from celery.exceptions import TimeoutError
from kombu.exceptions import OperationalError

from .analysis import analyze_row
from .celery_app import celery_app
from .config import Settings, get_settings
from .logging_config import setup_logging
from .schemas import AnalysisRow, DmKind, McConfig, TargetDistribution


setup_logging()

logger = logging.getLogger(__name__)


def row_payload(n: int, kind: DmKind | str, t: TargetDistribution, mc: McConfig) -> dict[str, Any]:
    return {"n": n, "kind": DmKind(kind).value, "p1": t.p1, "mc": mc.model_dump()}


def compute_row_sync(payload: dict[str, Any]) -> dict[str, Any]:
    """Compute one row from a JSON payload."""

    row = analyze_row(
        int(payload["n"]),
        payload["kind"],
        TargetDistribution(p1=payload["p1"]),
        McConfig.model_validate(payload["mc"]),
    )
    return row.model_dump(mode="json")


@celery_app.task(name="mcdm.app.tasks.analyze_row")
def analyze_row_task(payload: dict[str, Any]) -> dict[str, Any]:
    return compute_row_sync(payload)


def _run_inline(payloads: Sequence[dict[str, Any]]) -> list[AnalysisRow]:
    return [AnalysisRow.model_validate(compute_row_sync(payload)) for payload in payloads]


def run_rows(payloads: Sequence[dict[str, Any]], settings: Settings | None = None, *, use_celery: bool | None = None) -> list[AnalysisRow]:
    """Compute rows in payload order, on the worker pool when enabled.

    Falls back to inline computation when the broker is unreachable or the group
    fails, so a sweep never depends on Redis being up.
    """

    settings = settings or get_settings()
    dispatch = settings.use_celery if use_celery is None else use_celery
    if not dispatch or not payloads:
        return _run_inline(payloads)

    try:
        async_result = group(analyze_row_task.s(payload) for payload in payloads).apply_async()
    except OperationalError as exc:  # Broker unavailable
        logger.warning("Celery broker unreachable, computing %d rows inline", len(payloads), exc_info=exc)
        return _run_inline(payloads)
    except Exception as exc:  # pragma: no cover - defensive
        logger.warning("Celery dispatch failed, computing rows inline", exc_info=exc)
        return _run_inline(payloads)

    try:
        # per-child gets also work for the eager results of task_always_eager
        results = [child.get(timeout=settings.task_timeout) for child in async_result.results]
    except TimeoutError:  # pragma: no cover - defensive
        logger.warning("Celery rows timed out after %ss, computing inline", settings.task_timeout)
        return _run_inline(payloads)
    except Exception as exc:  # pragma: no cover - defensive
        logger.warning("Celery rows failed, computing inline", exc_info=exc)
        return _run_inline(payloads)
    logger.info("Collected %d rows from Celery workers", len(results))
    return [AnalysisRow.model_validate(result) for result in results]
