"""Celery application instance for distributing analysis rows."""
from __future__ import annotations

from celery import Celery

from .config import get_settings


settings = get_settings()

celery_app = Celery(
    "distribution_matching",
    broker=settings.celery_broker_url,
    backend=settings.celery_result_backend,
)

celery_app.conf.task_default_queue = "analysis"
celery_app.conf.task_routes = {"mcdm.app.tasks.*": {"queue": "analysis"}}
celery_app.autodiscover_tasks(["mcdm.app"])
