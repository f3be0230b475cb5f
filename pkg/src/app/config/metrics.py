from prometheus_fastapi_instrumentator import Instrumentator


def setup_metrics(app):
    """Métricas Prometheus de las peticiones HTTP, expuestas en /metrics."""
    Instrumentator(excluded_handlers=["/metrics"]).instrument(app).expose(app, include_in_schema=False)
