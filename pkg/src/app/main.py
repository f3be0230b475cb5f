from fastapi import FastAPI

from app.apis import analysis, status
from app.config.metrics import setup_metrics
from app.core.config import settings
from app.core.logger import setup_logging

setup_logging()

# creamos la instancia de FastAPI
app = FastAPI(
    title=settings.PROJECT_NAME,
    description=settings.PROJECT_DESCRIPTION,
    version=settings.VERSION,
    openapi_url=f"{settings.API_PREFIX}/openapi.json",
    docs_url="/api/docs",
    redoc_url="/api/redoc"
)

# configuramos las rutas
app.include_router(
    status.router,
    prefix=settings.API_PREFIX,
    tags=["Status"]
)

app.include_router(
    analysis.router,
    prefix=settings.API_PREFIX,
    tags=["Co-occurrence"]
)

setup_metrics(app)
