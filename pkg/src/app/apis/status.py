from fastapi import APIRouter

from app.core.config import settings
from app.models.schemas import StatusResponse

router = APIRouter()


@router.get("/status", response_model=StatusResponse)
async def get_status():
    """Verifica el estado del servicio"""
    return StatusResponse(status="OK", message="Service is running", version=settings.VERSION)
