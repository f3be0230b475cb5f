import logging
from typing import List

from fastapi import APIRouter, Path

from app.core.cooccur import DirectionPattern, compute_glcm, enumerate_directions, normalize
from app.core.ndgrid import NdImage, from_nested, from_slices
from app.models.schemas import (
    DirectionsResponse,
    FeaturesRequest,
    FeatureVector,
    GlcmRequest,
    GlcmResponse,
)
from app.services.feature_service import feature_service
from app.utils.exceptions import ShapeError, handle_api_error

logger = logging.getLogger(__name__)

router = APIRouter()


def _image_from_request(slices: List[List[List[int]]], levels: int, flat: bool) -> NdImage:
    """Con `flat` el único corte se interpreta como imagen 2-D."""
    if flat:
        if len(slices) != 1:
            raise ShapeError("flat=True requiere exactamente un corte")
        return from_nested(slices[0], levels)
    return from_slices(slices, levels)


@router.get("/directions/{n}", response_model=DirectionsResponse)
async def get_directions(n: int = Path(..., ge=1, le=8)):
    """Direcciones canónicas independientes en n dimensiones"""
    directions = enumerate_directions(n)
    return DirectionsResponse(
        n=n,
        count=len(directions),
        directions=[list(pattern.components) for pattern in directions]
    )


@router.post("/glcm", response_model=GlcmResponse)
async def post_glcm(request: GlcmRequest):
    """Matriz de co-ocurrencia (o su normalización) de la imagen enviada"""
    try:
        image = _image_from_request(request.slices, request.levels, request.flat)
        matrix = compute_glcm(image, DirectionPattern(components=request.direction), request.k)
        if request.normalize:
            probs = normalize(matrix).probs.tolist()
            return GlcmResponse(order=matrix.order, pair_total=matrix.pair_total, probs=probs)
        return GlcmResponse(order=matrix.order, pair_total=matrix.pair_total, counts=matrix.counts.tolist())
    except Exception as e:
        logger.error(f"Error calculando GLCM: {e}")
        handle_api_error(e, "Error al calcular la matriz de co-ocurrencia")


@router.post("/features", response_model=FeatureVector)
async def post_features(request: FeaturesRequest):
    """Características promediadas sobre direcciones de la imagen enviada"""
    try:
        image = _image_from_request(request.slices, request.levels, request.flat)
        directions = None
        if request.directions is not None:
            directions = [DirectionPattern(components=components) for components in request.directions]
        return feature_service.averaged_features(
            image, k=request.k, directions=directions, symmetric=request.symmetric, mode=request.mode
        )
    except Exception as e:
        logger.error(f"Error extrayendo características: {e}")
        handle_api_error(e, "Error al extraer características")
