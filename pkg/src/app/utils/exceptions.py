from fastapi import HTTPException, status

# Códigos de salida del CLI
EXIT_USAGE = 2
EXIT_DATA = 3


class NdGlcmError(Exception):
    """Error base de todo el dominio (imágenes, matrices, índice, corpus)."""


class ShapeError(NdGlcmError):
    """Dimensiones o aridad incompatibles."""


class DomainError(NdGlcmError):
    """Valor fuera del dominio permitido (intensidades, niveles, parámetros)."""


class EmptyMatrixError(NdGlcmError):
    """La matriz de co-ocurrencia no tiene pares y no se puede normalizar."""


class SchemaError(NdGlcmError):
    """Vectores de características con esquema inconsistente."""


class DuplicateIdError(SchemaError):
    pass


class UnknownIdError(NdGlcmError):
    """Identificador de imagen inexistente en el índice."""


class DatasetError(NdGlcmError):
    """Árbol de dataset vacío o mal formado."""


class ImageFormatError(DatasetError):
    def __init__(self, path, detail: str):
        self.path = str(path)
        self.detail = detail
        super().__init__(f"{self.path}: {detail}")


def handle_api_error(error: Exception, message: str):
    """Traduce errores del dominio a una excepción HTTP apropiada"""
    if isinstance(error, HTTPException):
        raise error
    if isinstance(error, UnknownIdError):
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail=f"{message}: {error}"
        )
    if isinstance(error, (ShapeError, DomainError, EmptyMatrixError, SchemaError)):
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"{message}: {error}"
        )
    raise HTTPException(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        detail=f"{message}: Error interno del servidor"
    )
