from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: str = "ndglcm-cbir"
    PROJECT_DESCRIPTION: str = (
        "Matrices de co-ocurrencia n-dimensionales, características de traza "
        "y recuperación de imágenes por contenido"
    )
    VERSION: str = "1.0.0"
    API_PREFIX: str = "/api/v1"

    LOG_LEVEL: str = "INFO"

    # Valores por defecto del experimento de recuperación
    DEFAULT_DISTANCE: int = 1
    DEFAULT_RETRIEVED: int = 8
    INCLUDE_SELF: bool = True

    # 1 = un solo hilo; >1 activa los pools por dirección y por imagen
    WORKERS: int = 1

    # Raíz opcional de un corpus externo (p. ej. Brodatz aportado por el usuario)
    DATASET_ROOT: Optional[str] = None

    model_config = SettingsConfigDict(env_file=".env", env_prefix="NDGLCM_", extra="ignore")


settings = Settings()
