from . import analysis, status

__all__ = ["analysis", "status"]
