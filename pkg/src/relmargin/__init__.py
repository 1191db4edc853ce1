"""relmargin: bi-encoder embedding training with relevance-margin losses."""

from relmargin._backend import NAME as BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
