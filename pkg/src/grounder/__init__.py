"""Temporal language grounding: iterative cross-modal attention with
content-oriented window scoring, on a self-contained autodiff core."""

from .kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
