"""Publication-style figures for posterior-number-of-components sweeps."""

from .render import (
    REQUIRED_COLUMNS,
    FigureSpec,
    Panel,
    Row,
    SchemaError,
    Series,
    aggregate,
    display_k_max,
    load_rows,
    render_posterior_bars,
)

__version__ = "0.1.0"

__all__ = [
    "REQUIRED_COLUMNS",
    "FigureSpec",
    "Panel",
    "Row",
    "SchemaError",
    "Series",
    "aggregate",
    "display_k_max",
    "load_rows",
    "render_posterior_bars",
    "__version__",
]
