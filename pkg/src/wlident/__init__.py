"""wlident - Weisfeiler-Leman refinement, coherent configurations and identification."""

__version__ = "0.1.0"
