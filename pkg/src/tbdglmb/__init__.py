"""Track-before-detect delta-GLMB multi-target tracking on radar-cube intensities."""
__version__ = "0.1.0"
