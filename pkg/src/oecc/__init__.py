"""OOD detection with outlier exposure and confidence control, on a from-scratch numpy MLP."""

__version__ = "0.1.0"
