from __future__ import annotations

import numpy as np

from ..core_nn import MlpModel, logits, softmax


def msp_score(model: MlpModel, x) -> np.ndarray:
    """Maximum softmax probability per row; lies in [1/K, 1]."""
    return softmax(logits(model, x)).max(axis=1)
