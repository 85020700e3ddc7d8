"""Central finite-difference checks for the hand-written backward passes."""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .attention import (AttentionParams, Field, LayerParams, attention_backward,
                        attention_forward, transformer_layer, transformer_layer_backward)

DEFAULT_STEP = 1e-5


def numeric_grad(loss: Callable[[], float], arr: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences of ``loss`` w.r.t. every entry of ``arr`` (perturbed in place)."""
    grad = np.empty_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = loss()
        flat[i] = orig - step
        down = loss()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``|a - n| / max(|a|, |n|)`` in the 2-norm; 0 when both vanish."""
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if denom < 1e-12:
        return float(np.linalg.norm(analytic - numeric))
    return float(np.linalg.norm(analytic - numeric) / denom)


def check_attention(h: np.ndarray, fld: Field, params: AttentionParams, upstream: np.ndarray,
                    step: float = DEFAULT_STEP) -> Dict[str, float]:
    """Relative error per parameter tensor (and ``"h"``) for ``loss = sum(upstream * y)``."""
    h = h.copy()

    def loss():
        return float((attention_forward(h, fld, params)[0] * upstream).sum())

    y, cache = attention_forward(h, fld, params)
    dh, grads = attention_backward(upstream, cache, params)
    errors = {name: relative_error(grads[name], numeric_grad(loss, arr, step))
              for name, arr in params.arrays().items()}
    errors["h"] = relative_error(dh, numeric_grad(loss, h, step))
    return errors


def check_layer(h: np.ndarray, fld: Field, params: LayerParams, upstream: np.ndarray,
                step: float = DEFAULT_STEP) -> Dict[str, float]:
    h = h.copy()

    def loss():
        return float((transformer_layer(h, fld, params)[0] * upstream).sum())

    _, cache = transformer_layer(h, fld, params)
    dh, grads = transformer_layer_backward(upstream, cache, params)
    errors = {name: relative_error(grads[name], numeric_grad(loss, arr, step))
              for name, arr in params.arrays().items()}
    errors["h"] = relative_error(dh, numeric_grad(loss, h, step))
    return errors
