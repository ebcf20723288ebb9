"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError, ValidationError


def check_image(img, name="image", *, dtype=np.float64, allow_nan=False) -> np.ndarray:
    """Return ``img`` as a 2D float array, raising on wrong rank or non-finite values."""
    arr = np.asarray(img, dtype=dtype)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not allow_nan and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_mask(mask, shape=None, name="mask") -> np.ndarray:
    arr = np.asarray(mask)
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise ValidationError(f"{name} must be boolean")
        arr = arr.astype(bool)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_same_shape(*arrays, names=None):
    shapes = [np.shape(a) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        label = ", ".join(names) if names else "inputs"
        raise DimensionMismatchError(f"{label} have mismatched shapes {shapes}")
    return shapes[0]


def check_unit_range(arr, name="values", atol=0.0):
    if arr.size and (arr.min() < -atol or arr.max() > 1.0 + atol):
        raise ValidationError(f"{name} must lie in [0, 1]")


def readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr
