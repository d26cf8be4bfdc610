"""Input validation helpers.

scikit-learn's ``check_array`` rejects complex data, so signals are checked
here instead.
"""
import numbers

import numpy as np

from .exceptions import InvalidGridError
from .grids import SampledSignal, TimeGrid


def check_complex_array(x, ndim=None, name="x", allow_empty=False):
    """Finite complex ndarray, optionally of a fixed dimension."""
    if isinstance(x, SampledSignal):
        x = x.samples
    try:
        arr = np.array(x, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be numeric: {exc}") from exc
    if ndim is not None:
        if arr.ndim == ndim - 1:
            arr = arr[None]
        if arr.ndim != ndim:
            raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def check_real_array(x, name="x"):
    arr = check_complex_array(x, name=name)
    if np.any(arr.imag != 0):
        raise ValueError(f"{name} must be real")
    return arr.real


def check_positive(value, name, strict=True):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if (strict and value <= 0) or (not strict and value < 0):
        raise ValueError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value!r}")
    return float(value)


def check_int(value, name, minimum=1):
    if (isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value)
            or int(value) != value or value < minimum):
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_signal(q, grid=None):
    """Return a :class:`SampledSignal`; raw arrays need ``grid``."""
    if isinstance(q, SampledSignal):
        if grid is not None and q.grid != grid:
            raise InvalidGridError("signal is not on the expected grid")
        return q
    if grid is None:
        raise ValueError("a grid is required to interpret a raw sample array")
    return SampledSignal(grid, check_complex_array(q, ndim=1, name="q"))


def check_time_grid(grid):
    if not isinstance(grid, TimeGrid):
        raise TypeError("expected a TimeGrid")
    return grid
