"""Small argument checks shared by the estimators and physics helpers."""

import math
import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_positive(value, name, allow_zero=False):
    """Return ``value`` as float, raising ValueError unless finite and > 0."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_finite(value, name):
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def check_midi_velocity(vel):
    """Strike velocities are 1..127; 0 is a note-off and never reaches here."""
    if isinstance(vel, bool) or not isinstance(vel, numbers.Integral):
        raise TypeError(f"MIDI velocity must be an integer, got {vel!r}")
    if not 1 <= vel <= 127:
        raise ValueError(f"MIDI velocity must be in 1..127, got {vel}")
    return int(vel)


def check_velocity_array(X):
    """Accept a 1-D sequence or an (n, 1) column of MIDI velocities."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, dtype=None, ensure_2d=True)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single velocity column, got shape {X.shape}")
    col = X[:, 0]
    if not np.all(np.equal(np.mod(col, 1), 0)):
        raise ValueError("MIDI velocities must be integers")
    col = col.astype(int)
    if col.min() < 1 or col.max() > 127:
        raise ValueError("MIDI velocities must be in 1..127")
    return col
