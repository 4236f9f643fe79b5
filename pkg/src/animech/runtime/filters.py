"""Action upsampling and smoothing for the 50 Hz -> 600 Hz control path."""

from __future__ import annotations

import math

import numpy as np


def first_order_hold(a_prev, a_next, k: int, substeps: int):
    """Linear interpolation between successive actions; k=0 gives a_prev."""
    if not 0 <= k <= substeps:
        raise ValueError("substep index out of range")
    frac = k / substeps
    return a_prev + frac * (np.asarray(a_next) - a_prev)


def lowpass_alpha(dt: float, cutoff_hz: float) -> float:
    """Single-pole coefficient a = dt / (dt + 1/(2 pi f_c))."""
    if dt <= 0.0 or cutoff_hz <= 0.0:
        raise ValueError("dt and cutoff must be positive")
    rc = 1.0 / (2.0 * math.pi * cutoff_hz)
    return dt / (dt + rc)


def lowpass_step(y_prev, u, dt: float, cutoff_hz: float):
    """One step of the single-pole low-pass filter."""
    a = lowpass_alpha(dt, cutoff_hz)
    return y_prev + a * (np.asarray(u) - y_prev)


class LowPassFilter:
    """Stateful per-channel single-pole filter."""

    def __init__(self, dt: float, cutoff_hz: float, initial=0.0):
        self.alpha = lowpass_alpha(dt, cutoff_hz)
        self.state = np.asarray(initial, dtype=float)

    def reset(self, value) -> None:
        self.state = np.asarray(value, dtype=float)

    def step(self, u):
        self.state = self.state + self.alpha * (np.asarray(u) - self.state)
        return self.state
