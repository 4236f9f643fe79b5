"""Actuator temperature dynamics, identification, and the thermal CBF terms.

The temperature of a loaded actuator is modeled as a first-order system
driven by squared torque (Joule heating):

    dT/dt = -alpha (T - T_ambient) + beta tau^2

Keeping T below T_max is enforced through the control-barrier condition

    -dT/dt + gamma_T (T_max - T) >= 0

whose violation magnitude becomes a reward penalty. Temperatures entering
observations and rewards are clipped to [T_clip_min, T_clip_max].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnidentifiableError(ValueError):
    """Raised when the regression data cannot pin down the thermal parameters."""


@dataclass(frozen=True)
class ThermalParams:
    alpha: float  # 1/s
    beta: float  # C / (N m)^2 / s
    t_ambient: float  # C

    def derivative(self, temperature: float, torque: float) -> float:
        return -self.alpha * (temperature - self.t_ambient) + self.beta * torque**2

    def steady_state(self, torque: float) -> float:
        return self.t_ambient + self.beta * torque**2 / self.alpha


@dataclass(frozen=True)
class ThermalCbfConfig:
    t_max: float = 80.0
    t_clip_min: float = 70.0
    t_clip_max: float = 85.0
    gamma: float = 0.312  # 1/s

    def __post_init__(self):
        if not (self.t_clip_min < self.t_max < self.t_clip_max):
            raise ValueError("require T_clip_min < T_max < T_clip_max")
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")

    def clip(self, temperature):
        """Clip observed/rewarded temperatures to the training interval."""
        return np.clip(temperature, self.t_clip_min, self.t_clip_max)


def step_temperature(
    temperature: float, torque: float, params: ThermalParams, dt: float
) -> float:
    """One explicit-Euler step of the first-order thermal model."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return temperature + dt * params.derivative(temperature, torque)


def simulate_temperature(
    t0: float, torques: np.ndarray, params: ThermalParams, dt: float
) -> np.ndarray:
    """Roll the model forward; returns len(torques)+1 samples starting at t0."""
    torques = np.asarray(torques, dtype=float)
    out = np.empty(len(torques) + 1)
    out[0] = temperature = float(t0)
    # vectorized form of repeated step_temperature for long identification runs
    decay = 1.0 - params.alpha * dt
    drive = dt * (params.alpha * params.t_ambient + params.beta * torques**2)
    for k in range(len(torques)):
        temperature = temperature * decay + drive[k]
        out[k + 1] = temperature
    return out


@dataclass(frozen=True)
class ThermalFit:
    params: ThermalParams
    residual_rms: float  # C/s, on the Euler-difference regression


def fit_thermal(
    temperatures: np.ndarray, torques: np.ndarray, dt: float = 0.02
) -> ThermalFit:
    """Least squares on the Euler discretization of the thermal model.

    Solves (T[k+1]-T[k])/dt = -alpha T[k] + alpha*T_ambient + beta tau[k]^2
    for (alpha, alpha*T_ambient, beta), then recovers T_ambient.
    """
    temperatures = np.asarray(temperatures, dtype=float)
    torques = np.asarray(torques, dtype=float)
    if temperatures.shape != torques.shape or temperatures.ndim != 1:
        raise ValueError("temperature and torque series must be equal-length 1-D")
    if len(temperatures) < 100:
        raise ValueError("need at least 100 samples to identify thermal params")
    if dt <= 0.0:
        raise ValueError("dt must be positive")

    y = np.diff(temperatures) / dt
    a = np.column_stack(
        [-temperatures[:-1], np.ones(len(y)), torques[:-1] ** 2]
    )
    # rank via singular values so constant-T / constant-torque inputs are caught
    svals = np.linalg.svd(a, compute_uv=False)
    if svals[-1] < 1e-9 * svals[0]:
        raise UnidentifiableError(
            "unidentifiable: temperature/torque data does not excite all parameters"
        )
    coef, _, _, _ = np.linalg.lstsq(a, y, rcond=None)
    alpha, alpha_t_amb, beta = coef
    if alpha <= 0.0:
        raise UnidentifiableError("unidentifiable: fitted alpha is not positive")
    params = ThermalParams(
        alpha=float(alpha), beta=float(beta), t_ambient=float(alpha_t_amb / alpha)
    )
    resid = a @ coef - y
    return ThermalFit(params=params, residual_rms=float(np.sqrt(np.mean(resid**2))))


def feasible_gamma(
    params: ThermalParams, t_max: float, t_clip_max: float
) -> float:
    """Largest gamma keeping the CBF condition feasible at the clip ceiling.

    At T = T_clip_max with zero heat generation (tau = 0), requiring
    -dT/dt + gamma (T_max - T) >= 0 rearranges to
    gamma = alpha (T_clip_max - T_ambient) / (T_clip_max - T_max).
    """
    if not t_clip_max > t_max:
        raise ValueError("T_clip_max must exceed T_max")
    if not t_clip_max > params.t_ambient:
        raise ValueError("T_clip_max must exceed T_ambient")
    return params.alpha * (t_clip_max - params.t_ambient) / (t_clip_max - t_max)


def thermal_cbf_penalty(
    temperature: float, t_dot: float, cfg: ThermalCbfConfig
) -> float:
    """Violation magnitude of -dT/dt + gamma (T_max - T) >= 0; zero when it holds.

    Callers clip `temperature` beforehand (cfg.clip); `t_dot` is the model
    derivative at the current step, not a finite difference of measurements.
    """
    condition = -t_dot + cfg.gamma * (cfg.t_max - temperature)
    return max(0.0, -condition)
