"""Show-function calibration: functional-to-actuator maps and jaw feedforward.

Expressive features (eyes, arms, jaw) are commanded in a functional space and
driven by linkages, so each actuator position is a fitted polynomial of the
functional coordinates: degree 1 suffices for the eye mechanism, the
arm-pitch coupling takes a cubic. The jaw adds a feedforward torque
c0 + c1 q + c_cos cos(q) compensating costume tension, fitted by least
squares from holding-torque samples.

The physical forward-kinematics solver is replaced by closed-form synthetic
mechanisms; the fitting pipeline is mechanism-agnostic and also accepts CSV
sample tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class AssemblyError(ValueError):
    """Mechanism cannot be assembled at the requested configuration."""


class FitError(ValueError):
    """Sample set cannot determine the requested fit."""


# ---------------------------------------------------------------------------
# polynomial functional->actuator maps


def _monomials(coords: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of the inputs with total degree <= degree."""
    coords = np.atleast_1d(np.asarray(coords, dtype=float))
    terms = [1.0]
    # iterative expansion keeps a stable, documented ordering
    exps = [((0,) * len(coords))]
    frontier = [((0,) * len(coords))]
    for _ in range(degree):
        nxt = []
        for e in frontier:
            for k in range(len(coords)):
                cand = tuple(v + (1 if i == k else 0) for i, v in enumerate(e))
                if sum(cand) <= degree and cand not in exps:
                    exps.append(cand)
                    nxt.append(cand)
        frontier = nxt
    vals = []
    for e in exps:
        v = 1.0
        for x, p in zip(coords, e):
            v *= x**p
        vals.append(v)
    return np.array(vals)


@dataclass(frozen=True)
class PolyMap:
    """Per-actuator polynomial over the functional coordinates."""

    degree: int
    n_inputs: int
    coefficients: np.ndarray  # (n_actuators, n_terms)

    def __call__(self, coords) -> np.ndarray:
        basis = _monomials(np.asarray(coords, dtype=float), self.degree)
        if len(basis) != self.coefficients.shape[1]:
            raise ValueError("coordinate dimension does not match the fit")
        return self.coefficients @ basis


@dataclass(frozen=True)
class LinkageSampleSet:
    functional: np.ndarray  # (B, n_inputs)
    actuator: np.ndarray  # (B, n_actuators)
    bounds: tuple[tuple[float, float], ...]  # per functional coordinate

    def __post_init__(self):
        f, a = np.asarray(self.functional), np.asarray(self.actuator)
        if f.shape[0] != a.shape[0]:
            raise ValueError("functional/actuator sample counts differ")
        for k, (lo, hi) in enumerate(self.bounds):
            if np.any(f[:, k] < lo - 1e-12) or np.any(f[:, k] > hi + 1e-12):
                raise ValueError(f"functional coordinate {k} outside its bounds")


def fit_poly_map(samples: LinkageSampleSet, degree: int) -> tuple[PolyMap, float]:
    """Least-squares fit per actuator channel; returns (map, max |residual|)."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    f = np.asarray(samples.functional, dtype=float)
    a = np.asarray(samples.actuator, dtype=float)
    basis = np.stack([_monomials(row, degree) for row in f])
    n_terms = basis.shape[1]
    if len(f) < 10 * n_terms:
        raise FitError(
            f"need at least {10 * n_terms} samples for a degree-{degree} fit "
            f"over {f.shape[1]} inputs, got {len(f)}"
        )
    svals = np.linalg.svd(basis, compute_uv=False)
    if svals[-1] < 1e-10 * svals[0]:
        raise FitError("rank-deficient design matrix: samples do not span the basis")
    coef, *_ = np.linalg.lstsq(basis, a, rcond=None)
    poly = PolyMap(degree=degree, n_inputs=f.shape[1], coefficients=coef.T)
    residual = float(np.max(np.abs(basis @ coef - a)))
    return poly, residual


def sample_mechanism(
    mechanism, bounds, per_axis: int, rng: np.random.Generator | None = None
) -> LinkageSampleSet:
    """Uniform sampling of a mechanism's functional region."""
    bounds = tuple(bounds)
    if rng is None:
        grids = [np.linspace(lo, hi, per_axis) for lo, hi in bounds]
        mesh = np.meshgrid(*grids, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        pts = rng.uniform(lo, hi, size=(per_axis ** len(bounds), len(bounds)))
    acts = np.stack([np.atleast_1d(mechanism(p)) for p in pts])
    return LinkageSampleSet(functional=pts, actuator=acts, bounds=bounds)


# ---------------------------------------------------------------------------
# synthetic mechanisms standing in for the physical FK solver


@dataclass(frozen=True)
class FourBarLinkage:
    """Planar 4-bar: ground g, input crank a, coupler b, output rocker c.

    Pivots at (0,0) and (g,0); output angle measured at the rocker pivot.
    """

    crank: float
    coupler: float
    rocker: float
    ground: float

    def output_angle(self, input_angle: float) -> float:
        ax = self.crank * math.cos(input_angle)
        az = self.crank * math.sin(input_angle)
        dx = self.ground - ax
        dz = -az
        d2 = dx * dx + dz * dz
        d = math.sqrt(d2)
        if d > self.coupler + self.rocker or d < abs(self.coupler - self.rocker):
            raise AssemblyError(
                f"four-bar cannot assemble at input {input_angle:.3f} rad"
            )
        # circle intersection about the crank tip (r=coupler) and the rocker
        # pivot (r=rocker); take the upper (+z) assembly branch
        t = (d2 + self.rocker**2 - self.coupler**2) / (2.0 * d)
        h2 = self.rocker**2 - t * t
        h = math.sqrt(max(0.0, h2))
        ux, uz = -dx / d, -dz / d  # rocker pivot -> crank tip direction
        pz_a = t * uz + h * ux
        pz_b = t * uz - h * ux
        if pz_a >= pz_b:
            px, pz = self.ground + t * ux - h * uz, pz_a
        else:
            px, pz = self.ground + t * ux + h * uz, pz_b
        return math.atan2(pz, px - self.ground)

    def symmetric_input(self) -> float:
        """Input angle of the mirror-symmetric configuration (crank == rocker)."""
        if abs(self.crank - self.rocker) > 1e-12:
            raise ValueError("symmetric configuration needs crank == rocker")
        c = (self.ground - self.coupler) / (2.0 * self.crank)
        if not -1.0 <= c <= 1.0:
            raise AssemblyError("no symmetric configuration for these lengths")
        return math.acos(c)


@dataclass(frozen=True)
class EyeMechanism:
    """Eye pitch + eyelid pack: exactly linear functional->actuator map."""

    gains: tuple[tuple[float, float], ...] = ((1.25, -0.30), (0.40, 1.10))
    offsets: tuple[float, float] = (0.05, -0.02)
    pitch_range: tuple[float, float] = (-0.5, 0.5)
    lid_range: tuple[float, float] = (0.0, 1.2)

    def __call__(self, coords) -> np.ndarray:
        pitch, lid = coords
        lo, hi = self.pitch_range
        if not (lo - 1e-9 <= pitch <= hi + 1e-9):
            raise AssemblyError("eye pitch outside mechanism range")
        lo, hi = self.lid_range
        if not (lo - 1e-9 <= lid <= hi + 1e-9):
            raise AssemblyError("eyelid outside mechanism range")
        g = np.array(self.gains)
        return g @ np.array([pitch, lid]) + np.array(self.offsets)


@dataclass(frozen=True)
class ArmLinkage:
    """Two-actuator shoulder surrogate: swing drives actuator 1 directly,
    arm pitch couples into actuator 2 through a cubic with a swing term."""

    pitch_coeffs: tuple[float, float, float, float] = (0.02, 0.85, -0.10, 0.22)
    swing_coupling: float = 0.25
    swing_range: tuple[float, float] = (-1.0, 1.0)
    pitch_range: tuple[float, float] = (-0.8, 0.8)

    def __call__(self, coords) -> np.ndarray:
        swing, pitch = coords
        lo, hi = self.swing_range
        if not (lo - 1e-9 <= swing <= hi + 1e-9):
            raise AssemblyError("arm swing outside mechanism range")
        lo, hi = self.pitch_range
        if not (lo - 1e-9 <= pitch <= hi + 1e-9):
            raise AssemblyError("arm pitch outside mechanism range")
        c0, c1, c2, c3 = self.pitch_coeffs
        act2 = c0 + c1 * pitch + c2 * pitch**2 + c3 * pitch**3
        act2 += self.swing_coupling * swing
        return np.array([swing, act2])


def simulate_linkages() -> dict:
    """The shipped synthetic mechanisms (stand-ins for the physical solver)."""
    return {
        "eye": EyeMechanism(),
        "arm": ArmLinkage(),
        "jaw_coupling": FourBarLinkage(crank=0.02, coupler=0.05, rocker=0.02, ground=0.055),
    }


# ---------------------------------------------------------------------------
# jaw feedforward


def jaw_feedforward(q_jaw: float, coeffs: tuple[float, float, float]) -> float:
    """Holding torque c0 + c1 q + c_cos cos(q) for costume-tension compensation."""
    c0, c1, c_cos = coeffs
    return c0 + c1 * q_jaw + c_cos * math.cos(q_jaw)


def fit_jaw(
    angles: np.ndarray, torques: np.ndarray
) -> tuple[float, float, float]:
    """Least squares on the basis (1, q, cos q); needs >= 3 distinct angles."""
    angles = np.asarray(angles, dtype=float)
    torques = np.asarray(torques, dtype=float)
    if angles.shape != torques.shape or angles.ndim != 1:
        raise ValueError("angles and torques must be equal-length 1-D")
    if len(np.unique(np.round(angles, 9))) < 3:
        raise FitError("need at least 3 distinct jaw angles to fit 3 parameters")
    basis = np.column_stack([np.ones(len(angles)), angles, np.cos(angles)])
    svals = np.linalg.svd(basis, compute_uv=False)
    if svals[-1] < 1e-10 * svals[0]:
        raise FitError("degenerate jaw angle set")
    coef, *_ = np.linalg.lstsq(basis, torques, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


# ---------------------------------------------------------------------------
# CSV import/export


def write_samples_csv(path: str | Path, samples: LinkageSampleSet) -> None:
    nf = samples.functional.shape[1]
    na = samples.actuator.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{k}" for k in range(nf)] + [f"a{k}" for k in range(na)])
        for frow, arow in zip(samples.functional, samples.actuator):
            w.writerow(list(frow) + list(arow))


def read_samples_csv(
    path: str | Path, n_functional: int, bounds=None
) -> LinkageSampleSet:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            rows.append([float(v) for v in row])
    data = np.array(rows)
    f = data[:, :n_functional]
    a = data[:, n_functional:]
    if bounds is None:
        bounds = tuple((float(np.min(f[:, k])), float(np.max(f[:, k]))) for k in range(n_functional))
    return LinkageSampleSet(functional=f, actuator=a, bounds=tuple(bounds))


def read_jaw_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    angles, torques = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            angles.append(float(row[0]))
            torques.append(float(row[1]))
    return np.array(angles), np.array(torques)
