"""Planar character simulation: compiled kernel when available, numpy otherwise.

Set ANIMECH_PURE_PYTHON=1 to force the pure-numpy kernel (e.g. to benchmark
against the compiled one; see benchmarks/bench_kernel.py).
"""

import os

from animech.sim import kernel_py

if os.environ.get("ANIMECH_PURE_PYTHON"):
    kernel = kernel_py
    KERNEL_NAME = "python"
else:
    try:
        from animech.sim import _kernel as kernel  # type: ignore[attr-defined]

        KERNEL_NAME = "cython"
    except ImportError:
        kernel = kernel_py
        KERNEL_NAME = "python"

from animech.sim.env import EnvConfig, PlanarEnv, SimState, StepResult  # noqa: E402
from animech.sim.model import build_model, PlanarModel  # noqa: E402

__all__ = [
    "kernel",
    "kernel_py",
    "KERNEL_NAME",
    "EnvConfig",
    "PlanarEnv",
    "SimState",
    "StepResult",
    "build_model",
    "PlanarModel",
]
