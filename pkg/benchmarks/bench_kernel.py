"""Benchmark: compiled physics kernel vs the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernel.py [--seconds 2.0]
"""

import argparse
import time

import numpy as np

from animech.core.character import default_character
from animech.sim import KERNEL_NAME, kernel, kernel_py
from animech.sim.env import EnvConfig, PlanarEnv


def bench(kern, env, seconds: float) -> float:
    m = env.model
    n = m.n_joints
    state = env.reset(np.random.default_rng(0))
    x, v = env._planar_vectors(state)
    temps = state.temps.copy()
    filt = state.filt_action.copy()
    anchor = state.contact_anchor.copy()
    active = state.anchor_active.copy()
    target = x[3:].copy()
    mt = np.zeros(n)
    mts = np.zeros(n)
    args = (
        env.cfg.n_substeps,
        env.cfg.physics_dt,
        env.filter_alpha,
        env.cfg.gravity,
        env.cfg.contact_stiffness,
        env.cfg.contact_damping,
        env.cfg.friction,
        env.cfg.tangent_stiffness,
        env.cfg.tangent_damping,
    )
    # warmup
    for _ in range(10):
        kern.run_substeps(m, x, v, temps, filt, anchor, active, target, target, *args, mt, mts)
    steps = 0
    t0 = time.perf_counter()
    while time.perf_counter() - t0 < seconds:
        for _ in range(50):
            kern.run_substeps(
                m, x, v, temps, filt, anchor, active, target, target, *args, mt, mts
            )
        steps += 50
    elapsed = time.perf_counter() - t0
    return steps / elapsed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seconds", type=float, default=2.0)
    args = ap.parse_args()

    env = PlanarEnv(default_character(), EnvConfig())
    print(f"active kernel at import: {KERNEL_NAME}")
    rate_py = bench(kernel_py, env, args.seconds)
    print(f"pure python : {rate_py:9.1f} control steps/s "
          f"({rate_py / 50:6.1f}x real time)")
    if kernel is not kernel_py:
        rate_cy = bench(kernel, env, args.seconds)
        print(f"compiled    : {rate_cy:9.1f} control steps/s "
              f"({rate_cy / 50:6.1f}x real time)")
        print(f"speedup     : {rate_cy / rate_py:9.1f}x")
    else:
        print("compiled kernel not available; build with pip install -e .")


if __name__ == "__main__":
    main()
