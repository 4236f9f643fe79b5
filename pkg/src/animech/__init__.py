"""Planar animatronic character control stack.

Modules: core (character + rotation math), pathframe, refgen, thermal,
rewards, sim (physics env with compiled/pure kernels), optim (policy +
evolution-strategy training), showfn (linkage calibration), runtime
(control loop + puppeteering service), cli.
"""

__version__ = "0.1.0"
