"""Automatic tuning of an MPC shared controller with Bayesian optimization.

Library layout mirrors the pipeline: ``world`` (occupancy grid + signed
distance field), ``robot`` (planar kinematics and collision spheres),
``controller`` (the shared MPC), ``metrics`` (trajectory scoring),
``scenarios`` (scripted user inputs), ``sim`` (closed-loop evaluation),
``bayesopt`` (GP surrogate, acquisition, tuning loop, sensitivity screen)
and ``harness`` (CLI, reports, statistics, teleoperation service).
"""

__version__ = "0.1.0"
