"""Motion planning and closed-loop simulation for intercepting a moving
target with a car-like robot among static and moving obstacles.

Pipeline: target trajectory prediction, kinematic path search, gradient
path smoothing, station-time speed search, and convex speed optimization.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
