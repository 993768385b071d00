"""Bilevel day-ahead electricity market simulator.

Lower level: GENCO bidders trained by independent deep Q-learning, with the
Q-function either a simulated variational quantum circuit or a small
feed-forward network. Upper level: a PPO agent choosing the price cap,
settlement rule and renewable deviation penalty.
"""
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
