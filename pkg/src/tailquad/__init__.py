"""Simulation and reinforcement-learning stack for a quadruped with a manipulator tail."""

__version__ = "0.1.0"
