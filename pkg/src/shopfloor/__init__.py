"""Robotic job-shop planning, scheduling, program assembly and evaluation."""

__version__ = "0.1.0"
