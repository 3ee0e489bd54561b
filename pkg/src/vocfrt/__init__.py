"""Fault ride-through simulation of virtual-oscillator grid-forming inverters."""

__version__ = "0.1.0"
