"""Spectral filtering of probe pulses by four-wave mixing in cold atoms."""
__version__ = "0.1.0"
