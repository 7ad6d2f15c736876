"""Kronecker compressed sensing of grid injected-power data over a slotted CSMA/CA superframe MAC."""

__version__ = "0.1.0"
