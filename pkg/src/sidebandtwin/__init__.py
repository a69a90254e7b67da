"""Digital twin of pulsed Brillouin sideband thermometry on a GHz disk resonator."""

__version__ = "0.1.0"
