"""Transfer-learned channel estimation for DNSP OFDM."""

__version__ = "0.1.0"
