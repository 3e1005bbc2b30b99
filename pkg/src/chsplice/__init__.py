"""Multi-band OFDM channel splicing."""
__version__ = "0.1.0"
