"""Joint pilot and payload power allocation for short-packet massive MIMO uplinks."""

__version__ = "0.1.0"
