"""Secrecy exponents for blurring and lossy cipher systems on finite alphabets."""

__version__ = "0.1.0"
