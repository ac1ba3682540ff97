from .core import decode, encode

__all__ = ["decode", "encode"]
