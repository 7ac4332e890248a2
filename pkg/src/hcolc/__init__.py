"""Verified-style compiler pipeline from a vector operator language down to LLVM IR."""

__version__ = "0.1.0"
