"""Translate arithmetic word problems into prefix/postfix/infix expressions."""

__version__ = "0.1.0"
