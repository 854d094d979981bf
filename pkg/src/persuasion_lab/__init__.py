"""Sender-receiver persuasion with partial commitment: exact static analysis,
dynamic block strategies and deviation tests."""

__version__ = "0.1.0"
