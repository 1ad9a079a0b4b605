"""Simulator of blind quantum computation with a classical client.

The client encrypts one bit per gate slot; the server runs fixed gadget
circuits whose shape never depends on those bits, and the client tracks the
one-time pad through every measurement outcome.
"""
__version__ = "0.1.0"
