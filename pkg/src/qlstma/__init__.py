"""Quantum-enhanced LSTM-attention regression for well-log curves."""

__version__ = "0.1.0"
