"""Desk-scale multi-paradigm LM pretraining with a shared recurrent-memory trunk."""

__version__ = "0.1.0"
