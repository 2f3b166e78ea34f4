"""Strand spaces with multiset-rewriting state, and a model of Wang's fair
exchange protocol with executions, stabilization and property checks."""

__version__ = "0.1.0"
