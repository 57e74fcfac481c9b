"""Causal DAG discovery via bilevel polynomial optimization and sparse moment SDP relaxation."""

__version__ = "0.1.0"
