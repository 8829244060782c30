"""Desk-scale cloud analytics workflow: replicated block store, four-V
classification and routing, a two-phase map/reduce engine, an analytic
job-timing model and a small dataflow query language."""

__version__ = "0.1.0"
