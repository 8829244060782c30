"""Dataflow script language compiled onto the map/reduce engine."""

from cloudmr.query.diagnostics import Diagnostic, Severity
from cloudmr.query.runtime import Executor, Relation
from cloudmr.query.semantics import Analyzer, Checked, analyze
from cloudmr.query.session import Session, repl, run_script
from cloudmr.query.syntax import Schema, parse

__all__ = [
    "Analyzer",
    "Checked",
    "Diagnostic",
    "Executor",
    "Relation",
    "Schema",
    "Session",
    "Severity",
    "analyze",
    "parse",
    "repl",
    "run_script",
]
