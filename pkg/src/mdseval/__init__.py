"""Evaluation toolkit for multi-document summarization of medical
literature reviews: automated metrics over precomputed model sidecars,
two human-annotation protocols, and ranking/correlation analyses."""

from . import campaign, corpus, humaneval, lexical, modelmetrics, ranking, reports

__all__ = [
    "campaign",
    "corpus",
    "humaneval",
    "lexical",
    "modelmetrics",
    "ranking",
    "reports",
]

__version__ = "0.1.0"
