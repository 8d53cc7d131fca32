"""Fairness-regularized paper scoring, top-k slate selection and diversity/utility evaluation."""

__version__ = "0.1.0"
