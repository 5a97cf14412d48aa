"""Experiment harness: synthetic data, scenario runners, timing and reports."""
