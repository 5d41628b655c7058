"""Experiment runner: configs in, decay and ensemble reports out."""
