"""Experiment campaigns, worker pool and result files."""
