"""Stein equation solver and Wasserstein distance to the standard normal."""
