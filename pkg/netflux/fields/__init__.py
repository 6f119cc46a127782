"""Latent random state, coefficient fields and site resampling."""
