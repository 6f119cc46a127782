"""Periodic corrector equation: assembly, CG solve and the flux functional."""
