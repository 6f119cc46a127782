"""Discrete difference calculus on the flux: Efron-Stein and Chatterjee."""
