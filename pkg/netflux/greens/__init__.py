"""Periodic Green's function and its decay audits."""
