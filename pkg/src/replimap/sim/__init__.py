"""Seeded simulator: synthetic crater world, detector model and experiments."""
