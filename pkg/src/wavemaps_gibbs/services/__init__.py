"""Numerical services: soliton profiles, the linearised operator, Gaussian and Gibbs measures, dynamics."""
