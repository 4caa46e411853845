"""Non-asymptotic Bayesian quantum metrology at desk scale."""

__version__ = "0.1.0"
