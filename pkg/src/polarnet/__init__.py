"""Neural layers on the nonzero complex plane viewed as R+ x SO(2)."""
__version__ = "0.1.0"
