"""Numerical checks of super-pseudoconvexity for smooth domains in C^n."""
__version__ = "0.1.0"
