"""Saddle-shaped solutions of -Delta u = f(u) in R^{2m}.

Submodules: nonlinearity, profile1d, geometry, operators, solver,
diagnostics, stability, cli. Nothing is imported eagerly so that the CLI
can cap thread pools before numpy loads.
"""

__version__ = "0.1.0"
