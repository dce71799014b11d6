"""thermokam: thermostated one-degree-of-freedom systems and their averaged dynamics.

Why this exists:
- Keeps the numerical building blocks (quadrature, averaging, section maps)
  importable and unit-testable without going through the CLI.
- Lets the experiment runner and the tests share one implementation of every
  formula, so figures and assertions can never drift apart.
"""

__version__ = "0.4.0"
