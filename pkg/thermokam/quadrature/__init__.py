"""Level-set quadrature and per-edge action profiles."""
