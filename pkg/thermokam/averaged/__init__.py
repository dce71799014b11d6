"""First-order averaged systems, periods and twist diagnostics."""
