"""Special functions used by the closed-form checks and the WK thermostat."""
