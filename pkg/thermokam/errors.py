"""Exception hierarchy shared by the library and the CLI.

The CLI maps ConfigError/NoDataError to exit status 2 and every other
ThermokamError to exit status 3.
"""

from __future__ import annotations

from typing import Iterable, List, Optional


class ThermokamError(Exception):
    """Base class for every error raised by thermokam"""
    pass


class ConfigError(ThermokamError):
    """Invalid run configuration (schema, coercion or unknown keys)"""

    def __init__(self, messages: Iterable[str]):
        self.messages: List[str] = list(messages)
        super().__init__("\n".join(self.messages) or "invalid configuration")


class NoDataError(ThermokamError):
    """The requested window or grid contains nothing to compute"""
    pass


class DomainError(ThermokamError, ValueError):
    """Argument outside the domain of a special function"""
    pass


class UnsupportedTopologyError(ThermokamError):
    """Critical structure beyond Morse plus monomial degeneracy"""
    pass


class QuadratureError(ThermokamError):
    """Level-set quadrature failed to converge"""
    pass


class ProfileConsistencyError(ThermokamError):
    """An action-profile column cross-check failed"""
    pass


class ProfileRangeError(ThermokamError):
    """Query outside the tabulated range of a profile or averaged system"""
    pass


class InadmissibleTemperatureError(ThermokamError):
    """Temperature coincides with a vertex limit of the weighted temperature"""

    def __init__(self, temperature: float, excluded: float, k: int):
        self.temperature = temperature
        self.excluded = excluded
        self.k = k
        super().__init__(
            f"temperature T={temperature:.12g} is inadmissible for k={k}: "
            f"it equals the excluded vertex limit {excluded:.12g}"
        )


class NoncompactLevelError(ThermokamError):
    """Averaged level set leaves the tabulated Darboux range"""
    pass


class IntegrationError(ThermokamError):
    """Base class for integrator failures"""
    pass


class StepUnderflowError(IntegrationError):
    """Step size fell below the relative floor of the integration span"""
    pass


class StateEscapeError(IntegrationError):
    """State norm exceeded the configured bound"""
    pass


class NoCrossingError(IntegrationError):
    """No crossing of the requested event within the span"""
    pass


class WindowEscapeError(ThermokamError):
    """Section iterate left the admissible (h, xi) window"""

    def __init__(self, index: int, state: Optional[tuple] = None):
        self.index = index
        self.state = state
        super().__init__(f"section iterate {index} left the window (state={state})")


class NonwindingSequenceError(ThermokamError):
    """Section sequence does not wind around its centre"""
    pass


class NonintegrableTailError(ThermokamError):
    """exp(-beta*U) is not integrable on the requested half-line"""
    pass


class NonunimodalError(ThermokamError):
    """Potential is not unimodal on the requested interval"""
    pass
