"""Exception types shared across the package.

Every exception carries a stable ``code`` string used by the CLI to map
failures to exit codes and by tests to assert on failure modes without
string-matching messages.
"""

from __future__ import annotations


class QkschedError(Exception):
    """Base class for all package errors."""

    code = "E_GENERIC"


class ParseError(QkschedError):
    """Config document is not structurally parseable."""

    code = "E_PARSE"


class InvariantError(QkschedError):
    """A typed field violates a declared invariant."""

    code = "E_INVARIANT"

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class DanglingRefError(QkschedError):
    """A cross-reference (node->domain, link->node) does not resolve."""

    code = "E_DANGLING_REF"

    def __init__(self, ref: str, message: str = ""):
        self.ref = ref
        super().__init__(f"{ref}: {message}" if message else ref)


class RangeError(QkschedError):
    """Argument outside its declared box."""

    code = "E_RANGE"


class UnstableQueueError(QkschedError):
    """Offered load at or above capacity; Kingman formula undefined."""

    code = "E_UNSTABLE"


class NonPositiveDeltaCostError(QkschedError):
    """MSV requested for an upgrade that does not increase key cost."""

    code = "E_NONPOSITIVE_DELTA_COST"


class TopologyError(QkschedError):
    """Demand node structurally unreachable from any surplus node."""

    code = "E_TOPOLOGY"


class InfeasibleBaseError(QkschedError):
    """Budget cannot cover even the cheapest compliant assignment."""

    code = "E_INFEASIBLE_BASE"


class NoBaseFeasibleError(QkschedError):
    """A scenario-slot stayed base-infeasible after feasibility recovery."""

    code = "E_NO_BASE_FEASIBLE"

    def __init__(self, scenario: int, slot: int, message: str = ""):
        self.scenario = scenario
        self.slot = slot
        super().__init__(f"scenario={scenario} slot={slot}" + (f": {message}" if message else ""))


class WrongStrategyError(QkschedError):
    """Continuous-parameter update called on a strategy without that knob."""

    code = "E_WRONG_STRATEGY"


class RecoveryFailedError(QkschedError):
    """Feasibility recovery cannot cover the deficit even at full relaxation."""

    code = "E_RECOVERY_FAILED"
