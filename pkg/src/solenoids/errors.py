"""Exception hierarchy.

Input problems (bad parameters, malformed addresses) and contract refusals
(a computation whose preconditions are not met by an otherwise valid model)
are kept apart so the CLI can map them to different exit codes.
"""


class SolenoidError(Exception):
    """Base class for all errors raised by this package."""


class ConstructionError(SolenoidError, ValueError):
    pass


class AddressError(SolenoidError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class DegreeError(SolenoidError, ValueError):
    pass


class ParameterError(SolenoidError, ValueError):
    pass


class ImmersionError(SolenoidError):
    """The leafwise differential lost rank somewhere it was sampled."""


class ContractRefusal(SolenoidError):
    """A precondition of the requested computation does not hold.

    ``diagnostic`` names the violated precondition; ``details`` carries
    whatever numbers back the refusal (mass bounds, offending cylinders).
    """

    def __init__(self, diagnostic: str, **details):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic
        self.details = details


class TangencyError(ContractRefusal):
    pass


class PerturbationFailure(ContractRefusal):
    pass
