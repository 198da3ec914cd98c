"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""


class LPAError(Exception):
    exit_code = 3


class InputError(LPAError, ValueError):
    """Bad or inconsistent input: malformed files, unknown entities, bad parameters."""

    exit_code = 1


class IngestError(InputError):
    pass


class EmptyDomainError(InputError):
    pass


class UnknownEntityError(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EpsilonTooLargeError(InputError):
    pass


class ComparisonError(InputError):
    """Signatures built against different domains were compared."""


class SamplingError(InputError):
    pass


class ProfileError(InputError):
    """A document cannot be placed on the activity timeline."""


class DegenerateDistributionError(LPAError, ArithmeticError):
    """A statistic is undefined because the samples have zero spread."""

    exit_code = 2


class InvariantError(LPAError, AssertionError):
    exit_code = 3
