"""Exception types shared across the toolkit."""


class SpecError(Exception):
    """Raised when a spec file cannot be parsed into a model/project description.

    The message carries the offending field or the source position when the
    problem is a syntax error.
    """


class GraphFormatError(Exception):
    """Raised on malformed graph files or graphs violating project bounds."""


class WeightFormatError(Exception):
    """Raised on malformed weight directories or shape mismatches."""


class CodegenError(Exception):
    """Raised when a validated spec still hits an unsupported codegen feature."""


class ToolchainError(Exception):
    """Raised when building or running a generated testbench fails.

    Carries the full compiler/runtime output in the message.
    """
