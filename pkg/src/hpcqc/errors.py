"""Exception hierarchy shared by every toolchain component."""

from __future__ import annotations


class ToolchainError(Exception):
    """Base class for all errors raised by :mod:`hpcqc`."""


# -- ir ---------------------------------------------------------------------

class InvalidCircuit(ToolchainError, ValueError):
    pass


class MissingBinding(ToolchainError, KeyError):
    def __init__(self, symbol: str):
        super().__init__(symbol)
        self.symbol = symbol

    def __str__(self) -> str:
        return f"no binding for symbol {self.symbol!r}"


class NonFiniteValue(ToolchainError, ValueError):
    pass


class UnboundSymbol(ToolchainError, ValueError):
    pass


class TooLarge(ToolchainError, ValueError):
    pass


class MeasurementPresent(ToolchainError, ValueError):
    pass


class DimensionMismatch(ToolchainError, ValueError):
    pass


class InvalidProgram(ToolchainError, ValueError):
    pass


# -- hardware ---------------------------------------------------------------

class SchemaError(ToolchainError, ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class RangeError(ToolchainError, ValueError):
    pass


class NonConformant(ToolchainError, ValueError):
    pass


class NoMeasurement(ToolchainError, ValueError):
    pass


# -- passman ----------------------------------------------------------------

class DuplicatePass(ToolchainError, KeyError):
    pass


class UnknownPass(ToolchainError, KeyError):
    pass


class InvalidSequence(ToolchainError, ValueError):
    pass


class UnsupportedNativeSet(ToolchainError, ValueError):
    pass


class Unroutable(ToolchainError, ValueError):
    pass


class InsufficientQubits(ToolchainError, ValueError):
    pass


class PassError(ToolchainError):
    """A transformation failed; wraps the cause with pass and kernel names."""

    def __init__(self, pass_name: str, kernel: str, cause: Exception):
        super().__init__(f"pass {pass_name!r} failed on kernel {kernel!r}: {cause}")
        self.pass_name = pass_name
        self.kernel = kernel
        self.cause = cause


# -- metadata ---------------------------------------------------------------

class InvalidKind(ToolchainError, ValueError):
    pass


class PayloadTooLarge(ToolchainError, ValueError):
    pass


# -- metaopt ----------------------------------------------------------------

class BudgetExhausted(ToolchainError):
    pass


class NoFeasibleHardware(ToolchainError):
    def __init__(self, task: str):
        super().__init__(f"no hardware in the catalog can host task {task!r}")
        self.task = task


# -- scheduler --------------------------------------------------------------

class InfeasibleRequest(ToolchainError, ValueError):
    pass


# -- runtime ----------------------------------------------------------------

class PlanInvalid(ToolchainError, ValueError):
    pass


class TaskFailed(ToolchainError):
    def __init__(self, task: str, cause: Exception | str):
        super().__init__(f"task {task!r} failed: {cause}")
        self.task = task
        self.cause = cause


class WidthMismatch(ToolchainError, ValueError):
    pass
