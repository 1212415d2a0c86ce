"""Exception hierarchy shared by the runtime, the store and the DSL."""

from __future__ import annotations


class PieError(Exception):
    """Base class for every error raised by this package."""


class NonSerializable(PieError):
    def __init__(self, type_name: str):
        super().__init__(f"value of foreign type {type_name!r} is not serializable")
        self.type_name = type_name


class DecodeError(PieError):
    pass


class CorruptStore(PieError):
    pass


class StoreLocked(PieError):
    pass


class InvalidPattern(PieError):
    pass


class CycleDetected(PieError):
    def __init__(self, stack):
        self.stack = list(stack)
        chain = " -> ".join(str(k) for k in self.stack)
        super().__init__(f"cyclic task dependency: {chain}")


class UnknownTask(PieError):
    def __init__(self, func_id: str):
        super().__init__(f"no task registered under {func_id!r}")
        self.func_id = func_id


class TaskFailed(PieError):
    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.message = message
        self.key = key


class OverlapError(PieError):
    def __init__(self, path: str, current, other):
        super().__init__(
            f"overlapping generation of {path}: generated by {other} and by {current}"
        )
        self.path = path
        self.current = current
        self.other = other


class HiddenDepError(PieError):
    def __init__(self, path: str, current, requirer):
        super().__init__(
            f"hidden dependency on {path}: {requirer} required it without depending "
            f"on its generator {current}"
        )
        self.path = path
        self.current = current
        self.requirer = requirer


class NullAssertionFailed(PieError):
    pass


class IntOverflow(PieError):
    pass


class UnresolvedForeign(PieError):
    def __init__(self, name: str):
        super().__init__(f"foreign binding {name!r} is not registered")
        self.name = name


class UnknownFunction(PieError):
    def __init__(self, name: str):
        super().__init__(f"unknown function {name!r}")
        self.name = name


class UnknownMethod(PieError):
    pass


class ArgumentMismatch(PieError):
    pass


class ExecutableNotFound(PieError):
    pass
