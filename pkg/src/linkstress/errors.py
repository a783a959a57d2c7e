"""Exception types raised across the toolkit."""


class LinkstressError(Exception):
    pass


class EmptyName(LinkstressError, ValueError):
    pass


class DegenerateFeature(LinkstressError, ValueError):
    def __init__(self, index: int, name: str | None = None):
        self.index = index
        self.name = name
        label = f" ({name})" if name else ""
        super().__init__(f"feature {index}{label} has zero variance")


class InsufficientData(LinkstressError, ValueError):
    pass


class InsufficientPairs(InsufficientData):
    pass


class StrictOrderViolation(LinkstressError, ValueError):
    pass


class DuplicateId(LinkstressError, ValueError):
    def __init__(self, record_id):
        self.record_id = record_id
        super().__init__(f"duplicate id: {record_id!r}")


class IdenticalInputs(LinkstressError, ValueError):
    pass


class EmptyGroup(LinkstressError, ValueError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"group {group!r} has no records")


class InfeasibleBudget(LinkstressError, ValueError):
    pass


class MissingGroupProfile(LinkstressError, KeyError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"no error profile for group {group!r}")


class MissingGold(LinkstressError, KeyError):
    def __init__(self, record_id):
        self.record_id = record_id
        super().__init__(f"no gold record for id {record_id!r}")


class SchemaError(LinkstressError, ValueError):
    def __init__(self, column: str, message: str | None = None):
        self.column = column
        super().__init__(message or f"missing required column: {column!r}")


class ConfigError(LinkstressError, ValueError):
    pass


class NonConvergenceWarning(UserWarning):
    pass
