"""Domain errors raised across the esdp pipeline."""


class EsdpError(Exception):
    """Root of every domain error; the CLI maps these to exit status 1."""


class UnparsableSource(EsdpError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnparsableQuery(EsdpError):
    def __init__(self, message: str, token: str = ""):
        detail = f" near {token!r}" if token else ""
        super().__init__(f"{message}{detail}")
        self.token = token


class InvalidThreshold(EsdpError):
    pass


class SchemaViolation(EsdpError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class MalformedControlNesting(EsdpError):
    pass


class UndefinedMetric(EsdpError):
    pass


class DegenerateLabels(EsdpError):
    pass


class CriteriaNotMet(EsdpError):
    pass
