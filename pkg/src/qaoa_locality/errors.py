class ParameterError(ValueError):
    """Invalid parameter combination for an operation."""


class GraphFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class QubitLimitError(MemoryError):
    """Raised instead of allocating a statevector above the qubit cap."""

    def __init__(self, qubits: int, q_max: int):
        self.qubits = qubits
        self.q_max = q_max
        super().__init__(f"{qubits} qubits requested, cap is {q_max}")


class ConeOverflowError(QubitLimitError):
    def __init__(self, target, cone_size: int, q_max: int):
        self.target = target
        self.cone_size = cone_size
        MemoryError.__init__(
            self, f"light cone of {target} has {cone_size} qubits, cap is {q_max}"
        )
        self.qubits = cone_size
        self.q_max = q_max


class EnumerationCapError(RuntimeError):
    def __init__(self, cap: int, partial: int):
        self.cap = cap
        self.partial = partial
        super().__init__(f"enumeration exceeded cap {cap} (stopped after {partial})")


class ConfigError(ValueError):
    """Experiment configuration failed validation; ``problems`` lists every issue."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class HarnessBusyError(RuntimeError):
    """Another experiment holds the lock on the output directory."""


class ExperimentError(RuntimeError):
    """A module operation failed inside a run; the original error is ``__cause__``."""

    def __init__(self, kind: str, cause: BaseException):
        self.kind = kind
        self.cause = cause
        super().__init__(f"{kind}: {type(cause).__name__}: {cause}")
