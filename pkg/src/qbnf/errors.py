"""Exception hierarchy."""


class QbnfError(Exception):
    """Base class for all package errors."""


class GeneratorMismatch(QbnfError):
    """Symbols built over different generator lists or frequency matrices."""


class AtomBudgetError(QbnfError):
    """An operation would exceed the configured atom or pair budget."""


class ShellBudgetError(QbnfError):
    """Lattice shell enumeration would exceed the configured point budget."""


class ResonanceError(QbnfError):
    """A lattice point with zero pairing against every frequency row."""


class ContractionError(QbnfError):
    """The Neumann series for the component-mixing matrix cannot converge."""


class LieDivergenceError(QbnfError):
    """A Lie series failed to decay within the allowed number of terms."""


class PreconditionError(QbnfError):
    """A smallness hypothesis required by a KAM step is violated."""

    def __init__(self, inequality, detail):
        self.inequality = inequality
        super().__init__(f"{inequality} violated: {detail}")


class ConfigError(QbnfError):
    """Invalid or inconsistent run configuration."""


class InvariantViolation(QbnfError):
    """An internal consistency check failed."""
