"""Exception hierarchy. Each class maps to one CLI exit code."""


class CamdynError(Exception):
    exit_code = 1


class ValidationError(CamdynError, ValueError):
    """Bad input: shapes, ranges, file contents."""

    exit_code = 2


class NumericError(CamdynError, ArithmeticError):
    """Ill-conditioned linear algebra or a failed numerical check."""

    exit_code = 3

    def __init__(self, message, frame=None):
        if frame is not None:
            message = f"frame {frame}: {message}"
        super().__init__(message)
        self.frame = frame


class SolverError(CamdynError, RuntimeError):
    """The contact-velocity projection did not converge."""

    exit_code = 4

    def __init__(self, message, iterations=None, residual=None, frame=None):
        parts = [message]
        if iterations is not None:
            parts.append(f"iterations={iterations}")
        if residual is not None:
            parts.append(f"kkt_residual={residual:.3e}")
        text = ", ".join(parts)
        if frame is not None:
            text = f"frame {frame}: {text}"
        super().__init__(text)
        self.iterations = iterations
        self.residual = residual
        self.frame = frame
