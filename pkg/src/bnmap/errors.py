"""Exception types shared across the package."""


class BnetError(ValueError):
    """Malformed or invalid network text / network contents."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstantiationError(ValueError):
    pass


class InvalidOrderError(ValueError):
    pass


class WidthCapExceeded(RuntimeError):
    def __init__(self, width: int, cap: int):
        self.width = width
        self.cap = cap
        super().__init__(
            f"elimination width {width} exceeds cap {cap} "
            "(raise it with --width-cap or BNMAP_WIDTH_CAP)"
        )


class GuardExceeded(RuntimeError):
    pass


class BPInconsistentError(RuntimeError):
    """Raised when belief propagation hits an all-zero combination."""
