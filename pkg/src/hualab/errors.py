"""Exception types shared across the package."""


class DimensionError(ValueError):
    pass


class DomainError(ValueError):
    """Argument outside the region where a formula or sampler is defined."""


class GammaPoleError(DomainError):
    def __init__(self, pole, message=None):
        self.pole = pole
        super().__init__(message or f"Gamma function pole at {pole}")


class SingularMatrixError(ArithmeticError):
    def __init__(self, pivot: float, message: str | None = None, step=None):
        self.pivot = pivot
        self.step = step
        text = message or f"matrix is singular to working precision (pivot {pivot:.3e})"
        if step is not None:
            text = f"{text} at step {step}"
        super().__init__(text)


class NumericError(ArithmeticError):
    pass


class ConsistencyError(AssertionError):
    """An internal invariant that should hold by construction was violated."""
