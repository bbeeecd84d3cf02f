"""Exception types raised across the package."""


class ForgeError(Exception):
    """Base class for all errors raised by forge."""


class NotAdaptedError(ForgeError, ValueError):
    """A function is not measurable with respect to the required partition."""


class SpaceMismatchError(ForgeError, ValueError):
    """Objects that must live on one sample space do not."""


class CapExceededError(ForgeError):
    """A product construction (or exhaustive search) would exceed its cap."""

    def __init__(self, count, cap, what="product atom count"):
        super().__init__(f"{what} {count} exceeds cap {cap}")
        self.count = count
        self.cap = cap


class F4ViolationError(ForgeError):
    """A biparameter filtration fails the commuting (F4) condition."""

    def __init__(self, witness):
        super().__init__(f"F4 condition violated: {witness}")
        self.witness = witness


class MorphismNotVerifiedError(ForgeError):
    """A morphism failed measure preservation and cannot pull back functions."""


class SchemaError(ForgeError, ValueError):
    """A JSON document does not match the interchange schema."""

    def __init__(self, path, message):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path or "/"
        self.message = message
