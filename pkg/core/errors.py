"""
Exception hierarchy shared by the library and the command line front end
"""


class LayerSparsityError(Exception):
    """Base class for every error raised by this package"""


class ParameterError(LayerSparsityError, ValueError):
    """A scalar or vector parameter is outside its allowed range"""


class ShapeError(LayerSparsityError, ValueError):
    """Operands do not have conforming dimensions"""


class ValidationError(LayerSparsityError, ValueError):
    """A network violates one of its structural invariants"""


class ParseError(LayerSparsityError, ValueError):
    """A model, data or config file could not be read"""


class ConfigError(ParseError):
    """A config file holds unknown or ill-typed keys"""


class DivergenceError(LayerSparsityError, RuntimeError):
    """Training produced a non-finite or exploding objective"""

    def __init__(self, epoch, step, value):
        self.epoch = epoch
        self.step = step
        self.value = value
        super().__init__(f"training diverged at epoch {epoch}, step {step}: objective {value!r}")


class PreconditionError(LayerSparsityError, ValueError):
    """A merge was requested for a layer that is not entrywise non-negative"""

    def __init__(self, layer, position, value, message=None):
        self.layer = layer
        self.position = position
        self.value = value
        super().__init__(
            message
            or f"layer {layer} is not inactive: entry {position} is {value!r} < 0"
        )


class SoundnessError(LayerSparsityError, ValueError):
    """Exact condensation is not possible for the given network"""

    def __init__(self, layer, reason):
        self.layer = layer
        self.reason = reason
        super().__init__(f"layer {layer} cannot be merged exactly: {reason}")
