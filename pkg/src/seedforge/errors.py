"""Exception types raised across the seedforge pipeline."""


class SeedforgeError(Exception):
    """Base class for all seedforge errors."""


class BadMagic(SeedforgeError):
    """Tensor file does not start with the container magic bytes."""


class UnsupportedDtype(SeedforgeError):
    """Tensor file declares an element type other than f32."""


class TruncatedPayload(SeedforgeError):
    """Tensor payload is shorter/longer than the declared dims, or fails CRC."""


class InvalidShape(SeedforgeError):
    """Tensor shape violates the container invariants (rank, dims, size)."""


class UnsupportedPng(SeedforgeError):
    """PNG uses a bit depth or color mode outside the 8-bit gray/RGB contract."""


class DimMismatch(SeedforgeError):
    """Two inputs that must share dimensions do not."""


class ShapeMismatch(SeedforgeError):
    """Array shape incompatible with the requested operation."""


class KTooLarge(SeedforgeError):
    """Requested superpixel count exceeds the pixel count."""


class EmptyList(SeedforgeError):
    """An operation over a collection received no elements."""


class SizeMismatch(SeedforgeError):
    """Square matrices in a collection differ in size."""


class TooSmall(SeedforgeError):
    """Matrix too small for the requested reduction."""


class ClassMismatch(SeedforgeError):
    """Seed stacks carry different class-id lists."""


class ClassOutOfRange(SeedforgeError):
    """Label id is neither a valid class nor the ignore value 255."""


class ConfigError(SeedforgeError):
    """Pipeline configuration is missing, malformed, or out of range."""
