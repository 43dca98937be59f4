class CodecError(Exception):
    """Base class for codec failures."""


class DecodeError(CodecError):
    """Raised when a bitstream, payload, or input file cannot be decoded."""
