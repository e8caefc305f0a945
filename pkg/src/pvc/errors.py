"""Exception hierarchy shared by every layer of the package."""


class PVCError(Exception):
    """Base class for all errors raised by this package."""


# field layer
class ZeroInverse(PVCError, ZeroDivisionError):
    pass


class Overflow(PVCError, OverflowError):
    pass


class InvalidParameters(PVCError, ValueError):
    """Bad prime, bad primitive vector or bad shape."""


# key exchange
class HandshakeError(PVCError):
    """Any reason to abort the authenticated exchange."""


class InvalidPeerPublic(HandshakeError, ValueError):
    pass


class SignatureInvalid(HandshakeError):
    pass


class MacInvalid(HandshakeError):
    pass


class MalformedMessage(HandshakeError):
    pass


# key derivation
class OutLenTooLarge(PVCError, ValueError):
    pass


# matrices
class Singular(PVCError, ArithmeticError):
    pass


class DegenerateKey(Singular):
    pass


# codec
class MessageTooLong(PVCError, ValueError):
    pass


class BadLength(PVCError, ValueError):
    pass


class OutOfBounds(PVCError, IndexError):
    pass


class IntegrityError(PVCError):
    """Ciphertext failed a consistency check on decryption."""


class OverlapMismatch(IntegrityError):
    def __init__(self, cell, values):
        self.cell = cell
        self.values = values
        super().__init__(f"overlapping blocks disagree at cell {cell}: {values}")


class PaddingMismatch(IntegrityError):
    """A padding cell does not match the regenerated padding stream."""


class ByteRangeViolation(IntegrityError):
    """A decrypted message cell does not hold a byte value."""


# wire format
class ParseError(PVCError, ValueError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class HeaderMalformed(ParseError):
    pass


class NonCanonicalElement(ParseError, IntegrityError):
    """A serialized field element is not reduced modulo p."""


# analysis
class EmptyInput(PVCError, ValueError):
    pass


class InsufficientBits(PVCError, ValueError):
    pass


class SingularSystem(Singular):
    pass
