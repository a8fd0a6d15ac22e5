class PreconditionError(ValueError):
    """An operation's mathematical hypothesis does not hold for the input."""


class CertificateParseError(ValueError):
    """A certificate or plan document is malformed."""
