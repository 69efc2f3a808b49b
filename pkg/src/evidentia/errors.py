"""Exception hierarchy shared across the platform.

Every operational failure maps to one of these classes so the API layer can
translate them to structured error bodies without string matching.
"""


class PlatformError(Exception):
    """Base class for all platform errors."""

    code = "platform_error"

    def __init__(self, message: str = "", detail: object = None):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail


# content addressing / blob store
class StorageFailure(PlatformError):
    code = "storage_failure"


class NotFound(PlatformError):
    code = "not_found"


class IntegrityViolation(PlatformError):
    code = "integrity_violation"


class InvalidArgument(PlatformError):
    code = "invalid_argument"


# evidence chain
class Unauthorized(PlatformError):
    code = "unauthorized"


class DuplicateEvidence(PlatformError):
    code = "duplicate_evidence"


class AlreadyVerified(PlatformError):
    code = "already_verified"


# identity / tokens
class InvalidCredentials(PlatformError):
    code = "invalid_credentials"


class AccountDisabled(PlatformError):
    code = "account_disabled"


class InvalidSignature(PlatformError):
    code = "invalid_signature"


class Expired(PlatformError):
    code = "expired"


class Forbidden(PlatformError):
    code = "forbidden"


class DuplicateName(PlatformError):
    code = "duplicate_name"


# ledger
class ValidationFailure(PlatformError):
    code = "validation_failure"


class ConsistencyError(PlatformError):
    code = "consistency_error"


# signal features
class TooShort(PlatformError):
    code = "too_short"


class NonFiniteInput(PlatformError):
    code = "non_finite_input"


class BadChannelCount(PlatformError):
    code = "bad_channel_count"


class BadShape(PlatformError):
    code = "bad_shape"


# detection
class EmptyVideo(PlatformError):
    code = "empty_video"


class UncalibratedClassifier(PlatformError):
    code = "uncalibrated_classifier"


class InsufficientData(PlatformError):
    code = "insufficient_data"


# metrics
class SingleClass(PlatformError):
    code = "single_class"


class EmptyMatrix(PlatformError):
    code = "empty_matrix"


class UnsupportedMedia(PlatformError):
    code = "unsupported_media"


class PayloadTooLarge(PlatformError):
    code = "payload_too_large"
