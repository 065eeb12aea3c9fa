"""
Error classes for the Offloading Score Toolkit.

Each error carries the process exit code the CLI returns for it.
"""


class OffloadingError(Exception):
    """Base class for every toolkit error."""

    exit_code = 1


class ConfigError(OffloadingError):
    """Invalid or malformed configuration value."""

    exit_code = 2


class DependencyError(OffloadingError):
    """A pipeline stage is missing the output of a prerequisite stage."""

    exit_code = 3

    def __init__(self, stage, message=None):
        self.stage = stage
        super().__init__(message or f"Missing prerequisite output of stage '{stage}'")


class ProtocolError(OffloadingError):
    """A backend reply does not satisfy its registered schema."""

    exit_code = 4


class ReplayError(ProtocolError):
    """A request is absent from the replay bundle in strict replay mode."""

    def __init__(self, request_hash, template_id=None):
        self.request_hash = request_hash
        self.template_id = template_id
        super().__init__(
            f"No recorded reply for request {request_hash}"
            + (f" (template '{template_id}')" if template_id else "")
        )


class BackendError(OffloadingError):
    """The external judgment or embedding service failed after retries."""

    exit_code = 5


class InductionError(BackendError):
    """Workflow induction failed for a specific segment."""

    def __init__(self, segment_index, cause):
        self.segment_index = segment_index
        self.cause = cause
        super().__init__(f"Induction failed at segment {segment_index}: {cause}")


class StepError(BackendError):
    """A per-step judgment failed for a specific workflow step."""

    def __init__(self, step_index, cause, participant_id=None):
        self.step_index = step_index
        self.cause = cause
        self.participant_id = participant_id
        who = f"participant {participant_id}, " if participant_id else ""
        super().__init__(f"Judgment failed for {who}step {step_index}: {cause}")
        if isinstance(cause, ProtocolError):
            self.exit_code = ProtocolError.exit_code


class DataValidationError(OffloadingError):
    """Input data violates a domain invariant."""

    exit_code = 6


class DegenerateInputError(DataValidationError, ValueError):
    """Statistical input for which the requested quantity is undefined."""


class FitError(DegenerateInputError):
    """A least-squares fit cannot be computed (no spread in x)."""
