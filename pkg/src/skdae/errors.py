"""Exception types shared across the package."""


class SkdaeError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SkdaeError, ValueError):
    """Input contains non-finite values or violates a basic precondition."""


class DimensionMismatchError(SkdaeError, ValueError):
    """Operands have incompatible shapes or sample counts."""


class DegenerateSampleError(SkdaeError, ValueError):
    """Sample set is too small or has zero distance variance."""


class DegenerateGradientError(SkdaeError, ValueError):
    """Distance-correlation gradient is undefined for this sample set."""


class DegenerateSignalError(SkdaeError, ValueError):
    """Signal has zero power, so an SNR gain cannot be computed."""


class TooShortError(SkdaeError, ValueError):
    """Utterance is shorter than one analysis window."""


class ContractError(SkdaeError, ValueError):
    """Caller violated a documented contract (e.g. unnormalized features)."""


class FeatureFileError(SkdaeError, ValueError):
    """Feature file is corrupt, truncated, or has an unsupported version."""


class CheckpointError(SkdaeError, ValueError):
    """Checkpoint file is corrupt, truncated, or has an unsupported version."""


class ConfigError(SkdaeError, ValueError):
    """Run configuration failed validation.

    Collects every problem found so the user sees them all at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class TrainingDivergedError(SkdaeError, RuntimeError):
    """Training produced a non-finite loss or gradient."""
