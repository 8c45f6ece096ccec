"""Exception hierarchy shared by all morphkit modules."""


class MorphkitError(Exception):
    """Base class for all toolkit errors."""


class MissingFile(MorphkitError):
    pass


class ParseError(MorphkitError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class InvariantViolation(MorphkitError):
    def __init__(self, sample_id, rule):
        super().__init__(f"sample {sample_id!r}: {rule}")
        self.sample_id = sample_id
        self.rule = rule


class TooFewSamples(MorphkitError):
    pass


class CountMismatch(MorphkitError):
    def __init__(self, expected, got):
        super().__init__(f"expected {expected} points, got {got}")
        self.expected = expected
        self.got = got


class DegenerateInput(MorphkitError):
    pass


class DuplicatePoints(MorphkitError):
    pass


class EmptyIntersection(MorphkitError):
    pass


class DegenerateTriangle(MorphkitError):
    pass


class SizeMismatch(MorphkitError):
    pass


class ImageTooSmall(MorphkitError):
    pass


class DimensionMismatch(MorphkitError):
    pass


class ShapeMismatch(MorphkitError):
    pass


class MissingFeatures(MorphkitError):
    def __init__(self, sample_id):
        super().__init__(f"no feature row for sample {sample_id!r}")
        self.sample_id = sample_id


class SingleClassTrainingSet(MorphkitError):
    pass


class ProfileMismatch(MorphkitError):
    pass


class MissingImage(MorphkitError):
    def __init__(self, sample_id, path=None):
        detail = f" ({path})" if path else ""
        super().__init__(f"cannot read image for sample {sample_id!r}{detail}")
        self.sample_id = sample_id
        self.path = path


class SingleClassFile(MorphkitError):
    pass


class ConfigError(MorphkitError):
    pass


class StageError(MorphkitError):
    """Pipeline failure annotated with the stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause
