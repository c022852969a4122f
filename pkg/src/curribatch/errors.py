"""Exception hierarchy shared across the package."""


class CurriculumError(Exception):
    """Base class for all domain errors raised by this package."""


class MissingFile(CurriculumError):
    pass


class ManifestError(CurriculumError):
    """Manifest is unreadable or structurally invalid."""


class DimensionMismatch(CurriculumError):
    pass


class NonFiniteValue(CurriculumError):
    pass


class ZeroVector(CurriculumError):
    pass


class DuplicateTaskId(CurriculumError):
    pass


class InvalidPermutation(CurriculumError):
    pass


class TooFewTasks(CurriculumError):
    pass


class TooManyTasks(CurriculumError):
    pass


class NonPositiveTemperature(CurriculumError):
    pass


class OrderCorpusMismatch(CurriculumError):
    pass


class EmptyCorpus(CurriculumError):
    pass


class MalformedSchedule(CurriculumError):
    pass


class EmptyBatch(CurriculumError):
    pass


class ScheduleCorpusMismatch(CurriculumError):
    pass


class MarginCoverageMismatch(CurriculumError):
    pass
