"""Exception hierarchy shared by every stage of the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class RangeError(PipelineError):
    pass


class KindMismatch(PipelineError):
    pass


class DimMismatch(PipelineError):
    pass


class IllTyped(PipelineError):
    pass


class ParseError(PipelineError):
    def __init__(self, message, line=0, column=0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class RewriteError(PipelineError):
    def __init__(self, step, reason):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason


class MapNotInjective(PipelineError):
    pass


class SparseRead(PipelineError):
    def __init__(self, offset):
        super().__init__(f"sparse read at offset {offset}")
        self.offset = offset


class MergeCollision(PipelineError):
    def __init__(self, offset):
        super().__init__(f"merge collision at offset {offset}")
        self.offset = offset


class KeyOutOfRange(PipelineError):
    pass


class EvalError(PipelineError):
    """Semantic failure of the imperative evaluator; `kind` names the failed rule."""

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind
        self.message = message


class TranslateError(PipelineError):
    pass


class UnknownConstant(TranslateError):
    def __init__(self, value):
        super().__init__(f"constant {value} has no counterpart in the target carrier")
        self.value = value


class NatOverflow(TranslateError):
    def __init__(self, value):
        super().__init__(f"natural {value} does not fit in 64 bits")
        self.value = value


class Unsupported(PipelineError):
    pass


class CompileError(PipelineError):
    pass


class NameCollision(CompileError):
    pass


class StructureMismatch(PipelineError):
    pass


class UnboundedRange(PipelineError):
    pass


class StageFailure(PipelineError):
    def __init__(self, stage, detail):
        super().__init__(f"{stage}: {detail}")
        self.stage = stage
        self.detail = detail
