"""Exception hierarchy.

Every error carries a stable ``code`` so the CLI can emit machine-readable
error JSON without string matching on messages.
"""


class ADPError(Exception):
    code = "adp_error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class ZeroVector(ADPError, ValueError):
    code = "zero_vector"


class IndexOutOfRange(ADPError, IndexError):
    code = "index_out_of_range"


class EqualIndices(ADPError, ValueError):
    code = "equal_indices"


class DimensionMismatch(ADPError, ValueError):
    code = "dimension_mismatch"


class LengthMismatch(ADPError, ValueError):
    code = "length_mismatch"


class ScorerFailure(ADPError, RuntimeError):
    code = "scorer_failure"


class GenerationFailure(ADPError, RuntimeError):
    code = "generation_failure"


class DegenerateData(ADPError, ValueError):
    code = "degenerate_data"


class ParameterOutOfRange(ADPError, ValueError):
    code = "parameter_out_of_range"


class EmptyInterval(ADPError, ValueError):
    code = "empty_interval"


class DegenerateInterval(ADPError, ValueError):
    code = "degenerate_interval"


class TargetOutsideDensity(ADPError, ValueError):
    code = "target_outside_density"


class NonConvergence(ADPError, RuntimeError):
    code = "non_convergence"

    def __init__(self, message, grad_norm=float("nan")):
        super().__init__(message)
        self.grad_norm = grad_norm

    def to_dict(self):
        d = super().to_dict()
        d["grad_norm"] = self.grad_norm
        return d


class UnsupportedCombination(ADPError, ValueError):
    code = "unsupported_combination"


class AllAxesDegenerate(ADPError, ValueError):
    code = "all_axes_degenerate"


class ParseError(ADPError, ValueError):
    code = "parse_error"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column

    def to_dict(self):
        d = super().to_dict()
        d.update(row=self.row, column=self.column)
        return d


class EmptyFile(ADPError, ValueError):
    code = "empty_file"


class ConfigError(ADPError, ValueError):
    code = "config_error"
