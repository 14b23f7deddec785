class SospLibError(Exception):
    """Base exception class for the sosputil library."""


class OracleError(SospLibError):
    """Exception raised when a function-pair oracle is misused or malformed."""

    def __init__(self, message):
        super().__init__(message)


class MissingGradientOracle(OracleError):
    """Exception raised when a first-order method is handed an oracle without grad_query."""

    def __init__(self, consumer: str):
        self.consumer = consumer
        super().__init__(f"{consumer} needs a gradient oracle, but this pair only answers value queries.")


class MissingTruthView(OracleError):
    """Exception raised when verification code is handed a pair without a truth view."""

    def __init__(self, consumer: str):
        self.consumer = consumer
        super().__init__(f"{consumer} needs the privileged truth view of F, and this pair has none.")


class ConfigError(SospLibError):
    """Exception raised when a configuration value violates its precondition."""

    def __init__(self, name: str, value, constraint: str):
        self.name = name
        self.value = value
        self.constraint = constraint
        super().__init__(f"{name}={value!r} is invalid: must satisfy {constraint}.")


class DegenerateInput(SospLibError):
    """Exception raised at points where a closed form is undefined (e.g. w = 0)."""

    def __init__(self, message):
        super().__init__(message)


class NonFiniteIterate(SospLibError):
    """Exception raised when an optimizer produces a NaN or infinite iterate."""

    def __init__(self, step: int, iterate, method: str = ""):
        self.step = step
        self.iterate = iterate
        self.method = method
        super().__init__(f"{method or 'optimizer'} produced a non-finite iterate at step {step}: {iterate}")


class NonFiniteDerivative(SospLibError):
    """Exception raised when a gradient or Hessian evaluation is not finite."""

    def __init__(self, where: str, point=None):
        self.where = where
        self.point = point
        super().__init__(f"non-finite {where} at x={point}")


class EigenNonConvergence(SospLibError):
    """Exception raised when the matrix-free eigenvalue iteration hits its cap."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"smallest-eigenvalue iteration did not converge after {iterations} steps, residual {residual:.3e}")


class CoverTooLarge(SospLibError):
    """Exception raised when an epsilon-cover would exceed the cardinality cap."""

    def __init__(self, size: int, cap: int, what: str = "cover"):
        self.size = size
        self.cap = cap
        super().__init__(f"{what} would hold {size} elements, above the cap of {cap}.")


class IllConditionedProbe(SospLibError):
    """Exception raised when the quadratic-model probe system cannot be solved reliably."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(
            f"probe design matrix is ill-conditioned (cond={condition:.3e}); use a denser sphere cover."
        )


class SearchExhausted(SospLibError):
    """Exception raised when the exhaustive search accepts no point of its cover."""

    def __init__(self, points_tried: int):
        self.points_tried = points_tried
        super().__init__(
            f"no point accepted among {points_tried} cover points; check the declared B, ell, rho and nu."
        )


class ExperimentNotFound(SospLibError):
    """Exception raised when an experiment kind with a certain name is not found."""

    def __init__(self, kind, params):
        self.kind = kind
        self.params = params
        message = f"Experiment '{kind}' not found.\nparams: {params}"
        super().__init__(message)


class ParamDecodeError(SospLibError):
    """Exception raised when there's an error decoding JSON parameters."""

    def __init__(self, kind, params, er, **kwargs):
        self.kind = kind
        self.params = params
        output = f" {er.msg} at line {er.lineno} column {er.colno}: `{params[er.pos]}`"
        message = f"ParamDecodeError for '{kind}': {output} \n {params}"
        super().__init__(message, **kwargs)


class InvalidParam(SospLibError):
    """Exception raised when an experiment receives unknown or missing parameters."""

    def __init__(self, message):
        super().__init__(message)


class ConversionError(SospLibError):
    """Exception raised when something went wrong converting/validating a parameter."""

    def __init__(self, message):
        super().__init__(message)


class ConversionToError(ConversionError):
    def __init__(self, param_name="", param="", schema=None, msg=""):
        self.param_name = param_name
        self.param = param
        self.dec = schema or {}
        message = f"{msg} Param:{param_name} of type {param}.\n could not be converted into a schema!"
        super().__init__(message)


class ConversionAddError(ConversionError):
    def __init__(self, msg=""):
        super().__init__(msg)


class ConversionFromError(ConversionError):
    def __init__(self, param_name="", value="", schema=None, msg=""):
        self.param_name = param_name
        self.value = value
        self.schema = schema or {}
        message = f"{msg} Param:{param_name}. Value{value}.\n Schema:{str(schema)}"
        super().__init__(message)
