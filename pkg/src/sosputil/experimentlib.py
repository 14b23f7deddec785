import inspect
import json
from typing import Any, Dict, List, Tuple, Union

from .errors import ConversionFromError, ExperimentNotFound, InvalidParam, ParamDecodeError, SospLibError
from .convertutil import ConvertStatic
from .logger import logs

from .util import parse_expression


class ExperimentCommand:
    """This class is a container for methods that have been annotated with the
    ExpParam and the ExperimentKind decorators,
    wrapping them up with the attributes an ExperimentLibrary needs to validate and invoke them."""

    def __init__(
        self,
        func: callable,
        name: str,
        description: str,
        required: List[str] = [],
        cli: Union[bool, List[str]] = True,
        enabled=True,
    ):
        """
        Args:
            func (callable): The experiment method to be wrapped.
            name (str): The experiment kind, e.g. "zpsgd-run".
            description (str): The description of the experiment.
            required (List[str], optional): parameters that must always be given even if they have defaults.
            cli (Union[bool, List[str]]): False hides the kind from the command line; a list gives extra
                subcommand aliases.
            enabled (bool, optional): Indicates whether the kind can be run. Defaults to True.
        """
        self.command = func
        self.kind = name
        logs.info("initalizing experiment kind %s", self.kind)
        self.kind_schema = {
            "name": self.kind,
            "description": description,
            "parameters": {"type": "object", "properties": {}, "required": []},
        }
        self.required = required
        self.aliases = list(cli) if isinstance(cli, (list, tuple)) else []
        self.on_cli = bool(cli)

        self.param_converters = {}
        self.param_iterate()

        self.enabled = enabled

    @property
    def properties(self) -> Dict[str, Dict[str, Any]]:
        return self.kind_schema["parameters"]["properties"]

    def param_iterate(self):
        """
        Iterates over the method's arguments and updates kind_schema with parameter information.
        Every parameter that is not annotated with a convertible type will not be added!
        """
        func = self.command
        param_decorators = getattr(func, "parameter_decorators", {})

        sig = inspect.signature(func)
        for param_name, param in sig.parameters.items():
            if param_name == "self":
                continue
            decs = param_decorators.get(param_name, "")

            param_info, converter = ConvertStatic.parameter_into_schema(param_name, param, dec=decs)

            if param_info is not None:
                self.param_converters[param_name] = converter
                self.properties[param_name] = param_info
                if param.default == inspect.Parameter.empty or param_name in self.required:
                    self.kind_schema["parameters"]["required"].append(param_name)

    def defaults(self) -> Dict[str, Any]:
        return {name: info["default"] for name, info in self.properties.items() if "default" in info}

    def convert_args(self, params: Dict[str, Any]) -> Dict[str, Any]:
        """Reject unknown or missing keys, then validate and convert every parameter
        with the Converters. Defaults fill in whatever was not given.

        Returns:
            Dict[str, Any]: The fully resolved parameter dictionary.
        """
        logs.info("converting params for experiment %s, params:%s", self.kind, params)
        unknown = sorted(set(params) - set(self.properties))
        if unknown:
            raise InvalidParam(f"unknown parameter(s) {unknown} for experiment '{self.kind}'.")
        missing = [name for name in self.kind_schema["parameters"]["required"] if name not in params]
        if missing:
            raise InvalidParam(f"missing required parameter(s) {missing} for experiment '{self.kind}'.")

        resolved = self.defaults()
        for name, value in params.items():
            converter = self.param_converters[name]
            result = ConvertStatic.schema_validate(name, value, self.properties[name], converter)
            logs.info("param %s converted into %s", name, result)
            resolved[name] = result
        return resolved


class ExperimentLibrary:
    """
    A collection of experiment kinds.
    When subclassed, methods decorated with ExperimentKind are added to an internal KindDict
    along with their ExperimentCommand. Each command carries a JSON-schema description of its
    parameters, which is used to validate config files, to build the command line and to echo
    the resolved configuration into the run's outputs.

    Attributes:
        KindDict (Dict[str, ExperimentCommand]): experiment kind names mapped to their commands.
    """

    def __init__(self):
        self.KindDict: Dict[str, ExperimentCommand] = {}
        self.do_expression = False

        self._update_kind_dict()

    def _update_kind_dict(self) -> None:
        """
        Update the KindDict with decorated methods from this class and its bases.
        """
        for klass in reversed(type(self).__mro__):
            for name, method in vars(klass).items():
                if hasattr(method, "experiment"):
                    command = method.experiment
                    logs.info("adding experiment '%s' into %s", command.kind, type(self).__name__)
                    self.KindDict[command.kind] = command

    def get_schema(self) -> List[Dict[str, Any]]:
        """
        Get the list of schema dictionaries for every enabled experiment kind.
        """
        return [command.kind_schema for command in self.KindDict.values() if command.enabled]

    def resolve_kind(self, name: str) -> str:
        """Map a kind name or one of its CLI aliases onto the kind name."""
        if name in self.KindDict:
            return name
        for kind, command in self.KindDict.items():
            if name in command.aliases:
                return kind
        raise ExperimentNotFound(kind=name, params={})

    def expression_match(self, kind: str, params: Dict[str, Any]) -> Dict[str, Any]:
        """
        Evaluate string values given for numeric parameters, e.g. "0.1**1.5/2".

        Raises:
            ConversionFromError: If a string does not evaluate to a finite real number.
        """
        if not self.do_expression:
            return params
        properties = self.KindDict[kind].properties
        out = dict(params)
        for name, value in params.items():
            schema = properties.get(name, {})
            try:
                if isinstance(value, str) and schema.get("type") in ("number", "integer"):
                    out[name] = parse_expression(value)
                elif isinstance(value, list) and schema.get("items", {}).get("type") in ("number", "integer"):
                    out[name] = [parse_expression(v) if isinstance(v, str) else v for v in value]
            except ValueError as e:
                raise ConversionFromError(name, value, schema, str(e)) from e
        return out

    def parse_kind_params(self, spec: Dict[str, Any]) -> Tuple[str, Dict[str, Any]]:
        """Parse the params within spec (a dict or a JSON string) for the kind it names."""
        kind = self.resolve_kind(spec.get("kind"))
        params = spec.get("params", {}) or {}
        if isinstance(params, str):
            try:
                params = json.loads(params)
            except json.JSONDecodeError as e:
                raise ParamDecodeError(kind, params, e) from e
        if not isinstance(params, dict):
            raise InvalidParam(f"params for '{kind}' must be an object, got {type(params).__name__}.")
        return kind, self.expression_match(kind, params)

    def convert_args(self, kind: str, params: Dict[str, Any]) -> Dict[str, Any]:
        return self.KindDict[kind].convert_args(params)

    def resolve(self, spec: Dict[str, Any]) -> Tuple[str, Dict[str, Any]]:
        """Kind name and fully resolved parameters for spec, without running anything."""
        kind, params = self.parse_kind_params(spec)
        return kind, self.convert_args(kind, params)

    def call_by_dict(self, spec: Dict[str, Any]) -> Any:
        """
        Run the experiment named by spec["kind"] with spec["params"].

        Raises:
            ExperimentNotFound: If the kind is unknown or disabled.
            InvalidParam / ConversionFromError: If the params do not fit the kind's schema.
        """
        kind, params = self.resolve(spec)
        command = self.KindDict[kind]
        if not command.enabled:
            raise ExperimentNotFound(kind=kind, params=params)
        logs.info("running experiment %s", kind)
        return command.command(self, **params)


def genspec(name: str, description: str, **kwargs):
    spec = {}
    spec[name] = {}
    spec[name]["description"] = description
    spec[name].update(kwargs)
    return spec


def ExpParamSpec(name: str, description: str, **kwargs):
    """
    A more advanced variant of ExpParam.  Set a parameter's description as well as
    additional schema keywords, e.g. 'minimum' or 'exclusiveMinimum' for numbers,
    'minItems' for lists, and 'flags' for extra command line spellings.

    Args:
        name: name of the parameter to apply description to.
        description: description to be applied to the parameter.
        **kwargs: additional schema keywords.
    Returns:
        The decorated function.
    """

    def decorator(func: callable) -> callable:
        if not hasattr(func, "parameter_decorators"):
            func.parameter_decorators = {}
        gen = genspec(name, description, **kwargs)
        func.parameter_decorators.update(gen)
        return func

    return decorator


def ExpParam(**kwargs: Any) -> Any:
    """
    Decorator to add descriptions to any parameter of an ExperimentLibrary method.
    Args:
        **kwargs: a method's parameters, and the description to be applied to each.
    Returns:
        The decorated function.
    """

    def decorator(func: callable) -> callable:
        if not hasattr(func, "parameter_decorators"):
            func.parameter_decorators = {}
        func.parameter_decorators.update(kwargs)
        return func

    return decorator


def ExperimentKind(
    name: str, description: str, required: List[str] = [], cli: Union[bool, List[str]] = True, enabled=True
) -> Any:
    """
    Flags an ExperimentLibrary method as an experiment kind, creating an ExperimentCommand.
    This should always be the outermost decorator:
    @ExperimentKind(...)
    @ExpParam(...)
    Args:
        name (str): The kind name used in config files and as the CLI subcommand.
        description (str): The description of the experiment.
        required:List[str]: parameters that must be given even if they have defaults.
        cli: True to expose on the command line, False to hide, or a list of subcommand aliases.
        enabled (bool): Whether or not this kind is enabled by default.
    Returns:
        callable
    """

    def decorator(func: callable):
        func.experiment = ExperimentCommand(func, name, description, required, cli, enabled)
        return func

    return decorator


__all__ = [
    "ExperimentCommand",
    "ExperimentLibrary",
    "ExperimentKind",
    "ExpParam",
    "ExpParamSpec",
    "genspec",
    "SospLibError",
]
