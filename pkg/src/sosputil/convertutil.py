from .logger import logs
import inspect
from typing import Any, Dict, Optional, Tuple, Type, Union

from .errors import ConversionAddError, ConversionToError, ConversionFromError
from .converter_core import (
    ArrayConverter,
    BooleanConverter,
    Converter,
    LiteralConverter,
    NumericConverter,
    StringConverter,
)

substitutions = {
    "str": StringConverter,
    "int": NumericConverter,
    "bool": BooleanConverter,
    "float": NumericConverter,
    "Literal": LiteralConverter,
    "List": ArrayConverter,
    "list": ArrayConverter,
}


def add_converter(fortype: Type, converterclass: Type[Converter]) -> None:
    """
    Add a new converter that will generate schema for parameters annotated with fortype and
    convert values for them on validation.

    Raises:
        ConversionAddError: If the type already has a converter.
    """
    typename = fortype.__name__

    if typename not in substitutions:
        substitutions[typename] = converterclass
        logs.info("Adding converterclass %s for type %s", converterclass, typename)
    else:
        raise ConversionAddError(f"{typename} already in dictionary!")


def _typename(annotation: Any) -> str:
    if isinstance(annotation, str):
        return annotation.split("[", 1)[0]
    return getattr(annotation, "__name__", None) or getattr(annotation, "_name", None) or str(annotation)


class ConvertStatic:
    """static class for to_schema and from_schema logic."""

    @staticmethod
    def parameter_into_schema(
        param_name: str, param: inspect.Parameter, dec: Union[str, Dict[str, Any]]
    ) -> Tuple[Optional[Dict[str, Any]], Optional[Type[Converter]]]:
        """
        Converts a parameter signature into a schema. The parameter's default, when it has
        one, is recorded under "default" so the resolved config can be rebuilt from the schema.

        Returns:
            The schema generated along with the Converter class, or (None, None) for
            parameters whose type has no converter.

        Raises:
            ConversionToError: If conversion to schema fails.
        """
        decs = {"description": dec} if isinstance(dec, str) else dict(dec or {})
        typename = _typename(param.annotation)

        converter = substitutions.get(typename)
        if converter is None:
            logs.info("type %s was not found!  Param is %s", typename, param_name)
            return None, None
        param_info: Dict[str, Any] = {}
        if decs.get("description", ""):
            param_info["description"] = decs["description"]
        mod = converter().to_schema(param, decs)
        if mod is None:
            raise ConversionToError(param_name, param, decs)
        param_info.update(mod)
        if param.default is not inspect.Parameter.empty:
            default = param.default
            param_info["default"] = list(default) if isinstance(default, tuple) else default
        if "flags" in decs:
            param_info["flags"] = list(decs["flags"])
        logs.info("schema generated for param %s with type %s!", param_name, typename)
        return param_info, converter

    @staticmethod
    def schema_validate(param_name: str, value: Any, schema: Dict[str, Any], converter: Type[Converter]) -> Any:
        """
        Validate and apply any needed conversions to value based on schema.

        Raises:
            ConversionFromError: If conversion from schema fails.
        """
        if converter is None:
            error = ConversionFromError(param_name, value, schema, msg="No converter found.")
            logs.error(error, exc_info=1, stack_info=True)
            raise error
        try:
            return converter().from_schema(value, schema)
        except Exception as e:
            error = ConversionFromError(param_name, value, schema, str(e))
            logs.error(error, exc_info=1)
            raise error from e
