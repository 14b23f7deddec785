import inspect
import math
import re
from typing import Any, Dict, List, Union

from .util import parse_expression


class Converter:
    """
    Maps one annotation type to a JSON schema fragment and back. A kind's parameter schema is
    built from these, and the same fragment later checks the value that arrives from a config
    file, a summary echo or the command line.
    """

    def to_schema(self, param: inspect.Parameter, dec: Dict[str, Any]) -> Dict[str, Any]:
        """
        Schema fragment for ``param``.

        Parameters
        -----------
        param: :class:`inspect.Parameter`
            The annotated parameter of the experiment kind.
        dec: :class:`Dict[str,any]`
            Keywords given to ExpParamSpec for this parameter; each converter keeps the ones it understands.
        """
        raise NotImplementedError("Derived classes need to implement this.")

    def from_schema(self, value: Any, schema: Dict[str, Any]) -> Any:
        """
        Check ``value`` against ``schema`` and return it as the annotated type.

        Raises
        -------
        ValueError- if the value does not fit the schema.
        """
        raise NotImplementedError("Derived classes need to implement this.")


class BooleanConverter(Converter):
    """
    This converter is for Boolean flags such as ``audit`` or ``worst_case``.
    """

    def to_schema(self, param: inspect.Parameter, dec: Dict[str, Any]) -> Dict[str, Any]:
        return {"type": "boolean"}

    def from_schema(self, value: Any, schema: Dict[str, Any]) -> bool:
        if not isinstance(value, bool):
            raise ValueError("Value is not of type 'bool'.")
        return value


class StringConverter(Converter):
    """String parameters; minLength, maxLength and pattern are honoured."""

    keywords = ("minLength", "maxLength", "pattern")

    def to_schema(self, param: inspect.Parameter, dec: Dict[str, Any]) -> Dict[str, Any]:
        schema: Dict[str, Any] = {"type": "string"}
        schema.update({k: dec[k] for k in self.keywords if k in dec})
        return schema

    def from_schema(self, value: Any, schema: Dict[str, Any]) -> str:
        if not isinstance(value, str):
            raise ValueError("Value is not of type 'str'.")
        if len(value) < schema.get("minLength", 0):
            raise ValueError("Value does not meet the minLength constraint.")
        if "maxLength" in schema and len(value) > schema["maxLength"]:
            raise ValueError("Value exceeds the maxLength constraint.")
        if "pattern" in schema and not re.match(schema["pattern"], value):
            raise ValueError("Value does not match the specified pattern.")
        return value

def _as_number(value: Any, integer: bool) -> Union[int, float]:
    """Coerce a JSON/CLI scalar into an int or float; integral floats such as 1e4 become ints."""
    if isinstance(value, bool):
        raise ValueError("Value is a bool, not a number.")
    if isinstance(value, str):
        value = parse_expression(value)
    if not isinstance(value, (int, float)):
        raise ValueError("Value is not of type 'int' or 'float'.")
    if integer:
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError("Value is not an integer.")
            value = int(value)
        return value
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("Value is not finite.")
    return value


class NumericConverter(Converter):
    """This Converter is for floats and integers, including ones written as arithmetic expressions."""

    bounds = ("minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum")

    def to_schema(self, param: inspect.Parameter, dec: Dict[str, Any]) -> Dict[str, Any]:
        """
        Generate a number or integer type schema from a parameter signature and declare additonal keywords.

        Parameters
        -----------
        param: :class:`inspect.Parameter`
            The Parameter signature to convert.  Should have an `int` or `float` annotation.
        dec: :class:`Dict[str,Any]`
            Dictionary of additional attributes to be added to the schema, such as
            minimum, maximum, exclusiveMinimum and exclusiveMaximum.
        """
        schema: Dict[str, Any] = {}
        for key in self.bounds:
            if key in dec:
                schema[key] = dec[key]

        if param.annotation == int or param.annotation == "int":
            schema["type"] = "integer"
        else:
            schema["type"] = "number"

        return schema

    def from_schema(self, value: Any, schema: Dict[str, Any]) -> Union[float, int]:
        """
        Coerce value into the schema's numeric type and check its bounds.

        Raises
        -------
        ValueError- if the value is not numeric or violates a bound.
        """
        value = _as_number(value, schema.get("type") == "integer")

        if "minimum" in schema and value < schema["minimum"]:
            raise ValueError(f"Value is below the minimum of {schema['minimum']}.")

        if "maximum" in schema and value > schema["maximum"]:
            raise ValueError(f"Value exceeds the maximum of {schema['maximum']}.")

        if "exclusiveMinimum" in schema and value <= schema["exclusiveMinimum"]:
            raise ValueError(f"Value must be above {schema['exclusiveMinimum']}.")

        if "exclusiveMaximum" in schema and value >= schema["exclusiveMaximum"]:
            raise ValueError(f"Value must be below {schema['exclusiveMaximum']}.")

        return value


class ArrayConverter(Converter):
    """This Converter is for 1D lists of numbers, e.g. a starting point or a list of sample sizes."""

    item_types = {int: "integer", float: "number", str: "string", bool: "boolean"}

    def to_schema(self, param: inspect.Parameter, dec: Dict[str, Any]) -> Dict[str, Any]:
        """Array schema for a ``List[T]`` annotation; T of int, float, str or bool gives typed items."""
        schema: Dict[str, Any] = {"type": "array"}
        if param.annotation == list or getattr(param.annotation, "__origin__", None) == list:
            element_type = getattr(param.annotation, "__args__", [Any])[0]
            kind = self.item_types.get(element_type)
            schema["items"] = {"type": kind} if kind else {}
        for key in ("minItems", "maxItems"):
            if key in dec:
                schema[key] = dec[key]
        return schema

    def from_schema(self, value: Any, schema: Dict[str, Any]) -> List:
        """
        Validate value as a list and convert its numeric elements.

        Raises
        -------
        ValueError- if Validation has failed.
        """
        if isinstance(value, tuple):
            value = list(value)
        if not isinstance(value, list):
            raise ValueError("Value is not of type 'list'.")
        if len(value) < schema.get("minItems", 0):
            raise ValueError("Value does not meet the minItems constraint.")
        if "maxItems" in schema and len(value) > schema["maxItems"]:
            raise ValueError("Value exceeds the maxItems constraint.")

        items = schema.get("items", {})
        if items.get("type") in ("integer", "number"):
            value = [_as_number(v, items["type"] == "integer") for v in value]
        elif items.get("type") == "string" and not all(isinstance(v, str) for v in value):
            raise ValueError("Value has non-string elements.")
        return value


class LiteralConverter(Converter):
    """Create enums from literals, eg Literal['double-well', 'quadratic'].
    Only String Literals can be used."""

    def to_schema(self, param: inspect.Parameter, dec: Dict[str, Any]) -> Dict[str, Any]:
        schema: Dict[str, Any] = {}
        literal_values = param.annotation.__args__
        schema["type"] = "string"
        schema["enum"] = list(literal_values)
        schema.update({k: v for k, v in dec.items() if k != "description"})
        return schema

    def from_schema(self, value: Any, schema: Dict[str, Any]) -> Any:
        if value not in schema["enum"]:
            raise ValueError(f"Value {value} does not match any of {schema['enum']}.")
        return value


