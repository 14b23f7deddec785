"""Experiment registry: schema generation, converters and parameter resolution."""
import inspect
from inspect import Parameter
from typing import Any, Dict, List, Literal

import pytest

from sosputil import *
from sosputil.util import parse_expression


class ToyLib(ExperimentLibrary):
    @ExperimentKind(name="scale", description="Multiply a vector.", cli=["mul"])
    @ExpParamSpec("factor", "Scale factor.", exclusiveMinimum=0)
    @ExpParam(values="Numbers to scale.", mode="Rounding mode.", steps="How many times.")
    def scale(self, values: List[float], factor: float = 2.0, steps: int = 1, mode: Literal["none", "floor"] = "none"):
        out = list(values)
        for _ in range(steps):
            out = [v * factor for v in out]
        if mode == "floor":
            out = [float(int(v)) for v in out]
        return out

    @ExperimentKind(name="hidden", description="Not runnable.", cli=False, enabled=False)
    def hidden(self, flag: bool = False):
        return flag


def test_schema_generation():
    lib = ToyLib()
    schema = lib.get_schema()
    assert [s["name"] for s in schema] == ["scale"]
    props = schema[0]["parameters"]["properties"]
    assert props["values"] == {"description": "Numbers to scale.", "type": "array", "items": {"type": "number"}}
    assert props["factor"]["exclusiveMinimum"] == 0
    assert props["factor"]["default"] == 2.0
    assert props["steps"]["type"] == "integer"
    assert props["mode"]["enum"] == ["none", "floor"]
    assert schema[0]["parameters"]["required"] == ["values"]


def test_call_by_dict_with_defaults_and_json_params():
    lib = ToyLib()
    assert lib.call_by_dict({"kind": "scale", "params": {"values": [1, 2]}}) == [2.0, 4.0]
    assert lib.call_by_dict({"kind": "mul", "params": '{"values": [1.5], "steps": 2, "mode": "floor"}'}) == [6.0]


def test_resolve_fills_defaults():
    kind, params = ToyLib().resolve({"kind": "scale", "params": {"values": [1]}})
    assert kind == "scale"
    assert params == {"values": [1.0], "factor": 2.0, "steps": 1, "mode": "none"}


def test_unknown_kind_and_disabled_kind():
    lib = ToyLib()
    with pytest.raises(ExperimentNotFound):
        lib.call_by_dict({"kind": "nothing", "params": {}})
    with pytest.raises(ExperimentNotFound):
        lib.call_by_dict({"kind": "hidden", "params": {}})
    assert lib.resolve_kind("mul") == "scale"


def test_bad_params():
    lib = ToyLib()
    with pytest.raises(InvalidParam):
        lib.resolve({"kind": "scale", "params": {"values": [1], "colour": "red"}})
    with pytest.raises(InvalidParam):
        lib.resolve({"kind": "scale", "params": {}})
    with pytest.raises(ParamDecodeError):
        lib.resolve({"kind": "scale", "params": "{not json"})
    with pytest.raises(ConversionFromError):
        lib.resolve({"kind": "scale", "params": {"values": [1], "factor": 0}})
    with pytest.raises(ConversionFromError):
        lib.resolve({"kind": "scale", "params": {"values": [1], "mode": "ceil"}})


def test_expressions_are_evaluated_when_enabled():
    lib = ToyLib()
    lib.do_expression = True
    _, params = lib.resolve({"kind": "scale", "params": {"values": ["1/4", 2], "factor": "sqrt(16)"}})
    assert params["values"] == [0.25, 2.0]
    assert params["factor"] == 4.0


def test_unparseable_expressions_are_conversion_errors():
    lib = ToyLib()
    lib.do_expression = True
    for bad in ("abc", "1/0"):
        with pytest.raises(ConversionFromError):
            lib.resolve({"kind": "scale", "params": {"values": [1], "factor": bad}})
    with pytest.raises(ConversionFromError):
        lib.resolve({"kind": "scale", "params": {"values": ["x + 1"]}})


def test_string_numbers_convert_without_expression_mode():
    _, params = ToyLib().resolve({"kind": "scale", "params": {"values": [1], "steps": "3"}})
    assert params["steps"] == 3


def test_string_converter_to_schema():
    converter = StringConverter()
    param = inspect.Parameter("param", Parameter.POSITIONAL_OR_KEYWORD)
    dec = {"minLength": 5, "maxLength": 10, "pattern": r"^[a-zA-Z]+$"}
    expected_schema = {"type": "string", "minLength": 5, "maxLength": 10, "pattern": r"^[a-zA-Z]+$"}
    assert converter.to_schema(param, dec) == expected_schema


def test_string_converter_from_schema():
    converter = StringConverter()
    schema = {"type": "string", "minLength": 3, "maxLength": 5, "pattern": r"^[a-z]+$"}
    assert converter.from_schema("test", schema) == "test"
    with pytest.raises(ValueError):
        converter.from_schema(123, {"type": "string"})


def test_numeric_converter_to_schema():
    converter = NumericConverter()
    param = inspect.Parameter("param", Parameter.POSITIONAL_OR_KEYWORD, annotation=int)
    assert converter.to_schema(param, {"minimum": 0, "maximum": 10}) == {"type": "integer", "minimum": 0, "maximum": 10}
    assert converter.to_schema(param, {}) == {"type": "integer"}
    fparam = inspect.Parameter("param", Parameter.POSITIONAL_OR_KEYWORD, annotation=float)
    assert converter.to_schema(fparam, {"exclusiveMinimum": 0}) == {"type": "number", "exclusiveMinimum": 0}


def test_numeric_converter_from_schema():
    converter = NumericConverter()
    schema = {"type": "integer", "minimum": 0, "maximum": 10, "exclusiveMinimum": -1, "exclusiveMaximum": 11}
    assert converter.from_schema(5, schema) == 5
    assert converter.from_schema(1e4, {"type": "integer"}) == 10000
    assert converter.from_schema("0.1**2", {"type": "number"}) == pytest.approx(0.01)


@pytest.mark.parametrize(
    "value,schema",
    [
        ("test", {"type": "integer"}),
        (True, {"type": "number"}),
        (2.5, {"type": "integer"}),
        (-1, {"type": "integer", "minimum": 0}),
        (15, {"type": "integer", "maximum": 10}),
        (0, {"type": "number", "exclusiveMinimum": 0}),
        (10, {"type": "integer", "exclusiveMaximum": 10}),
        (float("inf"), {"type": "number"}),
        ("1/0", {"type": "number"}),
        ("oo", {"type": "number"}),
        ("sqrt(-1)", {"type": "number"}),
    ],
)
def test_numeric_converter_rejects(value, schema):
    with pytest.raises(ValueError):
        NumericConverter().from_schema(value, schema)


def test_array_converter():
    converter = ArrayConverter()
    param = inspect.Parameter("param", Parameter.POSITIONAL_OR_KEYWORD, annotation=List[int])
    schema = converter.to_schema(param, {"minItems": 1, "maxItems": 5})
    assert schema == {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 5}
    assert converter.from_schema((1, "2", 3.0), schema) == [1, 2, 3]
    with pytest.raises(ValueError):
        converter.from_schema("test", {"type": "array"})
    with pytest.raises(ValueError):
        converter.from_schema([], schema)


def test_boolean_and_literal_converters():
    assert BooleanConverter().from_schema(True, {"type": "boolean"}) is True
    with pytest.raises(ValueError):
        BooleanConverter().from_schema("yes", {"type": "boolean"})
    param = inspect.Parameter("p", Parameter.POSITIONAL_OR_KEYWORD, annotation=Literal["a", "b"])
    schema = LiteralConverter().to_schema(param, {"description": "pick"})
    assert schema == {"type": "string", "enum": ["a", "b"]}


def test_custom_converter():
    class Interval:
        def __init__(self, lo, hi):
            self.lo, self.hi = lo, hi

    class IntervalConverter(StringConverter):
        def to_schema(self, param: inspect.Parameter, dec: Dict[str, Any]) -> Dict[str, Any]:
            schema = super().to_schema(param, dec)
            schema["pattern"] = r"^\s*(-?[\d.]+)\s*:\s*(-?[\d.]+)\s*$"
            return schema

        def from_schema(self, value: Any, schema: Dict[str, Any]) -> Any:
            value = super().from_schema(value, schema)
            lo, hi = (float(v) for v in value.split(":"))
            return Interval(lo, hi)

    add_converter(Interval, IntervalConverter)
    with pytest.raises(ConversionAddError):
        add_converter(Interval, IntervalConverter)

    class IntervalLib(ExperimentLibrary):
        @ExperimentKind(name="width", description="Width of an interval.")
        @ExpParam(span="lo:hi")
        def width(self, span: Interval):
            return span.hi - span.lo

    assert IntervalLib().call_by_dict({"kind": "width", "params": {"span": "-1:2.5"}}) == 3.5


def test_subclass_inherits_kinds():
    class MoreLib(ToyLib):
        @ExperimentKind(name="count", description="Length of a list.")
        def count(self, values: List[float]):
            return len(values)

    lib = MoreLib()
    assert set(lib.KindDict) == {"scale", "hidden", "count"}
    assert lib.call_by_dict({"kind": "count", "params": {"values": [1, 2, 3]}}) == 3


def test_parse_expression():
    assert parse_expression("1/4") == 0.25
    assert parse_expression("2**3") == 8
    assert isinstance(parse_expression("2**3"), int)
    for bad in ("abc", "1/0", "oo", "1 +"):
        with pytest.raises(ValueError):
            parse_expression(bad)
