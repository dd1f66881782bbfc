"""JSON Schema objects and a type-hint parser that builds them from run-configuration dataclasses.

Parse a dataclass:

>>> from dataclasses import dataclass, field
>>> @dataclass
... class Grid:
...     step: float = field(default=0.1, metadata={"exclusiveMinimum": 0})
...     closure: t.Literal["dirichlet", "absorbing_layer"] = "dirichlet"
>>> Parser().parse_dataclass(Grid).json_repr()["properties"]["step"]
{'exclusiveMinimum': 0, 'default': 0.1, 'type': 'number'}
"""

import inspect
import typing as t
from abc import ABC
from dataclasses import MISSING, dataclass, fields, is_dataclass
from weakref import proxy

from tadpole.errors import TadpoleError

__all__ = [
    "TYPES",
    "IncompatibleTypesError",
    "JSONSchemaType",
    "String",
    "Number",
    "Integer",
    "Enum",
    "Null",
    "Object",
    "AnyOf",
    "Parser",
    "TypeParser",
]

NoneType = type(None)

#: schema keywords a dataclass field may carry in ``field(metadata=...)``
BOUND_KEYS = ("minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum", "minLength", "description")


class IncompatibleTypesError(TadpoleError):
    """Annotation type is incompatible with JSONSchema."""


class JSONSchemaType(t.Protocol):
    """Json schema object interface."""

    def json_repr(self) -> t.Dict[str, t.Any]:
        """Produce a JSON-compatible representation of the object."""
        return _serialize_schema_keys(vars(self))


def _serialize_schema_value(value: t.Any, /) -> t.Any:
    if isinstance(value, t.Mapping):
        return _serialize_schema_keys(value)
    if isinstance(value, (list, tuple)):
        return [_serialize_schema_value(sub_value) for sub_value in value]
    if hasattr(value, "json_repr"):
        return value.json_repr()
    return value


def _serialize_schema_keys(obj: t.Mapping) -> t.Dict[str, t.Any]:
    return {
        key: _serialize_schema_value(value)
        for key, value in obj.items()
        if not key.startswith("_") and value is not None and value is not ...
    }


class _Typed:
    """Adds the ``type`` keyword to the serialized form."""

    _type: t.ClassVar[str]

    def json_repr(self) -> t.Dict[str, t.Any]:
        data = _serialize_schema_keys(vars(self))
        data["type"] = self._type
        return data


@dataclass
class String(_Typed, JSONSchemaType):
    """String type.

    >>> String(minLength=1).json_repr()
    {'minLength': 1, 'type': 'string'}
    """

    _type = "string"

    minLength: int = None
    title: str = None
    description: str = None
    default: str = ...


@dataclass
class Number(_Typed, JSONSchemaType):
    """Numeric data type.

    >>> Number(exclusiveMinimum=0).json_repr()
    {'exclusiveMinimum': 0, 'type': 'number'}
    """

    _type = "number"

    minimum: float = None
    maximum: float = None
    exclusiveMinimum: float = None
    exclusiveMaximum: float = None
    title: str = None
    description: str = None
    default: float = ...


@dataclass
class Integer(_Typed, JSONSchemaType):
    """Integer type.

    >>> Integer(minimum=1).json_repr()
    {'minimum': 1, 'type': 'integer'}
    """

    _type = "integer"

    minimum: int = None
    maximum: int = None
    exclusiveMinimum: int = None
    exclusiveMaximum: int = None
    title: str = None
    description: str = None
    default: int = ...


@dataclass
class Enum(JSONSchemaType):
    """Enum value.

    >>> Enum(["plus", "minus"]).json_repr()
    {'enum': ['plus', 'minus']}
    """

    enum: t.List
    title: str = None
    description: str = None
    default: t.Any = ...


@dataclass
class Null(JSONSchemaType):
    """Null value.

    >>> Null().json_repr()
    {'type': 'null'}
    """

    def json_repr(self) -> t.Dict[str, t.Any]:
        return {"type": "null"}


@dataclass
class Object(_Typed, JSONSchemaType):
    """JSON object type (dictionary-like).

    >>> Object({'out_dir': String()}, required=['out_dir']).json_repr()
    {'properties': {'out_dir': {'type': 'string'}}, 'required': ['out_dir'], 'type': 'object'}
    """

    _type = "object"

    properties: t.Dict[str, JSONSchemaType] = None
    additionalProperties: bool = None
    required: t.List[str] = None
    title: str = None
    description: str = None
    default: t.Dict = ...


@dataclass
class AnyOf(JSONSchemaType):
    """Any of the included schemas must be valid.

    >>> AnyOf([Integer(), Null()]).json_repr()
    {'anyOf': [{'type': 'integer'}, {'type': 'null'}]}
    """

    items: t.Collection[JSONSchemaType]
    default: t.Any = ...

    def json_repr(self) -> t.Dict[str, t.Any]:
        data = {"anyOf": [item.json_repr() for item in self.items]}
        if self.default is not ...:
            data["default"] = self.default
        return data


TYPES: t.List[t.Type["TypeParser"]] = []  #: default collection of type parsers


class Parser:
    """Python annotations parser.

    >>> Parser().parse_annotation(t.Optional[int], default=None).json_repr()
    {'anyOf': [{'type': 'integer'}, {'type': 'null'}], 'default': None}

    Annotations without a JSON counterpart are rejected:

    >>> Parser().parse_annotation(complex)
    Traceback (most recent call last):
    ...
    tadpole.schema.IncompatibleTypesError: Unable to parse annotation <class 'complex'> as a jsonschema type
    """

    def __init__(self, *, types: t.Optional[t.List[t.Type["TypeParser"]]] = None):
        """Initialize

        :param types: list of type parsers, by default :py:obj:`~tadpole.schema.TYPES` is used
        """
        self.types = types or TYPES
        self._types = [cls(self) for cls in self.types]

    def parse_dataclass(self, cls: t.Type, /) -> Object:
        """Object schema of a dataclass: one property per public field, ``additionalProperties`` false."""
        if not is_dataclass(cls):
            raise IncompatibleTypesError(f"{cls} is not a dataclass")
        hints = t.get_type_hints(cls)
        properties, required = {}, []
        for f in fields(cls):
            if f.name.startswith("_") or not f.init:
                continue
            default = f.default if f.default is not MISSING else ...
            if default is ...:
                required.append(f.name)
            schema = self.parse_annotation(hints[f.name], default=default)
            for key in BOUND_KEYS:
                if key in f.metadata:
                    _set_bound(schema, key, f.metadata[key])
            properties[f.name] = schema
        return Object(
            properties=properties,
            required=required or None,
            additionalProperties=False,
            title=cls.__name__,
            description=_summary(cls.__doc__),
        )

    def parse_annotation(self, annotation, /, default=...) -> JSONSchemaType:
        """Convert python annotation into a jsonschema object."""
        for parser in self._types:
            if parser.can_parse(annotation):
                schema = parser.parse_annotation(annotation)
                if default is not ...:
                    schema.default = default
                return schema
        raise IncompatibleTypesError(f"Unable to parse annotation {annotation} as a jsonschema type")


def _set_bound(schema: JSONSchemaType, key: str, value: t.Any) -> None:
    targets = schema.items if isinstance(schema, AnyOf) else [schema]
    applied = False
    for target in targets:
        if hasattr(target, key):
            setattr(target, key, value)
            applied = True
    if not applied:
        raise IncompatibleTypesError(f"Keyword {key!r} does not apply to {type(schema).__name__}")


def _summary(doc: t.Optional[str], /) -> t.Optional[str]:
    if doc:
        return inspect.cleandoc(doc).split("\n")[0]
    return None


class TypeParser(ABC):
    """Type parser"""

    types: t.Tuple[t.Type, ...] = ()
    annotation: t.Type[JSONSchemaType]

    def __init__(self, _parser: Parser):
        self._parser = proxy(_parser)

    def can_parse(self, annotation, /) -> bool:
        return annotation in self.types

    def parse_annotation(self, annotation, /) -> JSONSchemaType:
        return self.annotation()  # noqa


class StringParser(TypeParser):
    types = (str,)
    annotation = String


class IntegerParser(TypeParser):
    types = (int,)
    annotation = Integer


class NumberParser(TypeParser):
    types = (float,)
    annotation = Number


class NullParser(TypeParser):
    types = (None, NoneType)
    annotation = Null


class ConstantParser(TypeParser):

    def can_parse(self, annotation, /) -> bool:
        return t.get_origin(annotation) is t.Literal

    def parse_annotation(self, annotation, /) -> JSONSchemaType:
        return Enum(enum=list(t.get_args(annotation)))


class UnionParser(TypeParser):

    def can_parse(self, annotation, /) -> bool:
        return t.get_origin(annotation) is t.Union

    def parse_annotation(self, annotation, /) -> JSONSchemaType:
        return AnyOf([self._parser.parse_annotation(arg) for arg in t.get_args(annotation)])


for value in tuple(locals().values()):
    if inspect.isclass(value) and issubclass(value, TypeParser) and value is not TypeParser:
        TYPES.append(value)
