# -*- coding: UTF-8 -*-

from abc import ABC
from math import isfinite
from numbers import Integral, Real
from typing import Any

from .exceptions import IllegalOperation, ScenarioError


class Utils(ABC):
    """Descriptor utils."""

    @staticmethod
    def _get_name(instance: Any) -> str:
        return instance.__class__.__name__


class Descriptor(ABC):
    """
    Base descriptor.
    Values live in the instance `__dict__` under the attribute name and,
    since no `__get__` is defined, reads bypass the descriptor entirely.
    """

    def __set_name__(self, instance_type, attribute):
        self._type = instance_type
        self._attribute = attribute

    def __set__(self, instance, value):
        instance.__dict__.update({self._attribute: value})

    def __delete__(self, instance):
        if self._attribute in instance.__dict__:
            instance.__dict__.pop(self._attribute)


class Immutable(Descriptor, Utils):
    """Base immutable descriptor"""

    def __set__(self, instance, value):
        if self._attribute in instance.__dict__:
            raise IllegalOperation(
                f"{self._get_name(instance)} object does not support "
                f"'{self._attribute}' attribute update!"
            )
        super(Immutable, self).__set__(instance, value)

    def __delete__(self, instance):
        raise IllegalOperation(
            f"{self._get_name(instance)} object does not support "
            f"'{self._attribute}' attribute deletion!"
        )


class AnyVar(Descriptor, Utils):
    """Mutable attribute descriptor."""

    def __set__(self, instance: Any, value: Any):
        super(AnyVar, self).__set__(
            instance,
            self._check_value(instance, value)
        )

    def _fail(self, instance: Any, message: str):
        raise ScenarioError(
            self._attribute,
            f"{self._get_name(instance)} attribute {message}"
        )

    def _check_value(self, instance: Any, value: Any) -> Any:
        if value is None:
            self._fail(instance, "cannot be `None`!")
        return value


class StringVar(AnyVar):
    """Non-empty string attribute descriptor."""

    def _check_value(self, instance: Any, value: str) -> str:
        if (not isinstance(value, str)) or (not len(value) > 0):
            self._fail(instance, "must be a non-empty string value!")
        return value


class BoolVar(AnyVar):
    """Boolean attribute descriptor."""

    def _check_value(self, instance: Any, value: bool) -> bool:
        if not isinstance(value, bool):
            self._fail(instance, f"must be of type 'bool' not '{type(value).__name__}'!")
        return value


class RealVar(AnyVar):
    """Finite real attribute descriptor; stores a `float`."""

    def _check_value(self, instance: Any, value: Real) -> float:
        if isinstance(value, bool) or (not isinstance(value, Real)) or (not isfinite(value)):
            self._fail(instance, f"must be a finite real number not '{value}'!")
        return float(value)


class PositiveVar(RealVar):
    """Strictly positive real attribute descriptor."""

    def _check_value(self, instance: Any, value: Real) -> float:
        value = super(PositiveVar, self)._check_value(instance, value)
        if not value > 0:
            self._fail(instance, f"must be positive not '{value}'!")
        return value


class NonNegativeVar(RealVar):
    """Non-negative real attribute descriptor."""

    def _check_value(self, instance: Any, value: Real) -> float:
        value = super(NonNegativeVar, self)._check_value(instance, value)
        if value < 0:
            self._fail(instance, f"must be non-negative not '{value}'!")
        return value


class FractionVar(RealVar):
    """Real attribute descriptor restricted to (0, 1]."""

    def _check_value(self, instance: Any, value: Real) -> float:
        value = super(FractionVar, self)._check_value(instance, value)
        if not 0 < value <= 1:
            self._fail(instance, f"must lie in (0, 1] not '{value}'!")
        return value


class CountVar(AnyVar):
    """Integer attribute descriptor with a lower bound."""

    def __init__(self, minimum: int = 0):
        self._minimum = minimum

    def _check_value(self, instance: Any, value: Integral) -> int:
        if isinstance(value, bool) or (not isinstance(value, Integral)):
            self._fail(instance, f"must be of type 'int' not '{type(value).__name__}'!")
        if value < self._minimum:
            self._fail(instance, f"must be at least {self._minimum} not '{value}'!")
        return int(value)


class ImmutableVar(AnyVar, Immutable):
    """
    Immutable attribute descriptor.
    Once a value was assigned it can no longer be updated nor deleted.
    """


class ImmutableStringVar(StringVar, Immutable):
    """Immutable non-empty string."""


class ImmutableBoolVar(BoolVar, Immutable):
    """Immutable boolean."""


class ImmutableRealVar(RealVar, Immutable):
    """Immutable finite real."""


class ImmutablePositiveVar(PositiveVar, Immutable):
    """Immutable positive real."""


class ImmutableNonNegativeVar(NonNegativeVar, Immutable):
    """Immutable non-negative real."""


class ImmutableFractionVar(FractionVar, Immutable):
    """Immutable real in (0, 1]."""


class ImmutableCountVar(CountVar, Immutable):
    """Immutable bounded integer."""
