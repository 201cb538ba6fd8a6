# -*- coding: UTF-8 -*-

from typing import Dict, List, Type

from .exceptions import RegistryKeyError, DuplicateKeyError, MissingKeyError


class VariantRegistry(object):
    """
    Write-once table of drop-rule sets keyed by variant tag.

    Rule classes are stateless, so each is instantiated once at
    registration and the instance is shared by every queue.

    Example:
        from .registry import VariantRegistry

        @VariantRegistry.register("RED1")
        class Red1Rules(VariantRules):
            ...

        rules = VariantRegistry.get("RED1")
        rules.tag  # "RED1"
    """

    __registry__: Dict[str, object] = {}

    @classmethod
    def register(cls, tag: str):
        def decorator(rules: Type) -> Type:
            cls._set_entry(tag, rules)
            return rules
        return decorator

    @classmethod
    def get(cls, tag: str):
        if tag not in cls.__registry__:
            raise MissingKeyError(
                f"No drop rules registered for variant '{tag}' "
                f"(known: {', '.join(cls.__registry__)})!"
            )
        return cls.__registry__[tag]

    @classmethod
    def tags(cls) -> List[str]:
        """Tags in registration order."""
        return list(cls.__registry__)

    @classmethod
    def _set_entry(cls, tag: str, rules: Type):
        if not tag or tag != tag.strip().upper():
            raise RegistryKeyError(
                f"Cannot register '{rules.__name__}' under tag '{tag}'; "
                f"tags are non-empty and upper case!"
            )
        if tag in cls.__registry__:
            raise DuplicateKeyError(
                f"Variant '{tag}' is already served by '{type(cls.__registry__[tag]).__name__}'!"
            )
        rules.tag = tag
        cls.__registry__[tag] = rules()
