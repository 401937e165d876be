"""Core record types shared across the package."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Hashable, Optional

UserId = Hashable

ATTRIBUTES = ("location", "info_role", "content_role", "activity_cluster")


class Continent(str, enum.Enum):
    NorthAmerica = "NorthAmerica"
    SouthAmerica = "SouthAmerica"
    Europe = "Europe"
    Asia = "Asia"
    Africa = "Africa"
    Oceania = "Oceania"
    Other = "Other"


class Role(str, enum.Enum):
    Generator = "Generator"
    Mediator = "Mediator"
    Receptor = "Receptor"


class ContentRole(str, enum.Enum):
    Meformer = "Meformer"
    Informer = "Informer"


@dataclass(frozen=True)
class UserRecord:
    id: UserId
    timezone: Optional[str] = None
    location: Optional[Continent] = None
    info_role: Optional[Role] = None
    content_role: Optional[ContentRole] = None
    activity_cluster: Optional[int] = None

    def attribute(self, name: str):
        return getattr(self, name)

    def with_attributes(self, **values) -> "UserRecord":
        return replace(self, **values)


@dataclass(frozen=True)
class ActionEvent:
    """One post. ``timestamp`` is epoch seconds, UTC."""

    user: UserId
    timestamp: float
    topics: frozenset = field(default_factory=frozenset)
    has_url: bool = False
    is_retweet: bool = False
    mentions: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.timestamp > 0:
            raise ValueError(f"timestamp must be positive, got {self.timestamp!r}")
        if not isinstance(self.topics, frozenset):
            object.__setattr__(self, "topics", frozenset(self.topics))
        if not isinstance(self.mentions, frozenset):
            object.__setattr__(self, "mentions", frozenset(self.mentions))

    @property
    def informational(self) -> bool:
        return self.has_url or self.is_retweet


def parse_attribute_value(attribute: str, raw):
    """Coerce a raw attribute value (string from a file, enum, int) to its type."""
    if raw is None or raw == "":
        return None
    if attribute == "location":
        return raw if isinstance(raw, Continent) else Continent(str(raw))
    if attribute == "info_role":
        return raw if isinstance(raw, Role) else Role(str(raw))
    if attribute == "content_role":
        return raw if isinstance(raw, ContentRole) else ContentRole(str(raw))
    if attribute == "activity_cluster":
        return int(raw)
    raise KeyError(attribute)
