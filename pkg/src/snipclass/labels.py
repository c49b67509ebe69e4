"""Language label sets and the tag-alias config format.

An alias file maps each label to the Stack Overflow tags that count as it::

    # comment
    vb.net: vb.net, vb
    c#: c#
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping


class LabelSetError(ValueError):
    pass


@dataclass(frozen=True)
class LabelSet:
    labels: tuple[str, ...]
    tag_aliases: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(set(labels)) != len(labels):
            raise LabelSetError(f"duplicate labels in {list(labels)}")
        aliases = {lab: tuple(self.tag_aliases.get(lab, (lab,))) for lab in labels}
        extra = set(self.tag_aliases) - set(labels)
        if extra:
            raise LabelSetError(f"aliases given for unknown labels: {sorted(extra)}")
        owner: dict[str, str] = {}
        for lab, tags in aliases.items():
            for tag in tags:
                if tag in owner and owner[tag] != lab:
                    raise LabelSetError(
                        f"tag {tag!r} is an alias of both {owner[tag]!r} and {lab!r}"
                    )
                owner[tag] = lab
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "tag_aliases", aliases)
        object.__setattr__(self, "_owner", owner)

    def __contains__(self, label) -> bool:
        return label in self.tag_aliases

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def label_for_tag(self, tag: str) -> str | None:
        return self._owner.get(tag)

    def restrict(self, labels: Iterable[str]) -> "LabelSet":
        """Sub-label-set keeping the requested labels in the given order."""
        labels = list(labels)
        missing = [lab for lab in labels if lab not in self]
        if missing:
            raise LabelSetError(f"labels not in label set: {missing}")
        return LabelSet(tuple(labels), {lab: self.tag_aliases[lab] for lab in labels})

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "LabelSet":
        """Each label is its own (sole) tag."""
        return cls(tuple(labels))

    def to_dict(self) -> dict:
        return {"labels": list(self.labels),
                "tag_aliases": {k: list(v) for k, v in self.tag_aliases.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LabelSet":
        return cls(tuple(d["labels"]),
                   {k: tuple(v) for k, v in d.get("tag_aliases", {}).items()})


def parse_aliases(text: str) -> LabelSet:
    labels = []
    aliases = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        label, sep, rest = line.partition(":")
        label = label.strip()
        if not sep or not label:
            raise LabelSetError(f"line {lineno}: expected 'label: tag1, tag2', got {raw!r}")
        tags = tuple(t.strip().lower() for t in rest.split(",") if t.strip())
        if label in aliases:
            raise LabelSetError(f"line {lineno}: label {label!r} defined twice")
        labels.append(label)
        aliases[label] = tags or (label.lower(),)
    if not labels:
        raise LabelSetError("alias config defines no labels")
    return LabelSet(tuple(labels), aliases)


def load_aliases(path: str | Path) -> LabelSet:
    return parse_aliases(Path(path).read_text(encoding="utf-8"))


def default_label_set() -> LabelSet:
    """Default 21-language label set shipped with the package."""
    text = resources.files("snipclass").joinpath("data/default_aliases.txt").read_text("utf-8")
    return parse_aliases(text)
