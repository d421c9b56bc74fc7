"""Domain knowledge base: thematic classes, spatial relations, valid configurations.

The knowledge base is loaded once from a line-oriented text file and is
immutable afterwards, so it can be shared freely between workers.  File
grammar (``#`` starts a comment, blank lines are ignored, names are
whitespace-free tokens)::

    [classes]          <name> <prototype_mean> <prototype_std>
    [neighbors]        <nameA> <nameB>          one unordered pair per line
    [inclusions]       <inner> <outer>
    [configurations]   <subject> : <ctx1> <ctx2> ...

Class order in ``[classes]`` defines the index order ``0..K-1`` used by
membership vectors throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ParseError, UnknownClassError, ValidationError

MATCH_POLICIES = ("exact", "subset")


@dataclass(frozen=True)
class ThematicClass:
    """One semantic region class with its gray-level prototype (0..255 units)."""

    id: int
    name: str
    prototype_mean: float
    prototype_std: float


@dataclass(frozen=True)
class SpatialRelations:
    """Neighborship (unordered pairs) and inclusion (inner, outer) relations."""

    neighbor_pairs: frozenset[frozenset[str]] = frozenset()
    inclusion_pairs: frozenset[tuple[str, str]] = frozenset()


@dataclass(frozen=True)
class ValidConfiguration:
    """An allowed spatial arrangement: a subject class and its local context."""

    subject: str
    context: frozenset[str]


@dataclass(frozen=True)
class KnowledgeBase:
    classes: tuple[ThematicClass, ...]
    relations: SpatialRelations = SpatialRelations()
    configurations: tuple[ValidConfiguration, ...] = ()
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c.name: c.id for c in self.classes})

    @property
    def k(self) -> int:
        return len(self.classes)

    def class_id(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownClassError(f"unknown class {name!r}") from None

    def class_name(self, class_id: int) -> str:
        return self.classes[class_id].name

    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)


def _validate(classes, neighbor_pairs, inclusion_pairs, configurations) -> KnowledgeBase:
    names = [c.name for c in classes]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate class names")
    if len(classes) < 2:
        raise ValidationError(f"need at least 2 classes, got {len(classes)}")
    declared = set(names)
    for c in classes:
        if not 0.0 <= c.prototype_mean <= 255.0:
            raise ValidationError(f"{c.name}: prototype mean {c.prototype_mean} outside [0, 255]")
        if c.prototype_std <= 0.0:
            raise ValidationError(f"{c.name}: prototype std must be > 0")
    for pair in neighbor_pairs:
        if len(pair) != 2:
            raise ValidationError(f"degenerate neighbor pair {set(pair)}")
        for n in pair:
            if n not in declared:
                raise UnknownClassError(f"neighbor pair references unknown class {n!r}")
    for inner, outer in inclusion_pairs:
        if inner == outer:
            raise ValidationError(f"class {inner!r} cannot include itself")
        for n in (inner, outer):
            if n not in declared:
                raise UnknownClassError(f"inclusion references unknown class {n!r}")
    related = set(neighbor_pairs) | {frozenset(p) for p in inclusion_pairs}
    for cfg in configurations:
        if cfg.subject not in declared:
            raise UnknownClassError(f"configuration subject {cfg.subject!r} not declared")
        if not cfg.context:
            raise ValidationError(f"configuration for {cfg.subject!r} has an empty context")
        if cfg.subject in cfg.context:
            raise ValidationError(f"configuration for {cfg.subject!r} lists itself as context")
        for ctx in cfg.context:
            if ctx not in declared:
                raise UnknownClassError(f"configuration context references unknown class {ctx!r}")
            if frozenset((cfg.subject, ctx)) not in related:
                raise ValidationError(
                    f"configuration pair ({cfg.subject}, {ctx}) has no declared spatial relation"
                )
    return KnowledgeBase(
        classes=tuple(classes),
        relations=SpatialRelations(frozenset(neighbor_pairs), frozenset(inclusion_pairs)),
        configurations=tuple(configurations),
    )


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def load_kb(path: str | Path) -> KnowledgeBase:
    """Parse and validate a knowledge-base file.

    Raises ParseError on malformed lines/sections and ValidationError (or
    UnknownClassError) when the content breaks a structural invariant.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_kb(text)


def parse_kb(text: str) -> KnowledgeBase:
    classes: list[ThematicClass] = []
    neighbor_pairs: list[frozenset[str]] = []
    inclusion_pairs: list[tuple[str, str]] = []
    configurations: list[ValidConfiguration] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"line {lineno}: unterminated section header {line!r}")
            section = line[1:-1].strip().lower()
            if section not in ("classes", "neighbors", "inclusions", "configurations"):
                raise ParseError(f"line {lineno}: unknown section {section!r}")
            continue
        if section is None:
            raise ParseError(f"line {lineno}: content before any section header")
        if section == "classes":
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"line {lineno}: expected '<name> <mean> <std>'")
            try:
                mean, std = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric prototype in {line!r}") from None
            classes.append(ThematicClass(len(classes), parts[0], mean, std))
        elif section == "neighbors":
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected '<nameA> <nameB>'")
            neighbor_pairs.append(frozenset(parts))
        elif section == "inclusions":
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected '<inner> <outer>'")
            inclusion_pairs.append((parts[0], parts[1]))
        else:
            if ":" not in line:
                raise ParseError(f"line {lineno}: expected '<subject> : <ctx...>'")
            head, _, tail = line.partition(":")
            subject = head.strip()
            ctx = tail.split()
            if not subject or len(subject.split()) != 1:
                raise ParseError(f"line {lineno}: bad configuration subject in {line!r}")
            configurations.append(ValidConfiguration(subject, frozenset(ctx)))
    return _validate(classes, neighbor_pairs, inclusion_pairs, configurations)


def write_kb(kb: KnowledgeBase, path: str | Path) -> None:
    """Serialize a knowledge base so that load_kb round-trips it exactly."""
    lines = ["[classes]"]
    for c in kb.classes:
        lines.append(f"{c.name} {c.prototype_mean!r} {c.prototype_std!r}")
    lines.append("")
    lines.append("[neighbors]")
    for pair in sorted(kb.relations.neighbor_pairs, key=sorted):
        lines.append(" ".join(sorted(pair)))
    lines.append("")
    lines.append("[inclusions]")
    for inner, outer in sorted(kb.relations.inclusion_pairs):
        lines.append(f"{inner} {outer}")
    lines.append("")
    lines.append("[configurations]")
    for cfg in kb.configurations:
        lines.append(f"{cfg.subject} : " + " ".join(sorted(cfg.context)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def classes_neighboring(kb: KnowledgeBase, name: str) -> set[str]:
    """All classes that may share a boundary with `name`."""
    kb.class_id(name)
    out = set()
    for pair in kb.relations.neighbor_pairs:
        if name in pair:
            out.update(pair - {name})
    return out


def classes_included_in(kb: KnowledgeBase, name: str) -> set[str]:
    """All classes that may appear nested inside `name`."""
    kb.class_id(name)
    return {inner for inner, outer in kb.relations.inclusion_pairs if outer == name}


def configuration_subjects(
    kb: KnowledgeBase, context: set[str] | frozenset[str], policy: str = "exact"
) -> set[str]:
    """Classes whose declared valid configuration matches the observed context.

    policy="exact" keeps subjects whose configured context equals the observed
    class set; policy="subset" also keeps those whose configured context is a
    superset (the observed context may be partial).
    """
    if policy not in MATCH_POLICIES:
        raise ValueError(f"policy must be one of {MATCH_POLICIES}, got {policy!r}")
    observed = frozenset(context)
    if not observed:
        raise ValidationError("observed context must be non-empty")
    for name in observed:
        kb.class_id(name)
    out = set()
    for cfg in kb.configurations:
        if observed == cfg.context or (policy == "subset" and observed < cfg.context):
            out.add(cfg.subject)
    return out


def mammogram_kb_path() -> Path:
    """Path of the mammogram knowledge base shipped with the package."""
    return Path(resources.files("ctxseg").joinpath("data/mammogram.kb"))


def load_mammogram_kb() -> KnowledgeBase:
    return load_kb(mammogram_kb_path())
