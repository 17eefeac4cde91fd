"""Declarative column schemas.

A schema file is INI-style text with a ``[columns]`` section holding one
``name = kind [| policy]`` line per column (see ``assets/ames.schema`` for the
full grammar).
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

KINDS = ("numeric", "categorical", "ordinal", "identifier", "target")
POLICIES = ("drop_row", "impute_median", "impute_mode", "sentinel_category")
SENTINEL = "None"

_DEFAULT_POLICY = {
    "numeric": "impute_median",
    "categorical": "sentinel_category",
    "ordinal": "sentinel_category",
    "identifier": "drop_row",
    "target": "drop_row",
}


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    missing_policy: str = ""
    order: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if not self.missing_policy:
            object.__setattr__(self, "missing_policy", _DEFAULT_POLICY[self.kind])
        if self.missing_policy not in POLICIES:
            raise SchemaError(f"column {self.name!r}: unknown policy {self.missing_policy!r}")
        if self.kind == "ordinal":
            if len(self.order) < 1 or len(set(self.order)) != len(self.order):
                raise SchemaError(f"column {self.name!r}: ordinal needs distinct labels")
            if self.missing_policy == "sentinel_category" and SENTINEL not in self.order:
                raise SchemaError(
                    f"column {self.name!r}: sentinel policy requires {SENTINEL!r} in the order"
                )
        elif self.order:
            raise SchemaError(f"column {self.name!r}: only ordinal columns carry an order")
        if self.kind in ("numeric", "identifier", "target") and self.missing_policy in (
            "sentinel_category",
        ):
            raise SchemaError(f"column {self.name!r}: sentinel policy needs a label column")

    @property
    def is_numeric(self):
        return self.kind in ("numeric", "target")

    def to_line(self):
        kind = self.kind
        if self.order:
            kind += " " + " < ".join(self.order)
        if self.missing_policy != _DEFAULT_POLICY[self.kind]:
            kind += " | " + self.missing_policy
        return f"{self.name} = {kind}"


def check_schema(specs):
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    targets = [s for s in specs if s.kind == "target"]
    if len(targets) != 1:
        raise SchemaError(f"schema needs exactly one target column, found {len(targets)}")
    return list(specs)


def parse_column(name, text):
    body, _, policy = text.partition("|")
    body, policy = body.strip(), policy.strip()
    kind, _, rest = body.partition(" ")
    order = ()
    if kind == "ordinal":
        order = tuple(p.strip() for p in rest.split("<") if p.strip())
    elif rest.strip():
        raise SchemaError(f"column {name!r}: unexpected text {rest.strip()!r}")
    return ColumnSpec(name, kind, policy, order)


def parse_schema(text):
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    cp.optionxform = str
    cp.read_string(text)
    if not cp.has_section("columns"):
        raise SchemaError("schema has no [columns] section")
    fmt = cp.get("schema", "format", fallback="1")
    if fmt != "1":
        raise SchemaError(f"unsupported schema format {fmt!r}")
    return check_schema([parse_column(k, v) for k, v in cp.items("columns")])


def load_schema(path=None):
    """Read a schema file; ``None`` loads the bundled 82-column Ames schema."""
    if path is None:
        text = resources.files("amesbench.assets").joinpath("ames.schema").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_schema(text)


def dump_schema(specs):
    lines = ["[schema]", "format = 1", "", "[columns]"]
    lines += [s.to_line() for s in specs]
    return "\n".join(lines) + "\n"


def schema_digest(specs):
    return hashlib.sha256(dump_schema(specs).encode("utf-8")).hexdigest()


def target_spec(specs):
    return next(s for s in specs if s.kind == "target")
