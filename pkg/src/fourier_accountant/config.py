"""Composition-plan config files: YAML in, validated :class:`PlanConfig` out.

The grammar is the JSON schema in ``data/plan.schema.json``; see
``docs/format.md`` for a worked example.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .errors import AccountantError, ConfigError
from .mechanisms import MechanismSpec


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-6`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _schema() -> dict:
    text = resources.files("fourier_accountant").joinpath("data/plan.schema.json").read_text()
    return json.loads(text)


@dataclass
class PlanConfig:
    mechanisms: list  # [(MechanismSpec, count)]
    L: float | None = None
    n: int | None = None
    eta: float | None = None
    queries: list = field(default_factory=list)  # [("delta_at" | "epsilon_at", [values])]
    k_list: list | None = None
    rdp: bool = False
    gdp: bool = False
    rdp_orders: list | None = None
    lambdas: list | None = None
    sides: list = field(default_factory=lambda: ["right", "left"])
    tilt: float = 0.0

    @property
    def auto_grid(self) -> bool:
        return self.eta is not None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "mechanisms": [{"spec": spec.to_dict(), "count": count} for spec, count in self.mechanisms],
            "grid": {"auto": {"eta": self.eta}} if self.auto_grid else {"L": self.L, "n": self.n},
            "queries": [{kind: list(vals)} for kind, vals in self.queries],
        }
        if self.k_list is not None:
            out["sweep"] = {"k_list": list(self.k_list)}
        comps = {}
        if self.rdp:
            comps["rdp"] = True
        if self.gdp:
            comps["gdp"] = True
        if self.rdp_orders is not None:
            comps["rdp_orders"] = list(self.rdp_orders)
        if comps:
            out["comparators"] = comps
        if self.lambdas is not None:
            out["lambdas"] = list(self.lambdas)
        if self.sides != ["right", "left"]:
            out["sides"] = list(self.sides)
        if self.tilt:
            out["tilt"] = self.tilt
        return out

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _spec_from(entry) -> MechanismSpec:
    raw = entry["spec"]
    try:
        if isinstance(raw, str):
            return MechanismSpec.parse(raw)
        return MechanismSpec.from_dict(raw)
    except AccountantError as exc:
        raise ConfigError(f"mechanism {raw!r}: {exc}", "CONFIG_MECHANISM") from None


def parse_config(data: Any) -> PlanConfig:
    """Validate an already-parsed document and build the plan."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level", "CONFIG_PARSE")
    if not data.get("mechanisms"):
        raise ConfigError("config lists no mechanisms", "CONFIG_EMPTY")
    if not data.get("queries"):
        raise ConfigError("config has no queries", "CONFIG_NO_QUERY")
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}", "CONFIG_SCHEMA") from None
    mechs = [(_spec_from(e), int(e.get("count", 1))) for e in data["mechanisms"]]
    grid = data["grid"]
    comps = data.get("comparators", {})
    queries = []
    for q in data["queries"]:
        (kind, vals), = q.items()
        queries.append((kind, [float(v) for v in vals]))
    return PlanConfig(
        mechanisms=mechs,
        L=float(grid["L"]) if "L" in grid else None,
        n=int(grid["n"]) if "n" in grid else None,
        eta=float(grid["auto"]["eta"]) if "auto" in grid else None,
        queries=queries,
        k_list=[int(k) for k in data["sweep"]["k_list"]] if "sweep" in data else None,
        rdp=bool(comps.get("rdp", False)),
        gdp=bool(comps.get("gdp", False)),
        rdp_orders=[float(a) for a in comps["rdp_orders"]] if "rdp_orders" in comps else None,
        lambdas=[float(v) for v in data["lambdas"]] if "lambdas" in data else None,
        sides=list(data.get("sides", ["right", "left"])),
        tilt=float(data.get("tilt", 0.0)),
    )


def loads(text: str) -> PlanConfig:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {' '.join(str(exc).split())}", "CONFIG_PARSE") from None
    if data is None:
        raise ConfigError("config file is empty", "CONFIG_EMPTY")
    return parse_config(data)


def load(path: str | Path) -> PlanConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "CONFIG_IO") from None
    return loads(text)
