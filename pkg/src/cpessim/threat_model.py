"""Adversary and attack taxonomy for CPES security studies.

Every taxonomy attribute is held as a non-empty set of enum members so that
disjunctive characterizations ("Class I or II", "L1 or L2") are first-class
rather than being normalized away.  Four built-in presets describe the attack
case studies shipped with the scenario presets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

SCHEMA_VERSION = 1


class Knowledge(Enum):
    STRONG = "strong"
    LIMITED = "limited"
    OBLIVIOUS = "oblivious"


class Access(Enum):
    POSSESSION = "possession"
    NON_POSSESSION = "non_possession"


class Specificity(Enum):
    TARGETED = "targeted"
    NON_TARGETED = "non_targeted"


class Resources(Enum):
    CLASS_I = "class_i"
    CLASS_II = "class_ii"


class Frequency(Enum):
    ITERATIVE = "iterative"
    NON_ITERATIVE = "non_iterative"


class Reproducibility(Enum):
    ONE_TIME = "one_time"
    MULTIPLE_TIMES = "multiple_times"


class FunctionalLevel(Enum):
    L0 = "l0"
    L1 = "l1"
    L2 = "l2"


class Asset(Enum):
    FIELD_CONTROLLER = "field_controller"
    CONTROL_SERVER = "control_server"
    SAFETY_INSTRUMENTED_SYSTEM = "safety_instrumented_system"
    ENGINEERING_WORKSTATION = "engineering_workstation"
    DATA_HISTORIAN = "data_historian"
    HMI = "hmi"
    IO_SERVER = "io_server"


class Technique(Enum):
    MODIFY_CONTROL_LOGIC = "modify_control_logic"
    WIRELESS_COMPROMISE = "wireless_compromise"
    ENGINEERING_WORKSTATION_COMPROMISE = "engineering_workstation_compromise"
    DOS = "dos"
    MITM = "mitm"
    SPOOF_REPORTING = "spoof_reporting"
    MODULE_FIRMWARE = "module_firmware"
    ROOTKIT = "rootkit"


class Premise(Enum):
    """Domain premise of the compromise: cyber sub-targets or physical access class."""

    CYBER_COMMUNICATIONS_PROTOCOLS = "cyber_communications_protocols"
    CYBER_ASSET_CONTROL_COMMANDS = "cyber_asset_control_commands"
    CYBER_DATA_STORAGE = "cyber_data_storage"
    PHYSICAL_INVASIVE = "physical_invasive"
    PHYSICAL_NON_INVASIVE = "physical_non_invasive"
    PHYSICAL_SEMI_INVASIVE = "physical_semi_invasive"

    @property
    def is_physical(self) -> bool:
        return self.value.startswith("physical_")


@dataclass(frozen=True)
class AdversaryModel:
    """Who attacks: knowledge, access, specificity, and resource class."""

    knowledge: frozenset[Knowledge]
    access: frozenset[Access]
    specificity: frozenset[Specificity]
    resources: frozenset[Resources]

    def __post_init__(self):
        for name in ("knowledge", "access", "specificity", "resources"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))


@dataclass(frozen=True)
class AttackModel:
    """How the attack works: frequency, reproducibility, level, asset, technique, premise."""

    frequency: frozenset[Frequency]
    reproducibility: frozenset[Reproducibility]
    functional_level: frozenset[FunctionalLevel]
    asset: frozenset[Asset]
    technique: frozenset[Technique]
    premise: frozenset[Premise]

    def __post_init__(self):
        for name in _ATTACK_FIELDS:
            object.__setattr__(self, name, frozenset(getattr(self, name)))


@dataclass(frozen=True)
class ThreatModel:
    name: str
    adversary: AdversaryModel
    attack: AttackModel
    notes: str = ""


_ADVERSARY_FIELDS = {
    "knowledge": Knowledge,
    "access": Access,
    "specificity": Specificity,
    "resources": Resources,
}
_ATTACK_FIELDS = {
    "frequency": Frequency,
    "reproducibility": Reproducibility,
    "functional_level": FunctionalLevel,
    "asset": Asset,
    "technique": Technique,
    "premise": Premise,
}


def validate(tm: ThreatModel) -> list[str]:
    """Check a threat model; returns a list of violations (empty when ok).

    Rules: every attribute set is non-empty, all members belong to the right
    enum, and an invasive or semi-invasive physical premise requires the
    adversary to hold possession-level access.
    """
    violations = []
    for fname, enum_cls in _ADVERSARY_FIELDS.items():
        violations += _check_set(f"adversary.{fname}", getattr(tm.adversary, fname), enum_cls)
    for fname, enum_cls in _ATTACK_FIELDS.items():
        violations += _check_set(f"attack.{fname}", getattr(tm.attack, fname), enum_cls)

    intrusive = {Premise.PHYSICAL_INVASIVE, Premise.PHYSICAL_SEMI_INVASIVE}
    if intrusive & set(tm.attack.premise) and Access.POSSESSION not in tm.adversary.access:
        violations.append("invasive requires possession: attack.premise includes an "
                          "invasive/semi-invasive physical premise but adversary.access "
                          "does not include possession")
    return violations


def _check_set(label: str, values, enum_cls) -> list[str]:
    if not values:
        return [f"empty attribute set: {label}"]
    bad = [v for v in values if not isinstance(v, enum_cls)]
    if bad:
        return [f"invalid member in {label}: {bad!r}"]
    return []


PRESET_NAMES = ("cross_layer_firmware", "load_changing", "time_delay", "td_propagation")


def preset(name: str) -> ThreatModel:
    """Return one of the four built-in case-study threat models."""
    try:
        builder = _PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown threat preset {name!r}; expected one of {PRESET_NAMES}")
    return builder()


def _cross_layer_firmware() -> ThreatModel:
    return ThreatModel(
        name="cross_layer_firmware",
        adversary=AdversaryModel(
            knowledge={Knowledge.OBLIVIOUS},
            access={Access.POSSESSION},
            specificity={Specificity.NON_TARGETED},
            resources={Resources.CLASS_I, Resources.CLASS_II},
        ),
        attack=AttackModel(
            frequency={Frequency.ITERATIVE},
            reproducibility={Reproducibility.MULTIPLE_TIMES},
            functional_level={FunctionalLevel.L1},
            asset={Asset.FIELD_CONTROLLER},
            technique={Technique.MODIFY_CONTROL_LOGIC},
            premise={Premise.PHYSICAL_INVASIVE, Premise.PHYSICAL_NON_INVASIVE,
                     Premise.CYBER_ASSET_CONTROL_COMMANDS},
        ),
        notes="Firmware tampering on an inverter controller; impact propagates "
              "from the device layer to microgrid operation.",
    )


def _load_changing() -> ThreatModel:
    return ThreatModel(
        name="load_changing",
        adversary=AdversaryModel(
            knowledge={Knowledge.LIMITED, Knowledge.OBLIVIOUS},
            access={Access.NON_POSSESSION},
            specificity={Specificity.TARGETED},
            resources={Resources.CLASS_II},
        ),
        attack=AttackModel(
            frequency={Frequency.ITERATIVE},
            reproducibility={Reproducibility.MULTIPLE_TIMES},
            functional_level={FunctionalLevel.L1, FunctionalLevel.L2},
            asset={Asset.FIELD_CONTROLLER, Asset.HMI},
            technique={Technique.MODIFY_CONTROL_LOGIC, Technique.WIRELESS_COMPROMISE},
            premise={Premise.CYBER_COMMUNICATIONS_PROTOCOLS,
                     Premise.CYBER_ASSET_CONTROL_COMMANDS},
        ),
        notes="Coordinated demand manipulation of IoT-controllable high-wattage loads.",
    )


def _time_delay() -> ThreatModel:
    return ThreatModel(
        name="time_delay",
        adversary=AdversaryModel(
            knowledge={Knowledge.OBLIVIOUS},
            access={Access.NON_POSSESSION},
            specificity={Specificity.TARGETED},
            resources={Resources.CLASS_I, Resources.CLASS_II},
        ),
        attack=AttackModel(
            frequency={Frequency.ITERATIVE},
            reproducibility={Reproducibility.MULTIPLE_TIMES},
            functional_level={FunctionalLevel.L1},
            asset={Asset.CONTROL_SERVER},
            technique={Technique.WIRELESS_COMPROMISE, Technique.MITM,
                       Technique.SPOOF_REPORTING, Technique.DOS},
            premise={Premise.CYBER_COMMUNICATIONS_PROTOCOLS},
        ),
        notes="Delays measurements or control commands in transit; availability attack.",
    )


def _td_propagation() -> ThreatModel:
    return ThreatModel(
        name="td_propagation",
        adversary=AdversaryModel(
            knowledge={Knowledge.STRONG},
            access={Access.POSSESSION},
            specificity={Specificity.TARGETED},
            resources={Resources.CLASS_II},
        ),
        attack=AttackModel(
            frequency={Frequency.NON_ITERATIVE},
            reproducibility={Reproducibility.ONE_TIME},
            functional_level={FunctionalLevel.L2},
            asset={Asset.ENGINEERING_WORKSTATION},
            technique={Technique.ENGINEERING_WORKSTATION_COMPROMISE},
            premise={Premise.CYBER_ASSET_CONTROL_COMMANDS},
        ),
        notes="Breaker control compromise propagating between transmission and "
              "distribution sections.",
    )


_PRESETS = {
    "cross_layer_firmware": _cross_layer_firmware,
    "load_changing": _load_changing,
    "time_delay": _time_delay,
    "td_propagation": _td_propagation,
}


class ThreatModelParseError(ValueError):
    """Raised when a threat model document is malformed; carries the field path."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


def to_dict(tm: ThreatModel) -> dict:
    """JSON-ready dict; enum sets become sorted lists of lower_snake_case values."""
    return {
        "schema_version": SCHEMA_VERSION,
        "name": tm.name,
        "adversary": {f: sorted(m.value for m in getattr(tm.adversary, f))
                      for f in _ADVERSARY_FIELDS},
        "attack": {f: sorted(m.value for m in getattr(tm.attack, f))
                   for f in _ATTACK_FIELDS},
        "notes": tm.notes,
    }


def serialize(tm: ThreatModel) -> str:
    return json.dumps(to_dict(tm), indent=2)


def from_dict(doc: dict) -> ThreatModel:
    if not isinstance(doc, dict):
        raise ThreatModelParseError("$", "expected a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ThreatModelParseError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ThreatModelParseError("name", "missing or not a non-empty string")

    adversary = AdversaryModel(**_parse_section(doc, "adversary", _ADVERSARY_FIELDS))
    attack = AttackModel(**_parse_section(doc, "attack", _ATTACK_FIELDS))
    notes = doc.get("notes", "")
    if not isinstance(notes, str):
        raise ThreatModelParseError("notes", "must be a string")
    return ThreatModel(name=name, adversary=adversary, attack=attack, notes=notes)


def _parse_section(doc: dict, section: str, fields: dict) -> dict:
    raw = doc.get(section)
    if not isinstance(raw, dict):
        raise ThreatModelParseError(section, "missing or not an object")
    out = {}
    for fname, enum_cls in fields.items():
        if fname not in raw:
            raise ThreatModelParseError(f"{section}.{fname}", "missing field")
        out[fname] = frozenset(_parse_members(f"{section}.{fname}", raw[fname], enum_cls))
    unknown = set(raw) - set(fields)
    if unknown:
        raise ThreatModelParseError(f"{section}.{sorted(unknown)[0]}", "unknown field")
    return out


def _parse_members(location: str, values, enum_cls) -> Iterable:
    if not isinstance(values, list) or not values:
        raise ThreatModelParseError(location, "must be a non-empty list")
    members = []
    for v in values:
        try:
            members.append(enum_cls(v))
        except ValueError:
            allowed = sorted(m.value for m in enum_cls)
            raise ThreatModelParseError(location, f"unknown value {v!r}; allowed: {allowed}")
    return members


def deserialize(text: str) -> ThreatModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ThreatModelParseError("$", f"invalid JSON: {exc}") from exc
    return from_dict(doc)
