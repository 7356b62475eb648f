"""JSON run configuration: parsing, validation and hashing.

Unknown keys anywhere in the document are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .action_kernel import KernelSpec
from .assembly import EnvironmentSpec
from .config_space import REGISTERS, SystemParams
from .errors import ValidationError
from .evolution import InitialStateSpec, SitePacket

_SECTIONS = {
    "lattice": {"L"},
    "memory": {"N"},
    "kernel": {"kind", "alpha", "a0", "a1"},
    "environment": {"kind", "gamma", "delta"},
    "initial": {"particle", "robot"},
    "run": {"steps", "record", "chop"},
    "analyses": {"stats", "paths", "sweep", "fidelity"},
    "output": {"directory"},
}
_REQUIRED = ("lattice", "memory", "initial")


def _keys(where: str, obj, allowed: set) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where} must be an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(extra)}")
    return obj


def _complex(where: str, value) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ValidationError(f"{where} must be a number or [re, im]")


def _int(where: str, value, lo: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where} must be an integer")
    if lo is not None and value < lo:
        raise ValidationError(f"{where} must be >= {lo}")
    return value


def _packet(where: str, obj) -> SitePacket:
    obj = _keys(where, obj, {"sites", "amplitudes", "packet"})
    if len(obj) != 1:
        raise ValidationError(f"{where} needs exactly one of sites, amplitudes, packet")
    if "sites" in obj:
        return SitePacket.uniform([_int(f"{where}.sites[]", s, 0) for s in obj["sites"]])
    if "amplitudes" in obj:
        pairs = []
        for entry in obj["amplitudes"]:
            if not (isinstance(entry, list) and len(entry) == 3):
                raise ValidationError(f"{where}.amplitudes entries are [site, re, im]")
            pairs.append((_int(f"{where}.amplitudes site", entry[0], 0), complex(entry[1], entry[2])))
        return SitePacket(tuple(pairs))
    pk = _keys(f"{where}.packet", obj["packet"], {"center", "width"})
    if set(pk) != {"center", "width"}:
        raise ValidationError(f"{where}.packet needs center and width")
    return SitePacket.gaussian(float(pk["center"]), float(pk["width"]))


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    kernel: KernelSpec
    environment: EnvironmentSpec
    initial: InitialStateSpec
    steps: int = 0
    record: tuple[tuple[str, ...], ...] = ()
    chop: bool = False
    analyses: dict = field(default_factory=dict)
    output: str = "out"
    canonical: str = "{}"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical.encode()).hexdigest()

    def single_site(self, which: str) -> int:
        pk = getattr(self.initial, which)
        if pk.center is not None or len(pk.sites) != 1:
            raise ValidationError(f"{which} must start at a single site for this analysis")
        return pk.sites[0][0]


def parse_config(doc: dict) -> RunConfig:
    doc = _keys("config", doc, set(_SECTIONS))
    for name in _REQUIRED:
        if name not in doc:
            raise ValidationError(f"config is missing section {name!r}")
    sec = {k: _keys(k, doc.get(k, {}), _SECTIONS[k]) for k in _SECTIONS}

    params = SystemParams(_int("lattice.L", sec["lattice"].get("L"), 2), _int("memory.N", sec["memory"].get("N"), 1))

    k = sec["kernel"]
    kind = k.get("kind", "strict")
    if kind == "gaussian":
        kernel = KernelSpec(
            "gaussian",
            k.get("alpha"),
            _complex("kernel.a0", k.get("a0", 2**-0.5)),
            _complex("kernel.a1", k.get("a1", 2**-0.5)),
        )
    else:
        kernel = KernelSpec(kind, k.get("alpha"), _complex("kernel.a0", k.get("a0", 1.0)), _complex("kernel.a1", k.get("a1", 0.0)))

    e = sec["environment"]
    env = EnvironmentSpec(e.get("kind", "none"), float(e.get("gamma", 0.0)), float(e.get("delta", 1.0)))

    ini = sec["initial"]
    if set(ini) != {"particle", "robot"}:
        raise ValidationError("initial needs particle and robot")
    initial = InitialStateSpec(_packet("initial.particle", ini["particle"]), _packet("initial.robot", ini["robot"]))
    initial.particle.amplitudes(params.L)
    initial.robot.amplitudes(params.L)

    run = sec["run"]
    steps = _int("run.steps", run.get("steps", 0), 0)
    record = []
    for sel in run.get("record", []):
        names = (sel,) if isinstance(sel, str) else tuple(sel)
        if not names or any(n not in REGISTERS for n in names) or len(set(names)) != len(names):
            raise ValidationError(f"bad record selector {sel!r}")
        record.append(names)
    chop = run.get("chop", False)
    if not isinstance(chop, bool):
        raise ValidationError("run.chop must be true or false")

    analyses = dict(sec["analyses"])
    if "stats" in analyses:
        st = _keys("analyses.stats", analyses["stats"], {"ks", "variants"})
        for kk in st.get("ks", []):
            _int("analyses.stats.ks[]", kk, 0)
        for v in st.get("variants", []):
            if v not in ("literal", "valid"):
                raise ValidationError(f"unknown variant {v!r}")
    if "paths" in analyses:
        pa = _keys("analyses.paths", analyses["paths"], {"epsilon", "n"})
        if float(pa.get("epsilon", 0.0)) < 0:
            raise ValidationError("analyses.paths.epsilon must be >= 0")
        if "n" in pa:
            _int("analyses.paths.n", pa["n"], 0)
    if "sweep" in analyses:
        sw = _keys("analyses.sweep", analyses["sweep"], {"alphas", "ks", "distance"})
        for a in sw.get("alphas", []):
            if not float(a) > 0:
                raise ValidationError("analyses.sweep.alphas must be > 0")
        for kk in sw.get("ks", []):
            _int("analyses.sweep.ks[]", kk, 0)
    if "fidelity" in analyses and not isinstance(analyses["fidelity"], bool):
        raise ValidationError("analyses.fidelity must be true or false")

    out = sec["output"].get("directory", "out")
    physics = {k: doc[k] for k in sorted(doc) if k != "output"}
    return RunConfig(
        params, kernel, env, initial, steps, tuple(record), chop, analyses, out,
        json.dumps(physics, sort_keys=True, separators=(",", ":")),
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)


__all__ = ["RunConfig", "load_config", "parse_config"]
