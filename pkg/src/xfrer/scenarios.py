"""Scenario files: schema, strict loading, serialisation and built-in scenarios."""

from __future__ import annotations

import dataclasses
import json
import os
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any

from .errors import ParseError, UnknownBuiltin, ValidationError
from .fiveg import Embodiment, FiveGSegment, Variant
from .frer import RecoveryAlgorithm
from .graph import Category
from .sim import MAX_SEED, RecoveryConfig, ScenarioConfig
from .topology import Enhancements, FailureProbs, Stream, Topology, TsnLink, TsnNode

SCHEMA_VERSION = "1"
SCENARIO_DIR_ENV = "XFRER_SCENARIO_DIR"

HOP_LABELS = {
    Stream.STREAM1: (
        "ES1 to TSN bridges A and B",
        "TSN bridges A and B to the UE in 5G system",
        "UE to RAN/gNB",
        "RAN/gNB to UPF",
        "UPF to TSN bridge C",
        "TSN bridge C to TSN bridges D and E",
        "TSN bridges D and E to ES 2",
    ),
    Stream.STREAM2: (
        "ES2 to TSN bridges D and E",
        "TSN bridges D and E to TSN bridge C",
        "TSN bridge C to UPF in 5G system",
        "UPF to RAN/gNB",
        "RAN/gNB to UE",
        "UE to TSN bridges A and B",
        "TSN bridges A and B to ES 1",
    ),
}


def hop_labels(stream: Stream | str) -> tuple[str, ...]:
    return HOP_LABELS[Stream(stream)]


# -- built-ins ---------------------------------------------------------------

PAPER_PROBS = {
    "tsn_bridge_node": "1e-5",
    "ue_node": "1e-4",
    "gnb_node": "1e-4",
    "upf_node": "1e-4",
    "tsn_link": "1e-4",
    "air_link": "1e-2",
    "n3_link": "1e-3",
}
PAPER_FRAMES = 1_000_000

_TSN_NODES = [
    ("ES1", "end_station"),
    ("A", "tsn_bridge"),
    ("B", "tsn_bridge"),
    ("C", "tsn_bridge"),
    ("D", "tsn_bridge"),
    ("E", "tsn_bridge"),
    ("ES2", "end_station"),
]


def _paper_file(scenario_id: str, variant: str, stream: str, enhancements: bool = False) -> dict[str, Any]:
    ues, gnbs, upfs = ["UE"], ["gNB"], ["UPF"]
    if variant == Variant.MULTI_PDU_MULTI_UE.value:
        ues, upfs = ["UE1", "UE2"], ["UPF1", "UPF2"]
    if variant in (Variant.SINGLE_PDU_N3.value, Variant.SINGLE_PDU_PDCP.value):
        gnbs = ["MgNB", "SgNB"]
    # bridges A and B each home onto one UE when two are available
    west = [("A", ues[0]), ("B", ues[-1])]
    east = [(u, "C") for u in upfs]
    links = [("ES1", "A"), ("ES1", "B"), *west, *east, ("C", "D"), ("C", "E"), ("D", "ES2"), ("E", "ES2")]
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario_id": scenario_id,
        "topology": {
            "nodes": [{"id": i, "kind": k} for i, k in _TSN_NODES],
            "links": [{"id": f"{a}-{b}", "a": a, "b": b} for a, b in links],
            "talker": "ES1",
            "listener": "ES2",
        },
        "fiveg": {"embodiment": variant, "segment_id": "5gs", "ues": ues, "gnbs": gnbs, "upfs": upfs},
        "stream": stream,
        "failure_probs": dict(PAPER_PROBS),
        "enhancements": enhancements,
        "recovery": {"algorithm": "vector", "history_window": 32},
        "run": {"frame_count": PAPER_FRAMES, "seed": 1},
    }


BUILTINS: dict[str, dict[str, Any]] = {
    "paper-stream1-vanilla": _paper_file("paper-stream1-vanilla", "NoRedundancy", "Stream1"),
    "paper-stream1-2pdu-2ue": _paper_file("paper-stream1-2pdu-2ue", "MultiPduMultiUe", "Stream1"),
    "paper-stream1-2pdu-1ue": _paper_file("paper-stream1-2pdu-1ue", "MultiPduSingleUe", "Stream1"),
    "paper-stream1-1pdu-n3": _paper_file("paper-stream1-1pdu-n3", "SinglePduN3", "Stream1"),
    "paper-stream1-1pdu-sdap": _paper_file("paper-stream1-1pdu-sdap", "SinglePduSdap", "Stream1"),
    "paper-stream1-1pdu-pdcp": _paper_file("paper-stream1-1pdu-pdcp", "SinglePduPdcp", "Stream1"),
    "paper-stream2-vanilla": _paper_file("paper-stream2-vanilla", "NoRedundancy", "Stream2"),
    "paper-stream2-enhanced": _paper_file("paper-stream2-enhanced", "NoRedundancy", "Stream2", enhancements=True),
}


# -- validation --------------------------------------------------------------

_TOP_FIELDS = {"schema_version", "scenario_id", "topology", "fiveg", "stream", "failure_probs",
               "enhancements", "recovery", "run"}
_REQUIRED = {"schema_version", "scenario_id", "topology", "fiveg", "stream"}
_PROB_FIELDS = {f.name for f in dataclasses.fields(FailureProbs)}


class _Checker:
    def __init__(self) -> None:
        self.problems: list[str] = []

    def fail(self, where: str, msg: str) -> None:
        self.problems.append(f"{where}: {msg}")

    def obj(self, value: Any, where: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
        if not isinstance(value, dict):
            self.fail(where, "expected an object")
            return {}
        for extra in sorted(set(value) - allowed):
            self.fail(f"{where}.{extra}", "unknown field")
        for missing in sorted(required - set(value)):
            self.fail(f"{where}.{missing}", "required field missing")
        return value

    def string(self, value: Any, where: str) -> str | None:
        if not isinstance(value, str) or not value:
            self.fail(where, "expected a non-empty string")
            return None
        return value

    def strings(self, value: Any, where: str) -> list[str]:
        if not isinstance(value, list):
            self.fail(where, "expected a list of strings")
            return []
        return [s for i, s in enumerate(value) if self.string(s, f"{where}[{i}]") is not None]

    def prob(self, value: Any, where: str) -> float | None:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            self.fail(where, "expected a decimal probability")
            return None
        try:
            d = Decimal(str(value))
        except InvalidOperation:
            self.fail(where, f"{value!r} is not a decimal")
            return None
        if not d.is_finite() or not Decimal(0) <= d <= Decimal(1):
            self.fail(where, f"{value} outside [0, 1]")
            return None
        return float(d)

    def integer(self, value: Any, where: str, lo: int, hi: int | None = None) -> int | None:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(where, "expected an integer")
            return None
        if value < lo or (hi is not None and value > hi):
            self.fail(where, f"{value} outside {lo}..{hi if hi is not None else 'inf'}")
            return None
        return value


def config_from_dict(data: Any) -> ScenarioConfig:
    """Validate a parsed scenario document; every violation is reported at once."""
    c = _Checker()
    doc = c.obj(data, "$", _TOP_FIELDS, _REQUIRED)
    if doc.get("schema_version") not in (None, SCHEMA_VERSION):
        c.fail("$.schema_version", f"unsupported version {doc.get('schema_version')!r}")
    scenario_id = c.string(doc.get("scenario_id"), "$.scenario_id") if "scenario_id" in doc else None

    topo = c.obj(doc.get("topology", {}), "$.topology", {"nodes", "links", "talker", "listener"},
                 {"nodes", "links", "talker", "listener"} if "topology" in doc else set())
    nodes = []
    for i, n in enumerate(topo.get("nodes", []) if isinstance(topo.get("nodes", []), list) else []):
        n = c.obj(n, f"$.topology.nodes[{i}]", {"id", "kind"}, {"id"})
        node_id = c.string(n.get("id"), f"$.topology.nodes[{i}].id") if n else None
        kind = n.get("kind", "tsn_bridge")
        if kind not in ("tsn_bridge", "end_station"):
            c.fail(f"$.topology.nodes[{i}].kind", f"{kind!r} is not tsn_bridge or end_station")
        elif node_id:
            nodes.append(TsnNode(node_id, Category(kind)))
    links = []
    for i, l in enumerate(topo.get("links", []) if isinstance(topo.get("links", []), list) else []):
        where = f"$.topology.links[{i}]"
        l = c.obj(l, where, {"id", "a", "b", "failure_prob"}, {"a", "b"})
        if not l:
            continue
        a, b = c.string(l.get("a"), f"{where}.a"), c.string(l.get("b"), f"{where}.b")
        link_id = c.string(l.get("id"), f"{where}.id") if "id" in l else f"{a}-{b}"
        fp = c.prob(l["failure_prob"], f"{where}.failure_prob") if "failure_prob" in l else None
        if a and b and link_id:
            links.append(TsnLink(link_id, a, b, fp))
    talker = c.string(topo.get("talker"), "$.topology.talker") if "talker" in topo else None
    listener = c.string(topo.get("listener"), "$.topology.listener") if "listener" in topo else None

    fg = c.obj(doc.get("fiveg", {}), "$.fiveg",
               {"embodiment", "segment_id", "ues", "gnbs", "upfs", "link_probs", "node_probs"},
               {"embodiment", "ues", "gnbs", "upfs"} if "fiveg" in doc else set())
    embodiment = None
    if "embodiment" in fg:
        try:
            embodiment = Embodiment.parse(fg["embodiment"])
        except (ValueError, TypeError, IndexError) as exc:
            c.fail("$.fiveg.embodiment", str(exc))
    link_probs = {}
    for key, v in c.obj(fg.get("link_probs", {}), "$.fiveg.link_probs", {"air", "n3", "xn"}).items():
        p = c.prob(v, f"$.fiveg.link_probs.{key}")
        if p is not None:
            link_probs[key] = p
    node_probs = {}
    for key, v in c.obj(fg.get("node_probs", {}), "$.fiveg.node_probs", {"ue", "gnb", "upf"}).items():
        p = c.prob(v, f"$.fiveg.node_probs.{key}")
        if p is not None:
            node_probs[key] = p
    segment = None
    try:
        segment = FiveGSegment(
            ues=tuple(c.strings(fg.get("ues", []), "$.fiveg.ues")),
            gnbs=tuple(c.strings(fg.get("gnbs", []), "$.fiveg.gnbs")),
            upfs=tuple(c.strings(fg.get("upfs", []), "$.fiveg.upfs")),
            segment_id=fg.get("segment_id", "5gs"),
            link_probs=link_probs,
            node_probs=node_probs,
        )
    except ValueError as exc:
        c.fail("$.fiveg", str(exc))

    stream = None
    if "stream" in doc:
        try:
            stream = Stream(doc["stream"])
        except ValueError:
            c.fail("$.stream", f"{doc['stream']!r} is not Stream1 or Stream2")

    prob_kwargs = {}
    for key, v in c.obj(doc.get("failure_probs", {}), "$.failure_probs", _PROB_FIELDS).items():
        p = c.prob(v, f"$.failure_probs.{key}")
        if p is not None:
            prob_kwargs[key] = p
    failure_probs = FailureProbs(**prob_kwargs)

    enh_raw = doc.get("enhancements", False)
    enhancements: Enhancements | bool = False
    if isinstance(enh_raw, bool):
        enhancements = enh_raw
    else:
        e = c.obj(enh_raw, "$.enhancements", {"replication", "elimination"})
        enhancements = Enhancements(
            tuple(c.strings(e.get("replication", []), "$.enhancements.replication")),
            tuple(c.strings(e.get("elimination", []), "$.enhancements.elimination")),
        )

    rec = c.obj(doc.get("recovery", {}), "$.recovery", {"algorithm", "history_window", "reset_threshold"})
    recovery = None
    algorithm = rec.get("algorithm", "vector")
    if algorithm not in {a.value for a in RecoveryAlgorithm}:
        c.fail("$.recovery.algorithm", f"{algorithm!r} is not match or vector")
    window = c.integer(rec.get("history_window", 32), "$.recovery.history_window", 1, 4096)
    reset = rec.get("reset_threshold")
    if reset is not None:
        reset = c.integer(reset, "$.recovery.reset_threshold", 1)
    if window is not None and algorithm in {a.value for a in RecoveryAlgorithm}:
        recovery = RecoveryConfig(RecoveryAlgorithm(algorithm), window, reset)

    run = c.obj(doc.get("run", {}), "$.run", {"frame_count", "seed"})
    frame_count = c.integer(run.get("frame_count", PAPER_FRAMES), "$.run.frame_count", 1)
    seed = c.integer(run.get("seed", 1), "$.run.seed", 0, MAX_SEED)

    # cross references
    tsn_ids = {n.id for n in nodes}
    fiveg_ids = set(segment.node_ids) if segment else set()
    for i, l in enumerate(links):
        for end in (l.a, l.b):
            if end not in tsn_ids | fiveg_ids:
                c.fail(f"$.topology.links[{i}]", f"references undefined node {end!r}")
    for name, ref in (("talker", talker), ("listener", listener)):
        if ref is not None and ref not in tsn_ids:
            c.fail(f"$.topology.{name}", f"{ref!r} is not a defined TSN node")
    if isinstance(enhancements, Enhancements):
        for node_id in enhancements.replication + enhancements.elimination:
            if node_id not in tsn_ids:
                c.fail("$.enhancements", f"{node_id!r} is not a defined TSN node")

    if c.problems:
        raise ValidationError(c.problems)
    config = ScenarioConfig(
        scenario_id=scenario_id,
        topology=Topology(tuple(nodes), tuple(links), talker, listener),
        segment=segment,
        embodiment=embodiment,
        stream=stream,
        failure_probs=failure_probs,
        enhancements=enhancements,
        frame_count=frame_count,
        seed=seed,
        recovery=recovery,
    )
    try:
        config.validate()
        config.graph()
    except ValueError as exc:
        raise ValidationError([str(exc)]) from None
    return config


def config_to_dict(config: ScenarioConfig) -> dict[str, Any]:
    t, s = config.topology, config.segment
    enh: Any = config.enhancements
    if isinstance(enh, Enhancements):
        enh = {"replication": list(enh.replication), "elimination": list(enh.elimination)}
    links = []
    for l in t.links:
        d: dict[str, Any] = {"id": l.id, "a": l.a, "b": l.b}
        if l.failure_prob is not None:
            d["failure_prob"] = l.failure_prob
        links.append(d)
    fiveg: dict[str, Any] = {
        "embodiment": str(config.embodiment),
        "segment_id": s.segment_id,
        "ues": list(s.ues),
        "gnbs": list(s.gnbs),
        "upfs": list(s.upfs),
    }
    if s.link_probs:
        fiveg["link_probs"] = dict(s.link_probs)
    if s.node_probs:
        fiveg["node_probs"] = dict(s.node_probs)
    recovery: dict[str, Any] = {
        "algorithm": config.recovery.algorithm.value,
        "history_window": config.recovery.history_window,
    }
    if config.recovery.reset_threshold is not None:
        recovery["reset_threshold"] = config.recovery.reset_threshold
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario_id": config.scenario_id,
        "topology": {
            "nodes": [{"id": n.id, "kind": n.category.value} for n in t.nodes],
            "links": links,
            "talker": t.talker,
            "listener": t.listener,
        },
        "fiveg": fiveg,
        "stream": config.stream.value,
        "failure_probs": dataclasses.asdict(config.failure_probs),
        "enhancements": enh,
        "recovery": recovery,
        "run": {"frame_count": config.frame_count, "seed": config.seed},
    }


def parse_scenario_text(text: str, origin: str = "<string>") -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{origin}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def _search_paths(name: str) -> list[Path]:
    candidates = [Path(name)]
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env:
        for d in env.split(os.pathsep):
            candidates += [Path(d) / name, Path(d) / f"{name}.json"]
    return candidates


def load_scenario(name_or_path: str | os.PathLike) -> ScenarioConfig:
    """Built-in id, a file path, or a file name under ``$XFRER_SCENARIO_DIR``."""
    name = os.fspath(name_or_path)
    if name in BUILTINS:
        return config_from_dict(json.loads(json.dumps(BUILTINS[name])))
    for path in _search_paths(name):
        if path.is_file():
            return parse_scenario_text(path.read_text(encoding="utf-8"), str(path))
    if name.startswith("paper-") or not (name.endswith(".json") or os.sep in name):
        raise UnknownBuiltin(f"no built-in scenario or scenario file named {name!r}")
    raise ParseError(f"{name}: no such file")
