"""Scenario description, its text/JSON formats, and the derived schedule.

The text format is line based::

    # comment
    n = 7
    delta = 2
    protocol = TOB1
    horizon = 120

    [sleep]          # validator start end  (asleep on [start, end))
    3 10 30

    [corrupt]        # validator tick  (adversarial from tick + delta)
    5 40

    [byzantine]      # adversarial from tick 0
    6

    [inputs]         # GA runs only: validator label.path ("-" is genesis)
    0 a.b

    [asynchrony]
    v_a = 3
    pi = 2

    [adversary]      # strategy parameters
    byzantine_mode = equivocate
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Union

from .core import GENESIS_ID, Log

PROTOCOLS = ("GA2", "GA3", "TOB1", "TOB2", "TOB1_LMD")
GA_PROTOCOLS = ("GA2", "GA3")
ADVERSARIES = ("SILENT", "EQUIVOCATE_SPLIT", "WITHHOLD_MAX_DELAY", "ASYNC_PARTITION")

# effective corruption tick of a validator that is never corrupted
NEVER = 1 << 62

PARSE_ERROR = "PARSE_ERROR"
SEMANTIC_ERROR = "SEMANTIC_ERROR"


class ScenarioError(ValueError):
    def __init__(self, code: str, message: str, line: Optional[int] = None, field: Optional[str] = None,
                 reason: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{code}: {message}" + (f" ({', '.join(where)})" if where else ""))
        self.code = code
        self.line = line
        self.field = field
        self.reason = reason or code


@dataclass(frozen=True)
class Scenario:
    n: int
    delta: int
    protocol: str
    horizon: int
    seed: int = 0
    eta: Optional[Union[int, float]] = None
    byzantine: tuple = ()
    corruptions: tuple = ()
    sleep: tuple = ()
    asynchrony: Optional[tuple] = None
    adversary: str = "SILENT"
    adversary_params: tuple = ()
    inputs: tuple = ()
    instrument: bool = False
    detail: bool = False

    def __post_init__(self):
        # normalise container types so equality is structural
        object.__setattr__(self, "byzantine", tuple(sorted(int(v) for v in self.byzantine)))
        object.__setattr__(self, "corruptions", tuple(sorted((int(v), int(t)) for v, t in self.corruptions)))
        object.__setattr__(self, "sleep", tuple(sorted((int(v), int(s), int(e)) for v, s, e in self.sleep)))
        object.__setattr__(self, "inputs", tuple(sorted((int(v), str(p)) for v, p in self.inputs)))
        params = self.adversary_params
        if isinstance(params, dict):
            params = params.items()
        object.__setattr__(self, "adversary_params", tuple(sorted((str(k), v) for k, v in params)))
        if self.asynchrony is not None:
            object.__setattr__(self, "asynchrony", tuple(int(x) for x in self.asynchrony))

    @property
    def params(self) -> dict:
        return dict(self.adversary_params)

    @property
    def period(self) -> int:
        return 5 if self.protocol == "TOB2" else 4

    def view_start(self, view: int) -> int:
        return self.period * self.delta * view

    @property
    def views(self) -> int:
        """Number of views that start within the horizon."""
        return self.horizon // (self.period * self.delta) + 1

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    # -- plain-data conversion ------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["byzantine"] = list(self.byzantine)
        d["corruptions"] = [list(x) for x in self.corruptions]
        d["sleep"] = [list(x) for x in self.sleep]
        d["inputs"] = [list(x) for x in self.inputs]
        d["asynchrony"] = None if self.asynchrony is None else {"v_a": self.asynchrony[0], "pi": self.asynchrony[1]}
        d["adversary_params"] = dict(self.adversary_params)
        if self.eta == math.inf:
            d["eta"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ScenarioError(PARSE_ERROR, "unknown keys", field=sorted(unknown)[0])
        for key in ("n", "delta", "protocol", "horizon"):
            if key not in d:
                raise ScenarioError(PARSE_ERROR, "missing required key", field=key)
        if d.get("eta") is not None:
            d["eta"] = _parse_eta(d["eta"], None)
        a = d.get("asynchrony")
        if isinstance(a, dict):
            d["asynchrony"] = (a["v_a"], a["pi"])
        try:
            sc = cls(**d)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(PARSE_ERROR, str(exc)) from None
        validate(sc)
        return sc


# -- validation ----------------------------------------------------------------


def validate(sc: Scenario) -> Scenario:
    def bad(msg, fld):
        raise ScenarioError(SEMANTIC_ERROR, msg, field=fld)

    if sc.n < 1:
        bad("n must be positive", "n")
    if sc.delta < 1:
        bad("delta must be positive", "delta")
    if sc.horizon < 1:
        bad("horizon must be positive", "horizon")
    if sc.protocol not in PROTOCOLS:
        bad(f"unknown protocol {sc.protocol!r}", "protocol")
    if sc.adversary not in ADVERSARIES:
        bad(f"unknown adversary {sc.adversary!r}", "adversary")
    lmd = sc.protocol == "TOB1_LMD"
    if sc.eta is not None and not lmd:
        bad("eta only applies to TOB1_LMD", "eta")
    if lmd and sc.eta is None:
        bad("TOB1_LMD needs eta", "eta")
    if sc.eta is not None and (sc.eta < 0 or (sc.eta != math.inf and sc.eta != int(sc.eta))):
        bad("eta must be a non-negative integer or inf", "eta")
    if sc.asynchrony is not None:
        if not lmd:
            bad("an asynchrony window needs TOB1_LMD", "asynchrony")
        v_a, pi = sc.asynchrony
        if v_a < 0 or pi < 0:
            bad("asynchrony fields must be non-negative", "asynchrony")
        if pi >= sc.eta:
            raise ScenarioError(SEMANTIC_ERROR, "asynchrony requires pi < eta", field="pi", reason="PI_GE_ETA")
    if sc.adversary == "ASYNC_PARTITION" and sc.asynchrony is None:
        bad("ASYNC_PARTITION needs an asynchrony window", "adversary")
    for v in sc.byzantine:
        if not 0 <= v < sc.n:
            bad(f"unknown validator {v}", "byzantine")
    if len(set(sc.byzantine)) != len(sc.byzantine):
        bad("duplicate byzantine validator", "byzantine")
    seen = set(sc.byzantine)
    for v, t in sc.corruptions:
        if not 0 <= v < sc.n:
            bad(f"unknown validator {v}", "corrupt")
        if not 0 <= t <= sc.horizon:
            bad(f"corruption tick {t} outside horizon", "corrupt")
        if v in seen:
            bad(f"validator {v} corrupted twice", "corrupt")
        seen.add(v)
    for v, s, e in sc.sleep:
        if not 0 <= v < sc.n:
            bad(f"unknown validator {v}", "sleep")
        if not 0 <= s < e or s > sc.horizon:
            bad(f"bad sleep interval [{s}, {e})", "sleep")
    ga = sc.protocol in GA_PROTOCOLS
    if sc.inputs and not ga:
        bad("inputs only apply to GA runs", "inputs")
    seen_inputs = set()
    for v, path in sc.inputs:
        if not 0 <= v < sc.n:
            bad(f"unknown validator {v}", "inputs")
        if v in seen_inputs:
            bad(f"validator {v} has two inputs", "inputs")
        seen_inputs.add(v)
        if path and not re.fullmatch(r"\w+(\.\w+)*", path):
            bad(f"bad label path {path!r}", "inputs")
    return sc


# -- text format -----------------------------------------------------------------

_TABLES = {"sleep": 3, "corrupt": 2, "byzantine": 1, "inputs": 2}
_KV_SECTIONS = ("asynchrony", "adversary")
_TOP_INT = ("n", "delta", "horizon", "seed")
_TOP_BOOL = ("instrument", "detail")


def _parse_eta(text, line):
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return math.inf if text == math.inf else int(text)
    s = str(text).strip().lower()
    if s in ("inf", "infinity", "∞"):
        return math.inf
    try:
        return int(s)
    except ValueError:
        raise ScenarioError(PARSE_ERROR, f"bad eta {text!r}", line, "eta") from None


def _parse_scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    return text


def parse_scenario_text(text: str) -> Scenario:
    top: dict = {}
    tables: dict[str, list] = {k: [] for k in _TABLES}
    kv: dict[str, dict] = {k: {} for k in _KV_SECTIONS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            section = m.group(1)
            if section not in _TABLES and section not in _KV_SECTIONS:
                raise ScenarioError(PARSE_ERROR, f"unknown section [{section}]", lineno)
            continue
        if section in _TABLES:
            cols = line.split()
            width = _TABLES[section]
            if section == "byzantine":
                rows = [[c] for c in cols]
            elif len(cols) != width:
                raise ScenarioError(PARSE_ERROR, f"expected {width} columns", lineno, section)
            else:
                rows = [cols]
            for row in rows:
                try:
                    if section == "inputs":
                        tables[section].append((int(row[0]), "" if row[1] == "-" else row[1]))
                    else:
                        tables[section].append(tuple(int(c) for c in row))
                except ValueError:
                    raise ScenarioError(PARSE_ERROR, "expected integers", lineno, section) from None
            continue
        if "=" not in line:
            raise ScenarioError(PARSE_ERROR, "expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if section in _KV_SECTIONS:
            kv[section][key] = (value, lineno)
            continue
        if key in _TOP_INT:
            try:
                top[key] = int(value)
            except ValueError:
                raise ScenarioError(PARSE_ERROR, "expected an integer", lineno, key) from None
        elif key in _TOP_BOOL:
            if value.lower() not in ("true", "false", "0", "1"):
                raise ScenarioError(PARSE_ERROR, "expected true or false", lineno, key)
            top[key] = value.lower() in ("true", "1")
        elif key == "eta":
            top[key] = _parse_eta(value, lineno)
        elif key in ("protocol", "adversary"):
            top[key] = value
        else:
            raise ScenarioError(PARSE_ERROR, f"unknown key {key!r}", lineno, key)
    for key in ("n", "delta", "protocol", "horizon"):
        if key not in top:
            raise ScenarioError(PARSE_ERROR, "missing required key", field=key)
    if kv["asynchrony"]:
        a = kv["asynchrony"]
        try:
            top["asynchrony"] = (int(a["v_a"][0]), int(a["pi"][0]))
        except KeyError as exc:
            raise ScenarioError(PARSE_ERROR, "asynchrony needs v_a and pi", field=exc.args[0]) from None
        except ValueError:
            raise ScenarioError(PARSE_ERROR, "expected integers", field="asynchrony") from None
    top["adversary_params"] = {k: _parse_scalar(v) for k, (v, _) in kv["adversary"].items()}
    sc = Scenario(
        byzantine=tuple(v for (v,) in tables["byzantine"]),
        corruptions=tuple(tables["corrupt"]),
        sleep=tuple(tables["sleep"]),
        inputs=tuple(tables["inputs"]),
        **top,
    )
    return validate(sc)


def serialize_scenario(sc: Scenario) -> str:
    out = [
        f"n = {sc.n}",
        f"delta = {sc.delta}",
        f"protocol = {sc.protocol}",
        f"horizon = {sc.horizon}",
        f"seed = {sc.seed}",
        f"adversary = {sc.adversary}",
    ]
    if sc.eta is not None:
        out.append(f"eta = {'inf' if sc.eta == math.inf else sc.eta}")
    if sc.instrument:
        out.append("instrument = true")
    if sc.detail:
        out.append("detail = true")
    if sc.sleep:
        out += ["", "[sleep]"] + [f"{v} {s} {e}" for v, s, e in sc.sleep]
    if sc.corruptions:
        out += ["", "[corrupt]"] + [f"{v} {t}" for v, t in sc.corruptions]
    if sc.byzantine:
        out += ["", "[byzantine]", " ".join(map(str, sc.byzantine))]
    if sc.inputs:
        out += ["", "[inputs]"] + [f"{v} {p or '-'}" for v, p in sc.inputs]
    if sc.asynchrony is not None:
        out += ["", "[asynchrony]", f"v_a = {sc.asynchrony[0]}", f"pi = {sc.asynchrony[1]}"]
    if sc.adversary_params:
        out += ["", "[adversary]"] + [f"{k} = {str(v).lower() if isinstance(v, bool) else v}"
                                      for k, v in sc.adversary_params]
    return "\n".join(out) + "\n"


def parse_scenario(path) -> Scenario:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(PARSE_ERROR, exc.msg, exc.lineno) from None
        return Scenario.from_dict(data)
    return parse_scenario_text(text)


# -- GA input labels ---------------------------------------------------------------


def label_logs(paths) -> dict[str, Log]:
    """Map dotted label paths to logs with one block per label segment.

    Equal prefixes share blocks. Label blocks get negative ids so they never
    collide with proposal ids.
    """
    prefixes = sorted({tuple(p.split(".")[:k]) for p in paths if p for k in range(1, len(p.split(".")) + 1)})
    ids = {pre: -(i + 1) for i, pre in enumerate(prefixes)}
    out = {}
    for p in paths:
        if not p:
            out[p] = Log()
            continue
        parts = tuple(p.split("."))
        out[p] = Log((GENESIS_ID,) + tuple(ids[parts[:k]] for k in range(1, len(parts) + 1)))
    return out


# -- schedule ---------------------------------------------------------------------------


@dataclass
class Schedule:
    """Who is awake and who is corrupted at every tick of a scenario.

    ``awake`` has one 0/1 row per validator covering ticks ``[0, width)``
    and reflects only the sleep intervals; corrupted validators count as
    adversarial regardless. ``corrupt_at[v]`` is the first tick at which
    ``v`` belongs to B (``NEVER`` if it stays honest).
    """

    n: int
    delta: int
    awake: list
    corrupt_at: list
    horizon: int = 0
    period: int = 4

    @classmethod
    def from_scenario(cls, sc: Scenario, extra: int = 0) -> "Schedule":
        width = sc.horizon + 1 + extra
        awake = [bytearray(b"\x01") * width for _ in range(sc.n)]
        for v, s, e in sc.sleep:
            row = awake[v]
            for t in range(s, min(e, width)):
                row[t] = 0
        corrupt_at = [NEVER] * sc.n
        for v in sc.byzantine:
            corrupt_at[v] = 0
        for v, t in sc.corruptions:
            corrupt_at[v] = t + sc.delta
        return cls(sc.n, sc.delta, awake, corrupt_at, sc.horizon, sc.period)

    @property
    def width(self) -> int:
        return len(self.awake[0]) if self.awake else 0

    def view_start(self, view: int) -> int:
        return self.period * self.delta * view

    def is_awake(self, v: int, t: int) -> bool:
        return 0 <= t < self.width and bool(self.awake[v][t])

    def honest(self, v: int, t: int) -> bool:
        return self.corrupt_at[v] > t

    def H(self, t: int) -> set:
        """Honest validators awake at ``t``."""
        return {v for v in range(self.n) if self.honest(v, t) and self.is_awake(v, t)}

    def H_range(self, t1: int, t2: int, t3: Optional[int] = None) -> set:
        """Validators awake throughout [t1, t2] and honest until ``t3``.

        Ticks before 0 are clamped to 0. ``t3`` defaults to ``t2``.
        """
        t1 = max(0, t1)
        t3 = t2 if t3 is None else t3
        out = set()
        for v in range(self.n):
            if not self.honest(v, max(t2, t3)):
                continue
            if t2 < t1 or all(self.is_awake(v, t) for t in range(t1, t2 + 1)):
                out.add(v)
        return out

    def B(self, t: int) -> set:
        return {v for v in range(self.n) if self.corrupt_at[v] <= t}
