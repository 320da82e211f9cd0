"""Netlist text format: parse, validate, serialize, count components.

Grammar (one card per line, ``*`` starts a comment line, keywords are
case-insensitive, node names are case-sensitive)::

    Vname n+ n- (DC value | value | PULSE(v1 v2 td tr tf pw per) | PWL(t1 v1 ...) | SIN(off amp freq))
    Rname n1 n2 value
    Cname n1 n2 value [IC=volts]
    MNname d g s b [model] [WL=ratio]
    MPname d g s b [model] [WL=ratio]
    YMname n+ n- [w0=value] [model=name]
    .MODEL name (type=nmos|pmos|memristor key=value ...)
    .TRAN tstep tstop
    .IC node=volts ...
    .TITLE text
    .END
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Optional, Union

from .devices import (
    DC,
    MEMRISTOR_KEYS,
    NMOS_DEFAULT,
    PMOS_DEFAULT,
    PWL,
    MemristorParams,
    MosfetParams,
    ParameterDomainError,
    Pulse,
    Sin,
    SourceSpec,
    validate_params,
)

GROUND = "0"


@dataclass(frozen=True)
class Diagnostic:
    line: Optional[int]
    column: Optional[int]
    message: str

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"line {self.line}, col {self.column}: {self.message}"


class NetlistError(Exception):
    """Raised with every diagnostic found, never just the first."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


def _meta():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class VSource:
    name: str
    pos: str
    neg: str
    spec: SourceSpec
    line: Optional[int] = _meta()

    @property
    def nodes(self):
        return (self.pos, self.neg)


@dataclass(frozen=True)
class Resistor:
    name: str
    n1: str
    n2: str
    ohms: float
    line: Optional[int] = _meta()

    @property
    def nodes(self):
        return (self.n1, self.n2)


@dataclass(frozen=True)
class Capacitor:
    name: str
    n1: str
    n2: str
    farads: float
    ic: Optional[float] = None
    line: Optional[int] = _meta()

    @property
    def nodes(self):
        return (self.n1, self.n2)


@dataclass(frozen=True)
class Mosfet:
    name: str
    drain: str
    gate: str
    source: str
    body: str
    polarity: str  # "N" or "P"
    model: Optional[str] = None
    w_over_l: Optional[float] = None
    line: Optional[int] = _meta()

    @property
    def nodes(self):
        return (self.drain, self.gate, self.source, self.body)


@dataclass(frozen=True)
class Memristor:
    name: str
    pos: str
    neg: str
    w0: float = 0.5
    model: Optional[str] = None
    line: Optional[int] = _meta()

    @property
    def nodes(self):
        return (self.pos, self.neg)


Element = Union[VSource, Resistor, Capacitor, Mosfet, Memristor]
Model = Union[MosfetParams, MemristorParams]


@dataclass(frozen=True)
class Tran:
    tstep: float
    tstop: float
    line: Optional[int] = _meta()


@dataclass(frozen=True)
class ComponentCount:
    transistors: int
    memristors: int

    @property
    def total(self) -> int:
        return self.transistors + self.memristors


@dataclass(frozen=True)
class Netlist:
    title: str = ""
    elements: tuple = ()
    models: dict = field(default_factory=dict)
    tran: Optional[Tran] = None
    ics: dict = field(default_factory=dict)
    node_index: Optional[dict] = field(default=None, compare=False, repr=False)
    model_lines: dict = field(default_factory=dict, compare=False, repr=False)
    ic_lines: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def nodes(self) -> list[str]:
        """Node names in order of first appearance, ground first."""
        seen = {GROUND: None}
        for el in self.elements:
            for n in el.nodes:
                seen.setdefault(n, None)
        return list(seen)

    def element(self, name: str) -> Element:
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    def of_type(self, cls) -> list:
        return [el for el in self.elements if isinstance(el, cls)]

    def with_elements(self, elements: Iterable[Element]) -> "Netlist":
        return replace(self, elements=tuple(elements), node_index=None)

    def mosfet_params(self, el: Mosfet) -> MosfetParams:
        base = NMOS_DEFAULT if el.polarity == "N" else PMOS_DEFAULT
        if el.model is not None:
            base = self.models[el.model]
        if el.w_over_l is not None:
            base = replace(base, w_over_l=el.w_over_l)
        return base

    def memristor_params(self, el: Memristor) -> MemristorParams:
        if el.model is None:
            return MemristorParams()
        return self.models[el.model]


# ---------------------------------------------------------------------------
# Lexing helpers
# ---------------------------------------------------------------------------

_NUMBER = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)(meg|[fpnumkg])?$", re.IGNORECASE
)
_SUFFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3,
    "k": 1e3, "meg": 1e6, "g": 1e9,
}
_TOKEN = re.compile(r"[(),=]|[^\s(),=]+")


def parse_number(text: str) -> float:
    """Parse ``1k``, ``2.5e-3``, ``1meg`` ...; raise ValueError on anything else."""
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"malformed number {text!r}")
    value = float(m.group(1))
    if m.group(2):
        value *= _SUFFIX[m.group(2).lower()]
    if not math.isfinite(value):
        raise ValueError(f"non-finite number {text!r}")
    return value


@dataclass
class _Tok:
    text: str
    col: int


def _tokenize(line: str) -> list[_Tok]:
    return [_Tok(m.group(0), m.start() + 1) for m in _TOKEN.finditer(line) if m.group(0) != ","]


class _CardError(Exception):
    def __init__(self, col: int, message: str):
        super().__init__(message)
        self.col = col


class _Cursor:
    def __init__(self, toks: list[_Tok], line_len: int):
        self.toks = toks
        self.i = 0
        self.end_col = line_len + 1

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise _CardError(self.end_col, f"expected {what}")
        self.i += 1
        return tok

    def number(self, what: str) -> float:
        tok = self.next(what)
        try:
            return parse_number(tok.text)
        except ValueError as exc:
            raise _CardError(tok.col, f"{what}: {exc}") from None

    def expect(self, text: str) -> _Tok:
        tok = self.next(f"'{text}'")
        if tok.text != text:
            raise _CardError(tok.col, f"expected '{text}', got {tok.text!r}")
        return tok

    def node(self, what: str) -> str:
        tok = self.next(what)
        if tok.text in "()=":
            raise _CardError(tok.col, f"expected {what}, got {tok.text!r}")
        return tok.text

    def keyvals(self) -> list[tuple[_Tok, _Tok]]:
        """Remaining ``key=value`` pairs (parentheses ignored)."""
        out = []
        while (tok := self.peek()) is not None:
            if tok.text in "()":
                self.i += 1
                continue
            self.i += 1
            self.expect("=")
            out.append((tok, self.next(f"value for {tok.text}")))
        return out

    def done(self):
        tok = self.peek()
        if tok is not None:
            raise _CardError(tok.col, f"unexpected token {tok.text!r}")


def _arity_error(tok: _Tok, n: int, kind: str):
    return _CardError(tok.col, f"{kind} takes {n} values")


def _parse_source_spec(cur: _Cursor) -> SourceSpec:
    tok = cur.peek()
    if tok is None:
        raise _CardError(cur.end_col, "missing source value")
    kw = tok.text.upper()
    if kw == "DC":
        cur.next("DC")
        spec = DC(cur.number("DC level"))
        cur.done()
        return spec
    if kw in ("PULSE", "PWL", "SIN"):
        cur.next(kw)
        cur.expect("(")
        vals: list[float] = []
        while (t := cur.peek()) is not None and t.text != ")":
            vals.append(cur.number(f"{kw} argument"))
        cur.expect(")")
        cur.done()
        try:
            if kw == "PULSE":
                if len(vals) != 7:
                    raise _arity_error(tok, 7, "PULSE")
                return Pulse(*vals)
            if kw == "SIN":
                if len(vals) != 3:
                    raise _arity_error(tok, 3, "SIN")
                return Sin(*vals)
            if len(vals) < 2 or len(vals) % 2:
                raise _CardError(tok.col, "PWL takes an even number (>= 2) of values")
            return PWL(tuple(zip(vals[::2], vals[1::2])))
        except ParameterDomainError as exc:
            raise _CardError(tok.col, str(exc)) from None
    spec = DC(cur.number("source value"))
    cur.done()
    return spec


_MODEL_TYPES = ("nmos", "pmos", "memristor")
_MOSFET_MODEL_KEYS = {"vth": "vth", "kprime": "kprime", "lambda": "lambda_", "w_over_l": "w_over_l", "wl": "w_over_l"}
_MEMRISTOR_MODEL_KEYS = {k.lower(): k for k in MEMRISTOR_KEYS}


def _build_model(name_tok: _Tok, pairs: list[tuple[_Tok, _Tok]]) -> Model:
    kind = None
    values: dict[str, float] = {}
    cols: dict[str, int] = {}
    for key, val in pairs:
        k = key.text.lower()
        if k == "type":
            kind = val.text.lower()
            if kind not in _MODEL_TYPES:
                raise _CardError(val.col, f"unknown model type {val.text!r}")
            continue
        try:
            values[k] = parse_number(val.text)
        except ValueError as exc:
            raise _CardError(val.col, str(exc)) from None
        cols[k] = key.col
    if kind is None:
        if values and all(k in _MEMRISTOR_MODEL_KEYS for k in values):
            kind = "memristor"
        else:
            raise _CardError(name_tok.col, "model needs type=nmos|pmos|memristor")
    table = _MEMRISTOR_MODEL_KEYS if kind == "memristor" else _MOSFET_MODEL_KEYS
    kwargs = {}
    for k, v in values.items():
        if k not in table:
            raise _CardError(cols[k], f"unknown {kind} model parameter {k!r}")
        kwargs[table[k]] = v
    try:
        if kind == "memristor":
            if "m" in kwargs:
                if kwargs["m"] != int(kwargs["m"]):
                    raise ParameterDomainError("m", "must be an odd integer")
                kwargs["m"] = int(kwargs["m"])
            return validate_params(MemristorParams(**kwargs))
        base = NMOS_DEFAULT if kind == "nmos" else PMOS_DEFAULT
        return replace(base, **kwargs)
    except ParameterDomainError as exc:
        raise _CardError(name_tok.col, str(exc)) from None


# ---------------------------------------------------------------------------
# Parse
# ---------------------------------------------------------------------------


def parse(text: str) -> Netlist:
    """Parse netlist text.

    Every problem found is collected and raised together in a
    :class:`NetlistError`; each diagnostic carries a 1-based line and column.
    """
    diags: list[Diagnostic] = []
    elements: list[Element] = []
    models: dict[str, Model] = {}
    model_lines: dict[str, int] = {}
    ics: dict[str, float] = {}
    ic_lines: dict[str, int] = {}
    tran: Optional[Tran] = None
    title = ""
    seen_names: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        toks = _tokenize(raw)
        first = toks[0]
        head = first.text.upper()
        cur = _Cursor(toks, len(raw))
        cur.next("card")
        try:
            if head.startswith("."):
                if head == ".END":
                    break
                if head == ".TITLE":
                    title = raw.strip()[len(first.text):].strip()
                elif head == ".TRAN":
                    tstep = cur.number("tstep")
                    tstop = cur.number("tstop")
                    cur.done()
                    if tstep <= 0 or tstop <= tstep:
                        raise _CardError(first.col, ".TRAN needs 0 < tstep < tstop")
                    if tran is not None:
                        raise _CardError(first.col, "duplicate .TRAN")
                    tran = Tran(tstep, tstop, line=lineno)
                elif head == ".IC":
                    if cur.peek() is None:
                        raise _CardError(cur.end_col, ".IC needs node=volts")
                    while cur.peek() is not None:
                        tok = cur.next("node")
                        node = tok.text
                        if node.upper() == "V" and (p := cur.peek()) is not None and p.text == "(":
                            cur.expect("(")
                            node = cur.node("node")
                            cur.expect(")")
                        cur.expect("=")
                        ics[node] = cur.number(f"initial voltage for {node}")
                        ic_lines[node] = lineno
                elif head == ".MODEL":
                    name_tok = cur.next("model name")
                    if name_tok.text in "()=":
                        raise _CardError(name_tok.col, "expected model name")
                    pairs = cur.keyvals()
                    name = name_tok.text
                    if name in models:
                        raise _CardError(name_tok.col, f"duplicate model {name!r}")
                    models[name] = _build_model(name_tok, pairs)
                    model_lines[name] = lineno
                else:
                    raise _CardError(first.col, f"unknown directive {first.text!r}")
                continue

            name = first.text
            el = _parse_element(name, head, cur, first, lineno)
            key = name.upper()
            if key in seen_names:
                diags.append(Diagnostic(lineno, first.col, f"duplicate element name {name!r} "
                                        f"(first defined on line {seen_names[key]})"))
            else:
                seen_names[key] = lineno
            elements.append(el)
        except _CardError as exc:
            diags.append(Diagnostic(lineno, exc.col, str(exc)))

    if diags:
        raise NetlistError(diags)
    return Netlist(title=title, elements=tuple(elements), models=models, tran=tran, ics=ics,
                   model_lines=model_lines, ic_lines=ic_lines)


def _parse_element(name: str, head: str, cur: _Cursor, first: _Tok, lineno: int) -> Element:
    if head.startswith("YM"):
        pos, neg = cur.node("n+"), cur.node("n-")
        w0, model = 0.5, None
        for key, val in cur.keyvals():
            k = key.text.lower()
            if k == "w0":
                try:
                    w0 = parse_number(val.text)
                except ValueError as exc:
                    raise _CardError(val.col, str(exc)) from None
            elif k == "model":
                model = val.text
            else:
                raise _CardError(key.col, f"unknown memristor option {key.text!r}")
        return Memristor(name, pos, neg, w0, model, line=lineno)
    if head.startswith("MN") or head.startswith("MP"):
        d, g, s, b = (cur.node(w) for w in ("drain", "gate", "source", "body"))
        model, wl = None, None
        tok = cur.peek()
        if tok is not None and tok.text not in "()=" and not (
            cur.i + 1 < len(cur.toks) and cur.toks[cur.i + 1].text == "="
        ):
            model = cur.next("model").text
        for key, val in cur.keyvals():
            if key.text.lower() not in ("wl", "w_over_l"):
                raise _CardError(key.col, f"unknown MOSFET option {key.text!r}")
            try:
                wl = parse_number(val.text)
            except ValueError as exc:
                raise _CardError(val.col, str(exc)) from None
            if wl <= 0:
                raise _CardError(val.col, "WL must be > 0")
        return Mosfet(name, d, g, s, b, head[1], model, wl, line=lineno)
    letter = head[0]
    if letter == "V":
        pos, neg = cur.node("n+"), cur.node("n-")
        return VSource(name, pos, neg, _parse_source_spec(cur), line=lineno)
    if letter == "R":
        n1, n2 = cur.node("n1"), cur.node("n2")
        ohms = cur.number("resistance")
        cur.done()
        if ohms <= 0:
            raise _CardError(first.col, "resistance must be > 0")
        return Resistor(name, n1, n2, ohms, line=lineno)
    if letter == "C":
        n1, n2 = cur.node("n1"), cur.node("n2")
        farads = cur.number("capacitance")
        ic = None
        for key, val in cur.keyvals():
            if key.text.upper() != "IC":
                raise _CardError(key.col, f"unknown capacitor option {key.text!r}")
            try:
                ic = parse_number(val.text)
            except ValueError as exc:
                raise _CardError(val.col, str(exc)) from None
        if farads <= 0:
            raise _CardError(first.col, "capacitance must be > 0")
        return Capacitor(name, n1, n2, farads, ic, line=lineno)
    raise _CardError(first.col, f"unknown element type {name!r}")


# ---------------------------------------------------------------------------
# Validate
# ---------------------------------------------------------------------------


def validate(netlist: Netlist, *, require_analysis: bool = False) -> Netlist:
    """Structural checks; returns the netlist with ``node_index`` resolved."""
    diags: list[Diagnostic] = []

    def err(line, message):
        diags.append(Diagnostic(line, 1 if line is not None else None, message))

    names = Counter(el.name.upper() for el in netlist.elements)
    for el in netlist.elements:
        if names[el.name.upper()] > 1:
            err(el.line, f"duplicate element name {el.name!r}")
            names[el.name.upper()] = 0  # report once

    terminals: Counter = Counter()
    gate_nodes = set()
    for el in netlist.elements:
        if isinstance(el, Mosfet):
            for n in (el.drain, el.source, el.body):
                terminals[n] += 1
            gate_nodes.add(el.gate)
        else:
            for n in el.nodes:
                terminals[n] += 1

    if netlist.elements and GROUND not in terminals and GROUND not in gate_nodes:
        err(None, "no ground node '0'")
    if not netlist.elements:
        err(None, "netlist has no elements")

    for node in netlist.nodes:
        if node == GROUND:
            continue
        if terminals[node] < 2 and node not in gate_nodes:
            line = next((el.line for el in netlist.elements if node in el.nodes), None)
            err(line, f"node {node!r} is dangling (only {terminals[node]} terminal attached)")

    for el in netlist.elements:
        if isinstance(el, Memristor):
            if not (0.0 <= el.w0 <= 1.0):
                err(el.line, f"{el.name}: w0={el.w0} outside [0, 1]")
            if el.model is not None:
                m = netlist.models.get(el.model)
                if not isinstance(m, MemristorParams):
                    err(el.line, f"{el.name}: unknown memristor model {el.model!r}")
        elif isinstance(el, Mosfet) and el.model is not None:
            m = netlist.models.get(el.model)
            if not isinstance(m, MosfetParams):
                err(el.line, f"{el.name}: unknown MOSFET model {el.model!r}")
            elif m.polarity != el.polarity:
                err(el.line, f"{el.name}: model {el.model!r} has polarity {m.polarity}")
        elif isinstance(el, Resistor) and not el.ohms > 0:
            err(el.line, f"{el.name}: resistance must be > 0")
        elif isinstance(el, Capacitor) and not el.farads > 0:
            err(el.line, f"{el.name}: capacitance must be > 0")

    known = set(netlist.nodes)
    for node in netlist.ics:
        if node not in known or node == GROUND:
            err(netlist.ic_lines.get(node), f".IC references unknown node {node!r}")

    if require_analysis and netlist.tran is None:
        err(None, "no analysis directive (.TRAN) present")

    if diags:
        raise NetlistError(diags)
    index = {name: i for i, name in enumerate(netlist.nodes)}
    return replace(netlist, node_index=index)


# ---------------------------------------------------------------------------
# Serialize
# ---------------------------------------------------------------------------


def fmt(x: float) -> str:
    """Scientific notation with 9 to 17 significant digits, the fewest that
    parse back to the same float."""
    x = float(x)
    for digits in range(8, 16):
        text = f"{x:.{digits}e}"
        if float(text) == x:
            return text
    return f"{x:.16e}"


def _spec_text(spec: SourceSpec) -> str:
    if isinstance(spec, DC):
        return f"DC {fmt(spec.level)}"
    if isinstance(spec, Pulse):
        vals = (spec.v_low, spec.v_high, spec.delay, spec.rise, spec.fall, spec.width, spec.period)
        return "PULSE(" + " ".join(fmt(v) for v in vals) + ")"
    if isinstance(spec, Sin):
        return f"SIN({fmt(spec.offset)} {fmt(spec.amplitude)} {fmt(spec.frequency)})"
    return "PWL(" + " ".join(f"{fmt(t)} {fmt(v)}" for t, v in spec.points) + ")"


def _model_text(name: str, model: Model) -> str:
    if isinstance(model, MemristorParams):
        parts = ["type=memristor"]
        for k in MEMRISTOR_KEYS:
            v = getattr(model, k)
            parts.append(f"{k}={v}" if k == "m" else f"{k}={fmt(v)}")
    else:
        parts = [f"type={'nmos' if model.polarity == 'N' else 'pmos'}",
                 f"vth={fmt(model.vth)}", f"kprime={fmt(model.kprime)}",
                 f"lambda={fmt(model.lambda_)}", f"w_over_l={fmt(model.w_over_l)}"]
    return f".MODEL {name} (" + " ".join(parts) + ")"


def _element_text(el: Element) -> str:
    if isinstance(el, VSource):
        return f"{el.name} {el.pos} {el.neg} {_spec_text(el.spec)}"
    if isinstance(el, Resistor):
        return f"{el.name} {el.n1} {el.n2} {fmt(el.ohms)}"
    if isinstance(el, Capacitor):
        ic = "" if el.ic is None else f" IC={fmt(el.ic)}"
        return f"{el.name} {el.n1} {el.n2} {fmt(el.farads)}{ic}"
    if isinstance(el, Mosfet):
        s = f"{el.name} {el.drain} {el.gate} {el.source} {el.body}"
        if el.model is not None:
            s += f" {el.model}"
        if el.w_over_l is not None:
            s += f" WL={fmt(el.w_over_l)}"
        return s
    s = f"{el.name} {el.pos} {el.neg} w0={fmt(el.w0)}"
    if el.model is not None:
        s += f" model={el.model}"
    return s


def serialize(netlist: Netlist) -> str:
    """Canonical text; ``parse(serialize(n)) == n`` for every valid netlist."""
    lines = []
    if netlist.title:
        lines.append(f".TITLE {netlist.title}")
    for name, model in netlist.models.items():
        lines.append(_model_text(name, model))
    for el in netlist.elements:
        lines.append(_element_text(el))
    if netlist.ics:
        lines.append(".IC " + " ".join(f"{n}={fmt(v)}" for n, v in netlist.ics.items()))
    if netlist.tran is not None:
        lines.append(f".TRAN {fmt(netlist.tran.tstep)} {fmt(netlist.tran.tstop)}")
    lines.append(".END")
    return "\n".join(lines) + "\n"


def count_components(netlist: Netlist) -> ComponentCount:
    """Transistors and memristors only; sources and passives are not counted."""
    return ComponentCount(
        transistors=sum(isinstance(el, Mosfet) for el in netlist.elements),
        memristors=sum(isinstance(el, Memristor) for el in netlist.elements),
    )


__all__ = [
    "Capacitor", "ComponentCount", "Diagnostic", "Element", "GROUND", "Memristor", "Mosfet",
    "Netlist", "NetlistError", "Resistor", "Tran", "VSource", "count_components", "parse",
    "parse_number", "serialize", "validate",
]
