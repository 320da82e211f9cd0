import re
from pathlib import Path

import pytest

from memsim.cells import CellConfig, CellKind, build_cell, default_stimulus, testbench as make_testbench
from memsim.netlist import (
    Capacitor,
    Memristor,
    NetlistError,
    Resistor,
    count_components,
    parse,
    parse_number,
    serialize,
    validate,
)

FIXTURES = Path(__file__).parent / "fixtures"
GOOD = sorted((FIXTURES / "good").glob("*.ckt"))
BAD = sorted((FIXTURES / "bad").glob("*.ckt"))


def test_fixture_inventory():
    assert len(GOOD) == 20
    assert len(BAD) == 10


@pytest.mark.parametrize("text, value", [
    ("1k", 1e3), ("2.2K", 2.2e3), ("1meg", 1e6), ("1MEG", 1e6), ("10f", 10e-15), ("3p", 3e-12),
    ("4n", 4e-9), ("5u", 5e-6), ("6m", 6e-3), ("1g", 1e9), ("1.5e-3", 1.5e-3), (".5", 0.5), ("-2", -2.0),
])
def test_parse_number(text, value):
    assert parse_number(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["10ff", "1kk", "abc", "1e", "", "1..2"])
def test_parse_number_rejects(text):
    with pytest.raises(ValueError):
        parse_number(text)


def test_resistor_card():
    nl = parse("R1 a b 1k")
    assert nl.elements == (Resistor("R1", "a", "b", 1000.0),)


def test_memristor_card():
    (el,) = parse("YM1 in out w0=0.3").elements
    assert isinstance(el, Memristor)
    assert (el.name, el.pos, el.neg, el.w0, el.model) == ("YM1", "in", "out", 0.3, None)


def test_double_suffix_is_reported_at_value_token():
    with pytest.raises(NetlistError) as exc:
        parse("C1 x 0 10ff")
    (d,) = exc.value.diagnostics
    assert (d.line, d.column) == (1, 8)


def test_all_errors_reported_together():
    text = "V1 a 0 DC 1\nR1 a 0 1x\nQ9 a 0\nV1 a 0 DC 2\n"
    with pytest.raises(NetlistError) as exc:
        parse(text)
    assert [d.line for d in exc.value.diagnostics] == [2, 3, 4]


def test_validate_ground_and_range():
    with pytest.raises(NetlistError, match="ground"):
        validate(parse("V1 a b DC 1\nR1 a b 1k"))
    with pytest.raises(NetlistError, match="outside"):
        validate(parse("V1 a 0 DC 1\nYM1 a 0 w0=1.5"))


def test_validate_requires_analysis_on_request():
    nl = parse("V1 a 0 DC 1\nR1 a 0 1k")
    validate(nl)
    with pytest.raises(NetlistError, match="TRAN"):
        validate(nl, require_analysis=True)


def test_node_names_are_case_sensitive():
    nl = validate(parse((FIXTURES / "good" / "14_case.ckt").read_text()))
    assert {"A", "a"} <= set(nl.nodes)


def test_capacitor_ic_field():
    nl = parse((FIXTURES / "good" / "12_cap_ic_card.ckt").read_text())
    (cap,) = nl.of_type(Capacitor)
    assert cap.ic == 0.5


@pytest.mark.parametrize("path", GOOD, ids=lambda p: p.stem)
def test_good_fixture_round_trip(path):
    nl = validate(parse(path.read_text()))
    text = serialize(nl)
    again = validate(parse(text))
    assert again.elements == nl.elements
    assert again.models == nl.models
    assert again.ics == nl.ics and again.tran == nl.tran
    assert serialize(again) == text
    assert count_components(again) == count_components(nl)


@pytest.mark.parametrize("path", BAD, ids=lambda p: p.stem)
def test_bad_fixture_line_diagnostic(path):
    text = path.read_text()
    want = int(re.search(r"expect-line: (\d+)", text).group(1))
    with pytest.raises(NetlistError) as exc:
        validate(parse(text))
    lines = [d.line for d in exc.value.diagnostics]
    assert want in lines, exc.value.diagnostics


@pytest.mark.parametrize("kind", list(CellKind), ids=lambda k: k.value)
def test_cell_round_trip(kind):
    for nl in (build_cell(kind), make_testbench(kind, default_stimulus(kind, 8, 1))):
        text = serialize(nl)
        again = validate(parse(text))
        assert again.elements == nl.elements
        assert serialize(again) == text


def test_serialized_numbers_are_scientific_with_nine_digits():
    text = serialize(build_cell(CellKind.NOT, CellConfig()))
    nums = re.findall(r"[-+]?\d\.\d+e[-+]\d+", text)
    assert nums
    assert all(len(n.lstrip("+-").split("e")[0].replace(".", "")) >= 9 for n in nums)


def test_element_order_preserved():
    nl = validate(parse((FIXTURES / "good" / "03_suffixes.ckt").read_text()))
    names = [el.name for el in parse(serialize(nl)).elements]
    assert names == [el.name for el in nl.elements]


def test_count_components_excludes_passives():
    nl = validate(parse((FIXTURES / "good" / "07_cmos_inverter.ckt").read_text()))
    c = count_components(nl)
    assert (c.transistors, c.memristors, c.total) == (2, 0, 2)
