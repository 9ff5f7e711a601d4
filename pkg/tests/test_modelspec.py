"""Model files: parsing with located diagnostics and canonical round-trips."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest

from diracavg.fixtures import FIXTURES, build, fixture_path, load
from diracavg.modelspec import (
    ModelSpec,
    SpecError,
    parse_spec,
    parse_spec_dict,
    serialize_spec,
)
from diracavg.rings import RationalFn


MINIMAL = {
    "coordinates": ["x", "y"],
    "tensors": {
        "pi": {
            "kind": "multivector",
            "degree": 2,
            "components": {"0,1": [["1", {}]]},
        }
    },
}


def _err_locations(exc):
    return [loc for loc, _ in exc.value.diagnostics]


def test_minimal_document_parses():
    spec = parse_spec_dict(MINIMAL)
    assert spec.chart.coords == ("x", "y")
    pi = spec.tensors["pi"]
    assert pi.degree == 2
    assert pi.component((0, 1)) == RationalFn.const(1)
    assert spec.seed == 7


def test_all_bundled_models_round_trip_byte_identically():
    for name in FIXTURES:
        path = fixture_path(name)
        spec = parse_spec(path)
        assert serialize_spec(spec).encode() == path.read_bytes()
        # programmatic builders and bundled files agree
        assert serialize_spec(build(name)) == serialize_spec(spec)


def test_serialization_is_idempotent_and_canonical():
    spec = build("rotating_lift")
    text = serialize_spec(spec)
    again = serialize_spec(parse_spec_dict(json.loads(text)))
    assert again == text
    # keys are sorted so two structurally equal documents serialize equally
    assert text.index('"coordinates"') < text.index('"tensors"')


def test_bundled_models_carry_geometry():
    for name in ("flat", "rotating_lift", "transversal_leaf", "obstructed_lift", "shifted_lift"):
        spec = load(name)
        gd = spec.geometric_data()
        assert gd.conn.chart == spec.chart
        assert spec.action is not None
        assert spec.certificate_mode == "hamiltonian"
        assert spec.certificate_j


def test_get_box_default_and_named():
    spec = build("flat")
    box = spec.get_box()
    assert box["x1"] == (Fraction(-1, 2), Fraction(1, 2))
    assert spec.get_box("default") == box
    with pytest.raises(KeyError):
        spec.get_box("nope")
    # without a boxes table the implicit default covers every coordinate
    bare = parse_spec_dict(MINIMAL)
    assert bare.get_box()["y"] == (Fraction(-1, 2), Fraction(1, 2))


def test_unknown_fixture_name():
    with pytest.raises(KeyError):
        build("nope")


def test_missing_file_reports_a_diagnostic():
    with pytest.raises(SpecError) as exc:
        parse_spec("/definitely/not/here.json")
    assert _err_locations(exc) == ["$"]


def test_malformed_json_reports_the_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"coordinates": [,]}')
    with pytest.raises(SpecError) as exc:
        parse_spec(p)
    assert any(loc.startswith("line") for loc in _err_locations(exc))


def test_bad_coefficient_literal():
    doc = json.loads(json.dumps(MINIMAL))
    doc["tensors"]["pi"]["components"]["0,1"] = [["1.5", {}]]
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("tensors.pi" in loc for loc in _err_locations(exc))


def test_unknown_variable_in_monomial():
    doc = json.loads(json.dumps(MINIMAL))
    doc["tensors"]["pi"]["components"]["0,1"] = [["1", {"z": 1}]]
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("tensors.pi" in loc for loc in _err_locations(exc))


def test_degree_cap_applies_at_parse_time():
    doc = json.loads(json.dumps(MINIMAL))
    doc["tensors"]["pi"]["components"]["0,1"] = [["1", {"x": 13}]]
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("degree" in msg for _, msg in exc.value.diagnostics)


def test_bad_component_keys():
    for key in ("0", "1,0", "0,5", "0,0", "a,b"):
        doc = json.loads(json.dumps(MINIMAL))
        doc["tensors"]["pi"]["components"] = {key: [["1", {}]]}
        with pytest.raises(SpecError):
            parse_spec_dict(doc)


def test_bad_foliation_is_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["foliation"] = {"base": [0], "fiber": [0, 1]}
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("foliation" in loc for loc in _err_locations(exc))


def test_connection_shape_is_checked():
    doc = json.loads(json.dumps(MINIMAL))
    doc["foliation"] = {"base": [0], "fiber": [1]}
    doc["connection"] = [[[["1", {}]], [["1", {}]]]]
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("connection" in loc for loc in _err_locations(exc))


def test_action_plane_validation():
    doc = json.loads(json.dumps(MINIMAL))
    doc["action"] = {"circles": [{"planes": [[0, 7]], "weights": [1]}]}
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("action" in loc for loc in _err_locations(exc))


def test_certificate_mode_validation():
    doc = json.loads(json.dumps(MINIMAL))
    doc["action"] = {"circles": [{"planes": [[0, 1]], "weights": [1]}]}
    doc["certificate"] = {"mode": "psychic", "j": [[["1", {}]]]}
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("certificate" in loc for loc in _err_locations(exc))


def test_box_validation():
    doc = json.loads(json.dumps(MINIMAL))
    doc["boxes"] = {"default": {"x": ["-1", "1"]}}
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    # the y interval is missing
    assert any("boxes" in loc for loc in _err_locations(exc))
    doc["boxes"] = {"default": {"x": ["1", "-1"], "y": ["-1", "1"]}}
    with pytest.raises(SpecError):
        parse_spec_dict(doc)


def test_several_diagnostics_are_collected_at_once():
    doc = json.loads(json.dumps(MINIMAL))
    doc["tensors"]["pi"]["components"]["0,1"] = [["junk", {"z": 1}]]
    doc["seed"] = "soon"
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert len(exc.value.diagnostics) >= 2


def test_geometric_data_requires_the_coupling_pieces():
    spec = parse_spec_dict(MINIMAL)
    with pytest.raises(ValueError):
        spec.geometric_data()


def test_scalar_tensors_parse():
    doc = json.loads(json.dumps(MINIMAL))
    doc["tensors"]["f"] = {"kind": "scalar", "value": [["2/3", {"x": 2}]]}
    spec = parse_spec_dict(doc)
    f = spec.scalars["f"]
    x = RationalFn.var("x")
    assert f == (x * x).scale(Fraction(2, 3))
    # a scalar entry without a value is a located error, not a silent zero
    doc["tensors"]["f"] = {"kind": "scalar"}
    with pytest.raises(SpecError) as exc:
        parse_spec_dict(doc)
    assert any("tensors.f" in loc for loc in _err_locations(exc))
