from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET

import pytest
from shapely.geometry import LineString, shape

from streetgen import io
from streetgen.engine import StreetModelStore, generate
from streetgen.errors import ExportError, NetworkParseError
from streetgen.network import RoadAxis, build_topology
from streetgen.synthetic import grid, ring


def _fc(*feats):
    return {"type": "FeatureCollection", "features": list(feats)}


def _line(fid, coords, **props):
    return {"type": "Feature", "id": fid, "geometry": {"type": "LineString", "coordinates": coords},
            "properties": props}


FULL = dict(width=8, importance="Major", speed=50, lanes=2, direction="Both", name="Rue A")


def test_load_two_features(tmp_path):
    p = tmp_path / "n.geojson"
    p.write_text(json.dumps(_fc(_line("a", [[0, 0], [10, 0]], **FULL), _line("b", [[10, 0], [10, 10]], **FULL))))
    axes, objects, warnings = io.load_network(p)
    assert [a.id for a in axes] == ["a", "b"] and warnings == [] and objects == []
    assert axes[0].half_width == 4.0 and axes[0].importance.value == "Major"


def test_missing_lanes_defaulted_with_warning(tmp_path):
    props = dict(FULL)
    del props["lanes"]
    p = tmp_path / "n.geojson"
    p.write_text(json.dumps(_fc(_line("a", [[0, 0], [10, 0]], **props))))
    (a,), _, warnings = io.load_network(p)
    assert a.lane_count == 2
    assert len(warnings) == 1 and warnings[0].startswith("a:") and "lanes" in warnings[0]


def test_polygon_rejected_run_continues(tmp_path):
    poly = {"type": "Feature", "id": "blk", "properties": {},
            "geometry": {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]}}
    p = tmp_path / "n.geojson"
    p.write_text(json.dumps(_fc(poly, _line("a", [[0, 0], [10, 0]], **FULL))))
    axes, _, warnings = io.load_network(p)
    assert [a.id for a in axes] == ["a"]
    assert any(w.startswith("blk:") and "Polygon" in w for w in warnings)


def test_malformed_file_reports_line(tmp_path):
    p = tmp_path / "bad.geojson"
    p.write_text('{"type": "FeatureCollection",\n "features": [\n  {"type": }\n]}')
    with pytest.raises(NetworkParseError, match="line 3"):
        io.load_network(p)
    p.write_text('{"type": "Feature"}')
    with pytest.raises(NetworkParseError, match="FeatureCollection"):
        io.load_network(p)


def test_point_objects(tmp_path):
    pt = {"type": "Feature", "id": "pc1", "geometry": {"type": "Point", "coordinates": [5, 0]},
          "properties": {"kind": "pedestrian_crossing", "host_edge": "a", "s": 5, "crossing_width": 2.5}}
    p = tmp_path / "n.geojson"
    p.write_text(json.dumps(_fc(_line("a", [[0, 0], [10, 0]], **FULL), pt)))
    _, (obj,), _ = io.load_network(p)
    assert obj.kind == "pedestrian_crossing" and obj.width == 2.5 and obj.host_edge == "a"


def test_network_round_trip(tmp_path):
    axes = grid(3, 3)
    io.write_network(axes, tmp_path / "g.geojson")
    back, _, warnings = io.load_network(tmp_path / "g.geojson")
    assert warnings == [] and back == sorted(axes, key=lambda a: a.id)


@pytest.fixture(scope="module")
def store5():
    store = StreetModelStore()
    generate(store, build_topology(grid(5, 5)))
    return store


def test_export_sections_count(store5, tmp_path):
    files = io.export_geojson(store5, tmp_path, ["sections", "lanes"])
    doc = json.loads(files[0].read_text())
    assert doc["type"] == "FeatureCollection" and doc["crs_local"] == io.LOCAL_CRS
    assert len(doc["features"]) == len(store5.topo.edges)
    f = doc["features"][0]
    assert f["properties"]["edge_id"] == f["id"] and shape(f["geometry"]).is_valid
    lanes = json.loads(files[1].read_text())
    assert len(lanes["features"]) == 2 * len(store5.topo.edges)


def test_export_three_decimals(store5, tmp_path):
    io.export_geojson(store5, tmp_path, ["intersections"])
    text = (tmp_path / "intersections.geojson").read_text()
    assert not re.search(r"\d\.\d{4,}", text.split('"features"')[1].replace('"properties"', ""))


def test_export_empty_store(tmp_path):
    for f in io.export_geojson(StreetModelStore(), tmp_path):
        assert json.loads(f.read_text())["features"] == []


def test_export_deterministic(tmp_path):
    out = []
    for k in range(2):
        s = StreetModelStore()
        generate(s, build_topology(grid(4, 4)))
        io.export_geojson(s, tmp_path / str(k))
        io.export_traffic_xml(s, tmp_path / str(k) / "t.xml")
        out.append({f.name: f.read_bytes() for f in (tmp_path / str(k)).iterdir()})
    assert out[0] == out[1]


def test_traffic_xml_four_way():
    axes = [RoadAxis(f"e{k}", LineString([(0, 0), p]), 4.0, lane_count=2)
            for k, p in enumerate([(40, 0), (0, 40), (-40, 0), (0, -40)])]
    store = StreetModelStore()
    generate(store, build_topology(axes))
    root = ET.fromstring(io.traffic_xml(store))
    assert root.tag == "network"
    center = [i for i in root.iter("intersection") if i.get("id") == "N0.000_0.000"][0]
    assert len(center.findall("interconnection")) == 12
    assert center.get("kind") == "plain"
    sec = root.find("sections/section")
    assert [g.get("dir") for g in sec.findall("lanegroup")] == ["fwd", "rev"]
    lane = sec.find("lanegroup/lane")
    assert list(lane.attrib) == ["id", "points"]
    assert re.fullmatch(r"(-?\d+\.\d{3},-?\d+\.\d{3} ?)+", lane.get("points"))


def test_traffic_xml_roundabout_kind():
    axes = ring(16, 12.0, center=(0.0, 0.0)) + [RoadAxis("spur", LineString([(12, 0), (60, 0)]), 3.0)]
    store = StreetModelStore()
    generate(store, build_topology(axes))
    root = ET.fromstring(io.traffic_xml(store))
    kinds = {i.get("id"): i.get("kind") for i in root.iter("intersection")}
    assert kinds["N12.000_0.000"] == "roundabout" and kinds["N60.000_0.000"] == "plain"


def test_traffic_xml_missing_lanes(store5):
    import copy
    s = copy.copy(store5)
    s.collections = {c: dict(v) for c, v in store5.collections.items()}
    del s.collections["lanes"]["h0_0"]
    with pytest.raises(ExportError, match="h0_0"):
        io.traffic_xml(s)


def test_state_round_trip(store5, tmp_path):
    io.save_state(store5, tmp_path / "s.pkl")
    back = io.load_state(tmp_path / "s.pkl")
    assert back.digests() == store5.digests()
    (tmp_path / "junk.pkl").write_bytes(b"nope")
    with pytest.raises(NetworkParseError):
        io.load_state(tmp_path / "junk.pkl")
