from __future__ import annotations

import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import LineString
from sklearn.cluster import KMeans

from streetgen import engine
from streetgen.engine import (
    StreetModelStore, acquire, add_objects, content_hash, delete_axis, generate, kmeans,
    partition_axes, release, run_workers, update_network,
)
from streetgen.errors import InvalidParameter, NotFound
from streetgen.network import RoadAxis, build_topology
from streetgen.objects import PedestrianCrossing, StreetObject
from streetgen.synthetic import grid


@pytest.fixture(scope="module")
def grid5():
    axes = grid(5, 5)
    topo = build_topology(axes)
    store = StreetModelStore()
    rep = generate(store, topo)
    assert rep.ok
    return axes, topo, store


def _fresh(axes):
    topo = build_topology(axes)
    store = StreetModelStore()
    generate(store, topo)
    return topo, store


def _widen(axes, aid, hw=6.0):
    return [a.with_changes(half_width=hw) if a.id == aid else a for a in axes]


def test_full_build_cardinalities(grid5):
    _, topo, store = grid5
    d = store.digests()
    assert len(d["sections"]) == len(d["lanes"]) == len(topo.edges) == 40
    assert len(d["junctions"]) == len(d["intersections"]) == len(topo.nodes) == 25
    assert len(d["blocks"]) == 16
    assert store.stats["junction_solves"] == 25


def test_regenerate_is_idempotent(grid5):
    _, topo, store = grid5
    before = store.digests()
    rep = generate(store, topo)
    assert rep.ok and rep.empty
    assert store.digests() == before


def test_sections_and_intersections_tile_the_roads(grid5):
    _, topo, store = grid5
    secs = store.values("sections")
    inters = store.values("intersections")
    for eid, sec in secs.items():
        assert sec.polygon.is_valid and not sec.polygon.is_empty
        for n in (topo.edges[eid].start, topo.edges[eid].end):
            assert sec.polygon.intersection(inters[n].polygon).area < 1e-6
    for blk in store.values("blocks").values():
        for sec in secs.values():
            assert blk.polygon.intersection(sec.polygon).area < 1e-6


def test_incremental_equals_full():
    axes = grid(6, 6)
    topo, store = _fresh(axes)
    new_axes = _widen(axes, "h2_2")
    rep = update_network(store, build_topology(new_axes))
    assert rep.ok
    assert "h2_2" in rep.updated["sections"]
    assert set(rep.updated["junctions"]) == {topo.edges["h2_2"].start, topo.edges["h2_2"].end}
    _, ref = _fresh(new_axes)
    assert store.digests() == ref.digests()


def test_report_lists_only_changes():
    axes = grid(5, 5)
    topo, store = _fresh(axes)
    rep = update_network(store, build_topology(_widen(axes, "v2_1")))
    assert rep.ok and not any(rep.added.values()) and not any(rep.removed.values())
    assert rep.count() < 40


@pytest.mark.parametrize("stage", ["junctions", "intersections", "sections", "lanes",
                                   "interconnections", "objects", "blocks", "roundabouts", "validate"])
def test_fault_injection_leaves_store_unchanged(stage):
    axes = grid(4, 4)
    _, store = _fresh(axes)
    before = store.digests()
    topo_before = store.topo

    def hook(name, staged):
        if name == stage:
            raise RuntimeError("injected")

    rep = update_network(store, build_topology(_widen(axes, "h1_1")), hooks=hook)
    assert not rep.ok and "store unchanged" in rep.diagnostics[-1]
    assert store.digests() == before and store.topo is topo_before


def test_validation_rejects_dangling_references():
    axes = grid(4, 4)
    topo, store = _fresh(axes)
    before = store.digests()

    def corrupt(name, staged):
        if name == "sections":
            staged.values["sections"]["ghost"] = next(iter(staged.values["sections"].values()))

    rep = update_network(store, build_topology(_widen(axes, "h1_1")), hooks=corrupt)
    assert not rep.ok and "ghost" in rep.diagnostics[-1]
    assert store.digests() == before


def test_delete_axis_cascades():
    axes = grid(4, 4)
    topo, store = _fresh(axes)
    add_objects(store, [StreetObject("bench1", "bench", "AxisRelative", host_edge="h1_1", s=20.0)])
    assert store.get("objects", "bench1") is not None
    rep, new_topo = delete_axis(store, topo, "h1_1")
    assert rep.ok
    assert "h1_1" in rep.removed["sections"] and "h1_1" in rep.removed["lanes"]
    assert "bench1" in rep.removed["objects"]
    live_edges, live_nodes = set(new_topo.edges), set(new_topo.nodes)
    assert set(store.values("sections")) == live_edges
    assert set(store.values("intersections")) <= live_nodes
    _, ref = _fresh([a for a in axes if a.id != "h1_1"])
    for c in ("sections", "intersections", "junctions", "blocks"):
        assert store.digests()[c] == ref.digests()[c]
    with pytest.raises(NotFound):
        delete_axis(store, new_topo, "h1_1")


def test_objects_follow_their_host():
    axes = grid(4, 4)
    topo, store = _fresh(axes)
    pc = PedestrianCrossing(id="pc", position_mode="AxisRelative", host_edge="h1_1", s=25.0, width=3.0)
    rep = add_objects(store, [pc])
    pose = store.get("objects", "pc")
    assert rep.ok and pose.point == pytest.approx((75.0, 50.0))
    assert pose.surface.area == pytest.approx(3.0 * 8.0, rel=0.01)
    rep = update_network(store, build_topology(_widen(axes, "h1_1", 5.0)))
    assert "pc" in rep.updated["objects"]
    assert store.get("objects", "pc").surface.area == pytest.approx(3.0 * 10.0, rel=0.01)


def test_scope_must_exist(grid5):
    _, topo, store = grid5
    rep = generate(store, topo, ["nope"])
    assert not rep.ok


def test_acquire_release():
    store = StreetModelStore()
    assert acquire(store, ["a", "b"], "t1") == {"a", "b"}
    assert acquire(store, ["b", "c"], "t2") == {"c"}
    assert acquire(store, ["a"], "t1") == {"a"}
    assert release(store, "t1") == {"a", "b"}
    assert acquire(store, ["a", "b", "c"], "t2") == {"a", "b", "c"}
    with pytest.raises(InvalidParameter):
        acquire(store, ["x"], "")


def test_partition_errors():
    axes = grid(3, 3)
    with pytest.raises(InvalidParameter):
        partition_axes(axes, 0)
    with pytest.raises(InvalidParameter):
        partition_axes(axes, len(axes) + 1)


def test_partition_is_a_partition_and_deterministic():
    axes = grid(6, 6)
    parts = partition_axes(axes, 4, seed=3)
    flat = sorted(a for p in parts for a in p)
    assert flat == sorted(a.id for a in axes)
    assert all(parts)
    assert partition_axes(axes, 4, seed=3) == parts


def test_kmeans_matches_reference_on_separated_blobs():
    rng = np.random.default_rng(1)
    centers = np.array([[0, 0], [100, 0], [0, 100], [100, 100]])
    pts = np.vstack([c + rng.normal(0, 3, (40, 2)) for c in centers])
    ours = kmeans(pts, 4, seed=0)
    ref = KMeans(4, n_init=10, random_state=0).fit_predict(pts)
    # same partition up to label permutation
    pairs = set(zip(ours.tolist(), ref.tolist()))
    assert len(pairs) == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 1000), st.data())
def test_kmeans_clusters_never_empty(n, seed, data):
    k = data.draw(st.integers(1, n))
    pts = np.random.default_rng(seed).random((n, 2)) * 10
    pts[: n // 2] = pts[0]  # duplicates stress the refill
    labels = kmeans(pts, k, seed)
    assert sorted(set(labels.tolist())) == list(range(k))


def test_threads_match_single_worker():
    axes = grid(5, 5)
    topo, ref = _fresh(axes)
    store = StreetModelStore()
    processed = run_workers(store, topo, 3, seed=7, clusters=5)
    seen = [a for s in processed.values() for a in s]
    assert len(seen) == len(set(seen)) == len(topo.axes)
    assert store.digests() == ref.digests()
    assert store.ledger == {}


def test_parallel_processes_match_single_worker():
    axes = grid(5, 5)
    topo, ref = _fresh(axes)
    store = StreetModelStore()
    rep = engine.build_parallel(store, topo, 2)
    assert rep.ok
    assert store.digests() == ref.digests()


def test_store_pickles(grid5):
    _, _, store = grid5
    back = pickle.loads(pickle.dumps(store))
    assert back.digests() == store.digests()
    assert acquire(back, ["x"], "t") == {"x"}


def test_content_hash_stable():
    a = RoadAxis("a", LineString([(0, 0), (1, 0)]), 2.0)
    assert content_hash(a) == content_hash(RoadAxis("a", LineString([(0, 0), (1, 0)]), 2.0))
    assert content_hash(a) != content_hash(a.with_changes(half_width=2.5))
    assert content_hash({"x": 1.0, "y": (1, 2)}) == content_hash({"y": (1, 2), "x": 1.0})
