"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; every tolerance and runtime bound is asserted, not just printed.
"""

from __future__ import annotations

import json
import random
import statistics
import time
from contextlib import contextmanager
from itertools import permutations
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from biznet import CompositeKey, Engine, EngineConfig
from biznet.api import create_app
from biznet.kernels import tokenize
from biznet.provenance import check_round_trip
from biznet.store import contributable_fields
from biznet.surrogate import SourcePriorityConfig, compute_surrogate, order_members

from .conftest import RECON_LINES, RECON_ORIGIN, record_line, same_line, write_source
from .oracles import bfs_neighbors, linear_scan_search, select_fields_brute_force


@contextmanager
def criterion(name: str, budget_seconds: float):
    started = time.perf_counter()
    yield
    elapsed = time.perf_counter() - started
    assert elapsed < budget_seconds, f"{name}: {elapsed:.2f}s over {budget_seconds}s budget"
    print(f"ACCEPTANCE {name}: PASS ({elapsed:.2f}s)")


def fresh_engine(tmp_path: Path, name: str = "sources") -> Engine:
    source_dir = tmp_path / name
    source_dir.mkdir(parents=True, exist_ok=True)
    return Engine(EngineConfig(source_dir=source_dir))


# -- export normalization ----------------------------------------------------
# bn ids depend on allocation order; the class fingerprint (the sorted set of
# lineage sources) does not, so exports are compared after relabeling.


def normalize_export(export: dict) -> dict:
    fingerprint: dict[str, tuple] = {}
    for entry in export["mappings"]:
        fingerprint.setdefault(entry["bn_id"], ())
    by_bn: dict[str, list[str]] = {}
    for entry in export["mappings"]:
        by_bn.setdefault(entry["bn_id"], []).append(entry["source"])
    for bn_id, sources in by_bn.items():
        fingerprint[bn_id] = tuple(sorted(sources))

    rename: dict[str, str] = {}
    for kind_prefix in ("participant", "host", "mflow"):
        group = sorted(
            (fp for bn, fp in fingerprint.items() if bn.startswith(kind_prefix + ":")),
        )
        for i, fp in enumerate(group, start=1):
            bn = next(b for b, f in fingerprint.items() if f == fp and b.startswith(kind_prefix))
            rename[bn] = f"{kind_prefix}~{i}"

    def rn(bn_id):
        return rename.get(bn_id, bn_id)

    doc = {
        "entities": sorted(
            ({**e, "bn_id": rn(e["bn_id"])} for e in export["entities"]),
            key=lambda e: e["bn_id"],
        ),
        "flows": sorted(
            (
                {**f, "bn_id": rn(f["bn_id"]), "source": rn(f["source"]), "target": rn(f["target"])}
                for f in export["flows"]
            ),
            key=lambda f: f["bn_id"],
        ),
        "runs_on": sorted(
            ({"participant": rn(r["participant"]), "host": rn(r["host"])} for r in export["runs_on"]),
            key=lambda r: (r["participant"], r["host"]),
        ),
        "mappings": sorted(
            ({"source": m["source"], "bn_id": rn(m["bn_id"])} for m in export["mappings"]),
            key=lambda m: (m["bn_id"], m["source"]),
        ),
    }
    return doc


def dump_origin_snapshot(engine: Engine, origin: str) -> list[str]:
    """Serialize an origin's current raw records back into snapshot lines."""
    lines = []
    for record in sorted(engine.store.records(), key=lambda r: r.key.sort_key):
        if record.key.origin != origin:
            continue
        if record.kind.startswith("same_"):
            lines.append(json.dumps(
                {"kind": record.kind, "origin": origin, "ids": record.same_ids}
            ))
            continue
        doc = {"kind": record.kind, "origin": origin, "fields": dict(record.fields)}
        if record.key.local_id is not None:
            doc["id"] = record.key.local_id
        lines.append(json.dumps(doc))
    return lines


# -----------------------------------------------------------------------------


def test_inbound_merge_fixture(tmp_path):
    with criterion("inbound-merge", 1.0):
        engine = fresh_engine(tmp_path)
        engine.ingest("originH7", [record_line("sys", "originH7", "h7", description="")], "delta")
        engine.ingest("originH7", [record_line("sys", "originH7", "h7", description="myH7")], "delta")
        records = [r for r in engine.store.records()]
        assert len(records) == 1
        assert records[0].fields == {"description": "myH7"}
        assert records[0].key.local_id == "h7"


def test_key_mapping_fixture(tmp_path):
    with criterion("key-mapping", 1.0):
        engine = fresh_engine(tmp_path)
        engine.ingest("originH7", [record_line("sys", "originH7", "h7", description="myH7")], "full")
        export = engine.export_doc()
        entry = next(m for m in export["mappings"] if m["source"] == "sys:h7@originH7")
        assert entry["bn_id"].startswith("participant:")
        lineage = engine.lineage_doc(entry["bn_id"])
        assert lineage["transformation"] == "black-box"
        assert lineage["sources"] == ["sys:h7@originH7"]


def test_reconstruction_fixture(tmp_path):
    with criterion("network-reconstruction", 1.0):
        engine = fresh_engine(tmp_path)
        engine.ingest(RECON_ORIGIN, RECON_LINES, "full")

        flows = [e for e in engine.entities.values() if e.kind == "MessageFlow"]
        assert len(flows) == 1
        flow_lineage = engine.lineage_doc(flows[0].bn_id)
        assert flow_lineage["transformation"] == "aggregator"
        assert sorted(s.split(":")[0] for s in flow_lineage["sources"]) == ["out", "rsys"]

        p1 = engine.lineage_doc(engine.resolve("app2"))
        assert p1["transformation"] == "black-box"
        assert p1["sources"] == [f"sys:h2@{RECON_ORIGIN}"]

        p2 = engine.lineage_doc(engine.resolve("app3"))
        assert p2["transformation"] == "aggregator"
        assert sorted(s.split(":")[0] for s in p2["sources"]) == ["prop", "sys", "sys"]
        participants = [e for e in engine.entities.values() if e.kind == "Participant"]
        assert len(participants) == 2


def test_surrogate_oracle_suite(tmp_path):
    field_names = ["description", "location", "owner", "tier", "zone", "note"]
    rng = random.Random(20130101)
    with criterion("surrogate-oracle-1000", 30.0):
        mismatches = 0
        for case in range(1000):
            n_members = rng.randint(1, 8)
            records = []
            for i in range(n_members):
                origin = f"o{rng.randint(1, 4)}"
                fields = {
                    name: rng.choice(["", f"v{rng.randint(1, 5)}"])
                    for name in rng.sample(field_names, rng.randint(0, 6))
                }
                from biznet.store import RawRecord
                records.append(RawRecord(
                    CompositeKey(origin, local_id=f"m{i}"),
                    "sys",
                    {k: v for k, v in fields.items() if v},
                    0,
                ))
            config = SourcePriorityConfig(
                types=tuple(rng.sample(["landscape", "runtime", "configuration"], rng.randint(0, 3))),
                origins={f"o{i}": rng.choice(["landscape", "runtime", "configuration", "x"]) for i in range(1, 5)},
                overrides=(
                    {records[rng.randrange(n_members)].key.instance_ref: rng.randint(1, 3)}
                    if rng.random() < 0.3 else {}
                ),
            )
            surrogate = compute_surrogate("c", records, config)
            order = [r.key for r in order_members(records, config)]
            expected = select_fields_brute_force(
                [(r.key, dict(r.fields)) for r in records], order
            )
            if surrogate.values != {n: v for n, (v, _) in expected.items()}:
                mismatches += 1
            elif any(surrogate.contributions[n] != c for n, (_, c) in expected.items()):
                mismatches += 1
        assert mismatches == 0


def _random_operation(rng: random.Random, engine: Engine, origins, ids):
    op = rng.random()
    origin = rng.choice(origins)
    if op < 0.45:  # ingest/update some records
        lines = []
        for _ in range(rng.randint(1, 4)):
            kind = rng.choice(["sys", "sys", "host", "prop", "out", "rsys", "runs_on"])
            local = rng.choice(ids)
            if kind == "sys":
                lines.append(record_line("sys", origin, local,
                                         description=rng.choice(["", "alpha", "beta", "gamma"]),
                                         location=rng.choice(["", "Sydney", "Berlin"])))
            elif kind == "host":
                lines.append(record_line("host", origin, "m" + local, description=f"host-{local}"))
            elif kind == "prop":
                lines.append(record_line("prop", origin, None,
                                         target=rng.choice(ids),
                                         key="zone", value=rng.choice(["z1", "z2"])))
            elif kind == "out":
                lines.append(record_line("out", origin, "o" + local,
                                         **{"from": rng.choice(ids), "to": rng.choice(ids),
                                            "channel": rng.choice(["XI", "HTTP"])}))
            elif kind == "rsys":
                lines.append(record_line("rsys", origin, "r" + local, sys=rng.choice(ids)))
            else:
                lines.append(record_line("runs_on", origin, "e" + local,
                                         sys=rng.choice(ids), host="m" + rng.choice(ids)))
        engine.ingest(origin, lines, "delta")
        return ("ingest-delta", origin)
    if op < 0.7:  # full snapshot that may delete
        keep = [
            record_line("sys", origin, local, description=f"d{local}")
            for local in rng.sample(ids, rng.randint(0, len(ids) - 1))
        ]
        if rng.random() < 0.5:
            keep.append(same_line("same_sys", origin, rng.sample(ids, 2)))
        engine.ingest(origin, keep, "full")
        return ("ingest-full", origin)
    # user assertion, possibly cross-origin
    a = CompositeKey(rng.choice(origins), local_id=rng.choice(ids))
    b = CompositeKey(rng.choice(origins), local_id=rng.choice(ids))
    if a != b:
        engine.assert_same(a, b)
        return ("assert", a, b)
    return ("noop",)


def test_incremental_equals_batch(tmp_path):
    rng = random.Random(777)
    with criterion("incremental-equals-batch-200", 60.0):
        mismatches = 0
        non_trivial = 0
        for seq in range(200):
            engine = fresh_engine(tmp_path, f"inc{seq}")
            origins = ["oA", "oB"]
            ids = ["x1", "x2", "x3", "x4"]
            for _ in range(rng.randint(2, 7)):
                _random_operation(rng, engine, origins, ids)

            batch = fresh_engine(tmp_path, f"batch{seq}")
            for origin in origins:
                batch.ingest(origin, dump_origin_snapshot(engine, origin), "full")
            for assertion in engine.user_assertions:
                batch.assert_same(assertion.member_a, assertion.member_b)

            incremental = normalize_export(engine.export_doc())
            recomputed = normalize_export(batch.export_doc())
            if incremental != recomputed:
                mismatches += 1
            if engine.store.canonical_dump() != batch.store.canonical_dump():
                mismatches += 1
            if len(incremental["entities"]) >= 2:
                non_trivial += 1
        assert mismatches == 0
        assert non_trivial >= 100, f"only {non_trivial} sequences built real networks"


LOAD_ORDER_SNAPSHOTS = {
    "mwA": [
        record_line("sys", "mwA", "a1", description="Alpha"),
        record_line("sys", "mwA", "a2", description="EdgeNode"),
        record_line("out", "mwA", "oa", **{"from": "a1", "to": "mwB::b1", "channel": "XI"}),
    ],
    "mwB": [
        record_line("sys", "mwB", "b1", description="Beta"),
        record_line("prop", "mwB", None, target="mwA::a1", key="location", value="Sydney"),
        same_line("same_sys", "mwB", ["b1", "mwA::a2"]),
    ],
    "mwC": [
        record_line("host", "mwC", "c1", description="Machine1"),
        record_line("runs_on", "mwC", "rc", sys="mwA::a1", host="c1"),
        record_line("rsys", "mwC", "rs", sys="mwB::b1"),
    ],
}


def test_load_order_independence(tmp_path):
    with criterion("load-order-independence", 10.0):
        exports = []
        for perm in permutations(LOAD_ORDER_SNAPSHOTS):
            engine = fresh_engine(tmp_path, "perm-" + "-".join(perm))
            for origin in perm:
                engine.ingest(origin, LOAD_ORDER_SNAPSHOTS[origin], "full")
            exports.append(json.dumps(normalize_export(engine.export_doc()), sort_keys=True))
        assert len(set(exports)) == 1, "permutations diverge"


def test_deletion_fallback(tmp_path):
    rng = random.Random(31337)
    with criterion("deletion-fallback-100", 30.0):
        for case in range(100):
            engine = fresh_engine(tmp_path, f"del{case}")
            n = rng.randint(2, 5)
            hub_ids = []
            for i in range(n):
                origin = f"src{i}"
                engine.ingest(origin, [
                    record_line("sys", origin, f"s{i}",
                                description=rng.choice(["", f"desc{i}"]),
                                location=rng.choice(["", f"loc{i}"])),
                ], "full")
                hub_ids.append(f"src{i}::s{i}")
            engine.ingest("hub", [same_line("same_sys", "hub", hub_ids)], "full")

            cid = engine.partition.class_id_of(CompositeKey("src0", local_id="s0"))
            surrogate = engine.surrogates[cid]
            leader = surrogate.leading_member
            # the source deletes the leading record
            engine.ingest(leader.origin, [], "full")

            remaining = [
                engine.store.get(CompositeKey(f"src{i}", local_id=f"s{i}"))
                for i in range(n)
                if f"src{i}" != leader.origin
            ]
            cid2 = engine.partition.class_id_of(remaining[0].key)
            got = engine.surrogates[cid2]
            order = [r.key for r in order_members(remaining, engine.config.priorities)]
            expected = select_fields_brute_force(
                [(r.key, contributable_fields(r)) for r in remaining], order
            )
            assert got.values == {n_: v for n_, (v, _) in expected.items()}, f"case {case}"
            assert got.leading_member == order[0]

        # emptying a class removes the entity, mappings, incident flows, labels
        engine = fresh_engine(tmp_path, "cascade")
        engine.ingest("o1", [
            record_line("sys", "o1", "a", description="A"),
            record_line("sys", "o1", "b", description="B"),
            record_line("out", "o1", "oab", **{"from": "a", "to": "b"}),
            record_line("host", "o1", "m", description="M"),
            record_line("runs_on", "o1", "r", sys="a", host="m"),
        ], "full")
        a_bn = engine.resolve("A")
        engine.add_label(a_bn, "critical")
        engine.ingest("o1", [
            record_line("sys", "o1", "b", description="B"),
            record_line("host", "o1", "m", description="M"),
        ], "full")
        assert a_bn not in engine.entities
        assert not [e for e in engine.entities.values() if e.kind == "MessageFlow"]
        assert engine.runs_on == []
        assert engine.enrichments == {}, "orphaned label"
        assert engine.lineage.reverse_lookup(CompositeKey("o1", "a")) == set()
        assert not any(m["bn_id"] == a_bn for m in engine.export_doc()["mappings"])


def test_lineage_round_trip(tmp_path):
    with criterion("lineage-round-trip", 10.0):
        fixtures = [RECON_LINES, LOAD_ORDER_SNAPSHOTS["mwA"] + LOAD_ORDER_SNAPSHOTS["mwB"]]
        engine = fresh_engine(tmp_path)
        engine.ingest(RECON_ORIGIN, RECON_LINES, "full")
        check_round_trip(engine.lineage)

        multi = fresh_engine(tmp_path, "multi")
        for origin, lines in LOAD_ORDER_SNAPSHOTS.items():
            multi.ingest(origin, lines, "full")
        check_round_trip(multi.lineage)

        # completeness: every record of an inferable, non-orphaned class and
        # every flow witness appears in some lineage record
        for eng in (engine, multi):
            traced = set()
            for record in eng.lineage.all_records():
                traced |= set(record.sources)
            for raw in eng.store.records():
                cid = eng.partition.class_id_of(raw.key)
                if cid is not None and eng.backing_entity.get(cid):
                    assert f"{raw.kind}:{raw.key}" in traced


def test_enhancement_precedence_and_write_back(tmp_path):
    with criterion("enhancement-write-back", 10.0):
        root = tmp_path / "sources"
        base = [
            record_line("sys", "originH7", "h7", description="myH7"),
            record_line("sys", "originH7", "h8"),
            same_line("same_sys", "originH7", ["h7", "h8"]),
        ]
        write_source(root, "originH7", base)
        engine = Engine(EngineConfig(source_dir=root))
        engine.load_source("originH7")

        enh = engine.enhance_modify("myH7", "description", "pinnedName")
        bn_id = engine.resolve("pinnedName")

        for i in range(3):  # user value survives three reloads
            write_source(root, "originH7", [
                record_line("sys", "originH7", "h7", description=f"discovered{i}"),
                record_line("sys", "originH7", "h8"),
                same_line("same_sys", "originH7", ["h7", "h8"]),
            ], seq=2 + i)
            engine.load_source("originH7")
            assert engine.entities[bn_id].attributes["description"] == "pinnedName"
            assert engine.lineage.trace_field(bn_id, "description") == "user-enhancement"

        deployed = engine.deploy(enh["enhancement_id"])
        assert deployed["status"] == "deployed"
        engine.load_source("originH7")
        assert engine.entities[bn_id].attributes["description"] == "pinnedName"
        assert engine.lineage.trace_field(bn_id, "description") == "sys:h7@originH7"


def _build_random_network(engine: Engine, rng: random.Random, scale: int):
    lines = []
    terms = ["erp", "crm", "billing", "edge", "core", "legacy", "sydney", "berlin", "tokyo"]
    for i in range(scale):
        lines.append(record_line(
            "sys", "gen", f"s{i}",
            description=f"{rng.choice(terms)} {rng.choice(terms)} {i}",
            location=rng.choice(["Sydney", "Berlin", "Tokyo", ""]),
        ))
    for i in range(scale // 2):
        lines.append(record_line("host", "gen", f"m{i}", description=f"host {rng.choice(terms)} {i}"))
        lines.append(record_line("runs_on", "gen", f"r{i}", sys=f"s{rng.randrange(scale)}", host=f"m{i}"))
    for i in range(scale // 2):
        a, b = rng.randrange(scale), rng.randrange(scale)
        if a != b:
            lines.append(record_line("out", "gen", f"o{i}",
                                     **{"from": f"s{a}", "to": f"s{b}",
                                        "channel": rng.choice(["XI", "HTTP", "IDOC"])}))
    engine.ingest("gen", lines, "full")


def test_query_oracle_suite(tmp_path):
    rng = random.Random(60622)
    with criterion("query-oracle-500", 30.0):
        engine = fresh_engine(tmp_path)
        _build_random_network(engine, rng, 300)  # <= 1000 entities
        assert len(engine.entities) <= 1000

        entities_doc = {
            bn: {"kind": e.kind, "attributes": dict(e.attributes)}
            for bn, e in engine.entities.items()
        }
        tokens_of = {
            bn: {t for text in [e.name, *e.attributes.values()] for t in tokenize(text)}
            for bn, e in engine.entities.items()
        }
        flow_edges = [
            (e.source, e.target)
            for e in engine.entities.values()
            if e.kind == "MessageFlow"
        ]
        terms = ["erp", "crm sydney", "billing 5", "edge core", "zzz", None]
        kinds = [None, "Participant", "Host"]
        filters = [{}, {"location": "sydney"}, {"location": "Berlin"}, {"channel": "XI"}]

        for q in range(500):
            mode = q % 3
            if mode == 0:
                term, type_, filt = rng.choice(terms), rng.choice(kinds), rng.choice(filters)
                if term is None and type_ is None and not filt:
                    term = "erp"
                got = [r["bn_id"] for r in engine.search_doc(term, type_, filt)["results"]]
                expected = linear_scan_search(
                    entities_doc, tokens_of, tokenize(term) if term else [], type_, filt
                )
                assert got == expected, (term, type_, filt)
            elif mode == 1:
                bn = rng.choice(sorted(engine.entities))
                doc = engine.project_doc(bn, ["meta", "host.name"])
                hosts = {
                    h for p, h in engine.runs_on if p == bn
                }
                assert sorted(doc["host.name"]) == sorted(
                    engine.entities[h].name for h in hosts
                )
            else:
                participants = [b for b, e in engine.entities.items() if e.kind == "Participant"]
                bn = rng.choice(participants)
                got = {e["bn_id"] for e in engine.neighbors_doc(bn)}
                assert got == bfs_neighbors(bn, flow_edges, hops=1)

        # documented URL shapes
        url_engine = fresh_engine(tmp_path, "urls")
        url_engine.ingest("o1", [
            record_line("sys", "o1", "sys1", description="system1", location="Sydney"),
            record_line("sys", "o1", "sys2", description="system2"),
            record_line("host", "o1", "m1", description="hostA", location="Sydney"),
            record_line("runs_on", "o1", "r1", sys="sys1", host="m1"),
            record_line("out", "o1", "o12", **{"from": "sys2", "to": "sys1"}),
        ], "full")
        client = TestClient(create_app(url_engine), raise_server_exceptions=False)

        res = client.get("/search", params={"query": "hostA", "type": "Host"})
        assert res.status_code == 200
        assert all(r["kind"] == "Host" for r in res.json()["results"])
        assert res.json()["results"]

        res = client.get("/search", params={"location": "Sydney"})
        assert {r["name"] for r in res.json()["results"]} == {"system1", "hostA"}

        res = client.get("/SYSTEM1/", params={"show": "meta,location,host.name"})
        doc = res.json()
        assert doc["meta"]["name"] == "system1"
        assert doc["location"] == "Sydney"
        assert doc["host.name"] == ["hostA"]

        res = client.get("/SYSTEM2/neighbors/host/")
        assert [e["name"] for e in res.json()] == ["hostA"]


@pytest.mark.slow
def test_throughput_sanity(tmp_path):
    rng = random.Random(8128)
    with criterion("search-p95-under-50ms-at-10k", 120.0):
        engine = fresh_engine(tmp_path)
        _build_random_network(engine, rng, 5200)
        assert len(engine.entities) >= 10_000, len(engine.entities)

        terms = ["erp", "crm", "sydney berlin", "billing core", "edge 42", "legacy tokyo"]
        latencies = []
        for i in range(500):
            term = rng.choice(terms)
            type_ = rng.choice([None, "Participant", "Host"])
            started = time.perf_counter()
            engine.search_doc(term, type_, None, 0, 50)
            latencies.append(time.perf_counter() - started)
        p95 = statistics.quantiles(latencies, n=20)[-1]
        print(f"    10k-entity search p95 = {p95 * 1000:.2f} ms")
        assert p95 < 0.050, f"p95 {p95 * 1000:.1f} ms >= 50 ms"
