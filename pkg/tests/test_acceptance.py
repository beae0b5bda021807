"""Acceptance suite: one test per release criterion, at its stated
tolerance. Run with ``pytest tests/test_acceptance.py -v`` to get one
pass/fail line per criterion.

The oracle-equivalence criterion runs against the in-memory reference
backend here; real backends join in automatically when reachable (see
test_live_backends.py).
"""

import math
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest
from click.testing import CliRunner

from stub_sysmon import StubStatusServer
from tsbench import engine
from tsbench.adapters import create_adapter, reference_evaluate, results_equal
from tsbench.adapters.base import QuerySpec, diff_results
from tsbench.cli import main as cli_main
from tsbench.generator import dump_records, generate_run_records
from tsbench.stats import compute_stats, rolling_rate, throughput_mb_per_s
from tsbench.workload import (
    AggFunc,
    QueryType,
    expand_runs,
    load_workload,
    parse_workload,
)

T0 = 1_640_995_200_000  # 2022-01-01T00:00:00Z
WORKLOADS = Path(__file__).parent.parent / "workloads"

MILLION_DOC = """<workload version="1">
  <target-database>Reference</target-database>
  <connection database="acceptance-million"/>
  <kind>Ingestion</kind>
  <day-span>15</day-span>
  <start-time>2022-01-01T00:00:00Z</start-time>
  <sensor-number>1000</sensor-number>
  <timestamp-granularity>1s</timestamp-granularity>
  <seed>424242</seed>
  <batch-size-options>1000</batch-size-options>
  <client-number-options>4</client-number-options>
  <stop batches-per-client="250"/>
</workload>
"""


@pytest.fixture(scope="module")
def million_run():
    """One seeded 4x250x1000 ingestion through the engine (10^6 records),
    plus the independently generated expected record multiset."""
    started = time.monotonic()
    definition = parse_workload(MILLION_DOC)
    plan = expand_runs(definition)[0]
    factory = lambda i: create_adapter(definition.target_database, definition.connection)
    summary, samples = engine.run_ingestion(plan, definition.stop_condition, factory)
    adapter = factory(0)
    expected_records = generate_run_records(definition, 4, 1000, 250)
    return {
        "definition": definition,
        "summary": summary,
        "samples": samples,
        "adapter": adapter,
        "expected_records": expected_records,
        "setup_seconds": time.monotonic() - started,
    }


def oracle_specs():
    # the engine data covers [T0, T0 + 1000 s); windows stay inside it
    minute = 60_000
    return [
        # 10 sensors x 10 min at 1 s granularity: 6000 raw rows
        QuerySpec(QueryType.Q1, T0 + 150_500, T0 + 750_500,
                  (0, 100, 250, 300, 500, 600, 750, 800, 900, 999)),
        QuerySpec(QueryType.Q2, T0 + 100_000, T0 + 460_000, (4,),
                  bucket_width_ms=minute, min_value=4e8, max_value=1.9e9),
        QuerySpec(QueryType.Q3, T0 + 100_000, T0 + 460_000, (3, 500, 999),
                  agg_func=AggFunc.AVERAGE),
        QuerySpec(QueryType.Q3, T0 + 100_000, T0 + 460_000, (3, 500, 999),
                  agg_func=AggFunc.STDDEV),
        QuerySpec(QueryType.Q4, T0 + 100_500, T0 + 700_500, (42, 900),
                  bucket_width_ms=minute, agg_func=AggFunc.AVERAGE),
        QuerySpec(QueryType.Q5, T0 + 100_500, T0 + 700_500, (3, 700),
                  bucket_width_ms=minute, agg_func=AggFunc.AVERAGE),
    ]


def test_criterion_oracle_equivalence_reference_backend(million_run):
    """Q1-Q5 over a seeded 10^6-record dataset equal the oracle:
    timestamps/ids exact, floats to 1e-9 relative, under 5 minutes."""
    adapter = million_run["adapter"]
    records = million_run["expected_records"]
    assert len(records) == 1_000_000
    started = time.monotonic()
    for spec in oracle_specs():
        got, elapsed = adapter.execute_query(spec)
        want = reference_evaluate(records, spec)
        assert results_equal(got, want, rel_tol=1e-9), (
            f"{spec.query_type.value}: {diff_results(got, want)}"
        )
        assert elapsed >= 0.0
        if spec.query_type is QueryType.Q1:
            assert len(got.rows) == 6000  # 10 sensors x 600 in-window samples
        elif spec.query_type is QueryType.Q3:
            assert len(got.rows) == 1
        else:
            assert len(got.rows) > 0
    total = million_run["setup_seconds"] + (time.monotonic() - started)
    assert total < 300.0, f"criterion took {total:.1f}s, budget is 5 minutes"


def test_criterion_ingestion_conservation(million_run):
    """4 clients x 250 batches x 1000 records: backend count and summary
    both exactly 1,000,000."""
    assert million_run["adapter"].count_records() == 1_000_000
    assert million_run["summary"].total_records == 1_000_000
    assert sum(s.records for s in million_run["samples"] if not s.failed) == 1_000_000


def test_criterion_statistics_oracle():
    """compute_stats matches the sorted-formula oracle on 10^4 random
    vectors: exact min/max/p95 rank, <=1e-12 relative mean/stddev."""
    rng = random.Random(20260810)
    for _ in range(10_000):
        n = rng.randint(1, 40)
        scale = 10.0 ** rng.randint(-6, 2)
        durations = [rng.uniform(0.0, scale) for _ in range(n)]
        got = compute_stats(durations)
        ordered = sorted(durations)
        mean = sum(ordered) / n
        stddev = (
            math.sqrt(sum((x - mean) ** 2 for x in ordered) / (n - 1)) if n > 1 else 0.0
        )
        assert got.min == ordered[0]
        assert got.max == ordered[-1]
        assert got.p95 == ordered[math.ceil(0.95 * n) - 1]
        assert got.mean == pytest.approx(mean, rel=1e-12, abs=0.0)
        assert got.stddev == pytest.approx(stddev, rel=1e-12, abs=1e-300)


def test_criterion_throughput_arithmetic_anchor():
    """Scaling-table anchors: 1278928 rec/s x 24 B = 30.69 MB/s and
    741688.5 rec/s x 24 B = 17.8 MB/s, each within 0.5%."""
    assert throughput_mb_per_s(1_278_928, 24) == pytest.approx(30.69, rel=0.005)
    assert throughput_mb_per_s(741_688.5, 24) == pytest.approx(17.8, rel=0.005)


def test_criterion_rolling_rate_conservation():
    """Sum of (bucket rate x bucket length) equals total records exactly
    on 100 randomized sample sets (exact rational arithmetic)."""

    class Sample:
        def __init__(self, start, elapsed, records, failed):
            self.start_offset_s = start
            self.elapsed_s = elapsed
            self.records = records
            self.failed = failed

    rng = random.Random(8080)
    for _ in range(100):
        samples = [
            Sample(
                rng.uniform(0, 600),
                rng.uniform(0, 60),
                rng.randint(0, 10**7),
                rng.random() < 0.05,
            )
            for _ in range(rng.randint(1, 200))
        ]
        series = rolling_rate(samples)
        conserved = sum(
            (b.rate_exact * Fraction(b.length_s) for b in series.buckets),
            start=Fraction(0),
        )
        expected = sum(s.records for s in samples if not s.failed)
        assert conserved == expected


def test_criterion_determinism_of_definition_plus_seed(tmp_path):
    """Same definition + seed: byte-identical generated data and
    identical expanded run plans."""
    doc = MILLION_DOC.replace("acceptance-million", "det-a").replace(
        "<client-number-options>4</client-number-options>",
        "<client-number-options>2</client-number-options>",
    ).replace('batches-per-client="250"', 'batches-per-client="5"')
    d1 = parse_workload(doc)
    d2 = parse_workload(doc)
    assert expand_runs(d1) == expand_runs(d2)

    dumps = []
    for definition in (d1, d2):
        budgets = engine.batch_budgets(definition.stop_condition, 1000, 2)
        records = generate_run_records(definition, 2, 1000, budgets)
        dumps.append(dump_records(records))
    assert dumps[0] == dumps[1]

    # and through the full engine path, stores end up identical
    stores = []
    for name in ("det-run-1", "det-run-2"):
        definition = parse_workload(doc.replace("det-a", name))
        plan = expand_runs(definition)[0]
        factory = lambda i, d=definition: create_adapter(d.target_database, d.connection)
        engine.run_ingestion(plan, definition.stop_condition, factory)
        ts, ids, values = factory(0).store.columns()
        rows = sorted(zip(ts.tolist(), ids.tolist(), values.tolist()))
        stores.append(dump_records([engine_record(*r) for r in rows]))
    assert stores[0] == stores[1]


def engine_record(ts, sensor_id, value):
    from tsbench.generator import SensorRecord

    return SensorRecord(ts, sensor_id, value)


@pytest.mark.parametrize("path", sorted(WORKLOADS.glob("*.xml")), ids=lambda p: p.stem)
def test_criterion_workload_grammar_corpus(path, tmp_path):
    """The committed experiment corpus parses and dry-runs cleanly."""
    definition = load_workload(path)
    plans = expand_runs(definition)
    assert len(plans) >= 1
    out = tmp_path / "out"
    result = CliRunner().invoke(
        cli_main, ["run", str(path), "--out", str(out), "--dry-run"]
    )
    assert result.exit_code == 0, result.output
    assert f"{len(plans)} run(s)" in result.output
    assert not out.exists()


def test_criterion_monitor_cadence_and_iowait_fixture():
    """60 s of monitoring at a 1 s period lands 59-61 snapshots against a
    stub endpoint, and the committed iowait fixture parses to 14.79."""
    from tsbench.sysmon import parse_snapshot, start_monitor

    fixture = (
        Path(__file__).parent / "fixtures" / "sysmon" / "v3_scaling_iowait.json"
    ).read_text()
    assert parse_snapshot(fixture).cpu_iowait_pct == 14.79

    with StubStatusServer([fixture]) as stub:
        monitor = start_monitor(stub.url, period_s=1.0)
        time.sleep(60.0)
        snapshots = monitor.stop()
    assert 59 <= len(snapshots) <= 61, f"got {len(snapshots)} snapshots"
    assert all(s.cpu_iowait_pct == 14.79 for s in snapshots)
