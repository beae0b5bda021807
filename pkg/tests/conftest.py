import pytest

from tsbench.adapters.reference import reset_shared_stores
from tsbench.workload import parse_workload


@pytest.fixture(autouse=True)
def isolated_reference_stores():
    """Each test sees fresh in-memory reference backends."""
    reset_shared_stores()
    yield
    reset_shared_stores()


INGESTION_TEMPLATE = """<workload version="1">
  <target-database>Reference</target-database>
  <connection database="{database}"/>
  <kind>Ingestion</kind>
  <day-span>{day_span}</day-span>
  <start-time>2022-01-01T00:00:00Z</start-time>
  <sensor-number>{sensors}</sensor-number>
  <timestamp-granularity>{granularity}</timestamp-granularity>
  <seed>{seed}</seed>
  <batch-size-options>{batches}</batch-size-options>
  <client-number-options>{clients}</client-number-options>
  <stop {stop}/>
</workload>
"""

QUERY_TEMPLATE = """<workload version="1">
  <target-database>Reference</target-database>
  <connection database="{database}"/>
  <kind>Query</kind>
  <day-span>{day_span}</day-span>
  <start-time>2022-01-01T00:00:00Z</start-time>
  <sensor-number>{sensors}</sensor-number>
  <timestamp-granularity>{granularity}</timestamp-granularity>
  <seed>{seed}</seed>
  <query-type>{query_type}</query-type>
  <test-retries>{retries}</test-retries>
  <duration-minutes>{duration_minutes}</duration-minutes>
  <aggregation-interval>{agg_interval}</aggregation-interval>
  <aggregation-function>{agg_func}</aggregation-function>
  <sensors-filter>{filter}</sensors-filter>
  {extra}
</workload>
"""


def make_ingestion_definition(
    *,
    database="testdb",
    day_span=1,
    sensors=10,
    granularity="1s",
    seed=7,
    batches="100",
    clients="1",
    stop='batches-per-client="3"',
):
    return parse_workload(
        INGESTION_TEMPLATE.format(
            database=database,
            day_span=day_span,
            sensors=sensors,
            granularity=granularity,
            seed=seed,
            batches=batches,
            clients=clients,
            stop=stop,
        )
    )


def make_query_definition(
    *,
    database="testdb",
    day_span=1,
    sensors=10,
    granularity="1s",
    seed=7,
    query_type="Q1",
    retries=3,
    duration_minutes=10,
    agg_interval="1h",
    agg_func="Average",
    sensors_filter="0,1",
    extra="",
):
    return parse_workload(
        QUERY_TEMPLATE.format(
            database=database,
            day_span=day_span,
            sensors=sensors,
            granularity=granularity,
            seed=seed,
            query_type=query_type,
            retries=retries,
            duration_minutes=duration_minutes,
            agg_interval=agg_interval,
            agg_func=agg_func,
            filter=sensors_filter,
            extra=extra,
        )
    )
