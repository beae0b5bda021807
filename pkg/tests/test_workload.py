import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    INGESTION_TEMPLATE,
    make_ingestion_definition,
    make_query_definition,
)
from tsbench.workload import (
    BatchCount,
    QueryType,
    RunDuration,
    TargetDatabase,
    TotalRecords,
    WorkloadKind,
    WorkloadParseError,
    WorkloadValidationError,
    expand_runs,
    parse_workload,
    serialize_workload,
)


def test_option_list_parsing():
    d = make_ingestion_definition(sensors=200_000, batches="1000,100000", clients="1,2,4")
    assert d.batch_size_options == (1000, 100000)
    assert d.client_number_options == (1, 2, 4)


def test_option_list_tolerates_whitespace():
    d = make_ingestion_definition(batches=" 100 ,  200 ", clients="1")
    assert d.batch_size_options == (100, 200)


def test_q1_requires_sensors():
    with pytest.raises(WorkloadValidationError) as err:
        make_query_definition(query_type="Q1", sensors_filter="")
    assert "sensors-filter" in str(err.value)


def test_expand_varies_clients():
    d = make_ingestion_definition(batches="1000", clients="1,2,4", sensors=100)
    plans = expand_runs(d)
    assert [(p.batch_size, p.client_count) for p in plans] == [(1000, 1), (1000, 2), (1000, 4)]
    assert [p.ordinal for p in plans] == [0, 1, 2]


def test_expand_varies_batches():
    d = make_ingestion_definition(batches="1000,20000", clients="1")
    assert len(expand_runs(d)) == 2


def test_expand_query_single_plan():
    d = make_query_definition(retries=1000)
    plans = expand_runs(d)
    assert len(plans) == 1
    assert plans[0].definition.test_retries == 1000
    assert plans[0].client_count == 1
    assert plans[0].batch_size is None


def test_expand_deterministic():
    d1 = make_ingestion_definition(batches="10,20", clients="1,2")
    d2 = make_ingestion_definition(batches="10,20", clients="1,2")
    assert expand_runs(d1) == expand_runs(d2)


@settings(max_examples=50)
@given(
    batches=st.lists(st.integers(1, 10**6), min_size=1, max_size=5),
    clients=st.lists(st.integers(1, 8), min_size=1, max_size=4),
)
def test_expand_count_is_product(batches, clients):
    d = make_ingestion_definition(
        sensors=10**6,
        batches=",".join(map(str, batches)),
        clients=",".join(map(str, clients)),
    )
    plans = expand_runs(d)
    assert len(plans) == len(batches) * len(clients)
    assert [p.ordinal for p in plans] == list(range(len(plans)))


def test_parse_stop_conditions():
    assert make_ingestion_definition(stop='batches-per-client="500"').stop_condition == BatchCount(500)
    assert make_ingestion_definition(stop='total-records="1000000"').stop_condition == TotalRecords(1_000_000)
    assert make_ingestion_definition(stop='duration="5m"').stop_condition == RunDuration(300.0)


def test_ingestion_requires_stop():
    # element missing entirely
    doc = INGESTION_TEMPLATE.format(
        database="d", day_span=1, sensors=10, granularity="1s",
        seed=1, batches="10", clients="1", stop='batches-per-client="3"',
    ).replace('<stop batches-per-client="3"/>', "")
    with pytest.raises(WorkloadParseError):
        parse_workload(doc)
    # element present but without a rule
    with pytest.raises(WorkloadParseError):
        make_ingestion_definition(stop="")


@pytest.mark.parametrize(
    "mutation,exc",
    [
        (lambda t: t.replace("<kind>", "<knid>"), WorkloadParseError),  # unknown element
        (lambda t: t.replace('version="1"', 'version="9"'), WorkloadParseError),
        (lambda t: t.replace('version="1"', ""), WorkloadParseError),
        (lambda t: t + "<trailing/>", WorkloadParseError),  # not well-formed
        (lambda t: t.replace("<day-span>1</day-span>", "<day-span>0</day-span>"), WorkloadValidationError),
        (lambda t: t.replace("<batch-size-options>100</batch-size-options>",
                             "<batch-size-options>0</batch-size-options>"), WorkloadValidationError),
        (lambda t: t.replace("<client-number-options>1</client-number-options>",
                             "<client-number-options>1,0</client-number-options>"), WorkloadValidationError),
    ],
)
def test_bad_documents(mutation, exc):
    doc = INGESTION_TEMPLATE.format(
        database="d", day_span=1, sensors=10, granularity="1s",
        seed=1, batches="100", clients="1", stop='batches-per-client="3"',
    )
    with pytest.raises(exc):
        parse_workload(mutation(doc))


def test_parse_error_names_element():
    doc = INGESTION_TEMPLATE.format(
        database="d", day_span=1, sensors=10, granularity="1s",
        seed=1, batches="100", clients="1", stop='batches-per-client="3"',
    ).replace("<seed>1</seed>", "<sede>1</sede>")
    with pytest.raises(WorkloadParseError) as err:
        parse_workload(doc)
    assert "sede" in str(err.value)


def test_duplicate_element_rejected():
    doc = INGESTION_TEMPLATE.format(
        database="d", day_span=1, sensors=10, granularity="1s",
        seed=1, batches="100", clients="1", stop='batches-per-client="3"',
    ).replace("<seed>1</seed>", "<seed>1</seed><seed>2</seed>")
    with pytest.raises(WorkloadParseError):
        parse_workload(doc)


def test_sensors_filter_must_fit_cardinality():
    with pytest.raises(WorkloadValidationError) as err:
        make_query_definition(sensors=10, sensors_filter="0,10")
    assert "sensors-filter" in str(err.value)


def test_duration_must_fit_span():
    with pytest.raises(WorkloadValidationError):
        make_query_definition(day_span=1, duration_minutes=1441)
    make_query_definition(day_span=1, duration_minutes=1440)  # exactly fits


def test_q2_constraints():
    extra = "<min-value>10</min-value><max-value>20</max-value>"
    d = make_query_definition(query_type="Q2", sensors_filter="3", extra=extra)
    assert d.min_value == 10.0 and d.max_value == 20.0
    with pytest.raises(WorkloadValidationError):
        make_query_definition(query_type="Q2", sensors_filter="1,2", extra=extra)
    with pytest.raises(WorkloadValidationError):
        make_query_definition(
            query_type="Q2", sensors_filter="3",
            extra="<min-value>20</min-value><max-value>10</max-value>",
        )
    with pytest.raises(WorkloadValidationError):
        make_query_definition(query_type="Q2", sensors_filter="3")


def test_q5_needs_two_sensors():
    make_query_definition(query_type="Q5", sensors_filter="1,2")
    with pytest.raises(WorkloadValidationError):
        make_query_definition(query_type="Q5", sensors_filter="1")
    with pytest.raises(WorkloadValidationError):
        make_query_definition(query_type="Q5", sensors_filter="1,2,3")


def test_query_elements_rejected_for_ingestion():
    doc = INGESTION_TEMPLATE.format(
        database="d", day_span=1, sensors=10, granularity="1s",
        seed=1, batches="100", clients="1", stop='batches-per-client="3"',
    ).replace("</workload>", "<query-type>Q1</query-type></workload>")
    with pytest.raises(WorkloadParseError):
        parse_workload(doc)


def test_client_count_cannot_exceed_sensors():
    with pytest.raises(WorkloadValidationError):
        make_ingestion_definition(sensors=4, clients="8")


def test_round_trip_ingestion():
    d = make_ingestion_definition(batches="1000,20000", clients="1,2,4", stop='total-records="500"')
    assert parse_workload(serialize_workload(d)) == d


def test_round_trip_query():
    d = make_query_definition(
        query_type="Q2", sensors_filter="3",
        extra="<min-value>-1.5</min-value><max-value>2.25</max-value>",
    )
    assert parse_workload(serialize_workload(d)) == d


@settings(max_examples=60)
@given(
    kind=st.sampled_from(["ingestion", "query"]),
    target=st.sampled_from(list(TargetDatabase)),
    day_span=st.integers(1, 30),
    sensors=st.integers(2, 10**6),
    seed=st.integers(-(2**63), 2**63 - 1),
    granularity_ms=st.sampled_from([1, 100, 1000, 60_000]),
    batches=st.lists(st.integers(1, 10**5), min_size=1, max_size=4),
    query_type=st.sampled_from(list(QueryType)),
    retries=st.integers(1, 1000),
    min_value=st.floats(-1e6, 1e6, allow_nan=False),
)
def test_round_trip_property(
    kind, target, day_span, sensors, seed, granularity_ms, batches, query_type, retries, min_value
):
    from tsbench.durations import format_duration_ms
    from tsbench.workload import (
        AggFunc,
        CompFunc,
        ConnectionInfo,
        WorkloadDefinition,
        validate_definition,
    )

    common = dict(
        target_database=target,
        connection=ConnectionInfo(host="h", port=1234, user="u", password="p", database="db"),
        day_span=day_span,
        start_time_ms=1_640_995_200_000,
        sensor_number=sensors,
        timestamp_granularity_ms=granularity_ms,
        seed=seed,
    )
    if kind == "ingestion":
        d = WorkloadDefinition(
            workload_kind=WorkloadKind.INGESTION,
            batch_size_options=tuple(batches),
            client_number_options=(1, 2),
            stop_condition=BatchCount(5),
            **common,
        )
    else:
        filters = {
            QueryType.Q2: (1,),
            QueryType.Q5: (0, 1),
        }.get(query_type, (0, 1))
        d = WorkloadDefinition(
            workload_kind=WorkloadKind.QUERY,
            query_type=query_type,
            test_retries=retries,
            duration_minutes=min(60, day_span * 1440),
            aggregation_interval_ms=3_600_000,
            aggregation_function=AggFunc.STDDEV,
            comparison_function=CompFunc.SUBTRACT,
            sensors_filter=filters,
            min_value=min_value if query_type is QueryType.Q2 else None,
            max_value=min_value + 1.0 if query_type is QueryType.Q2 else None,
            **common,
        )
    validate_definition(d)
    assert parse_workload(serialize_workload(d)) == d
