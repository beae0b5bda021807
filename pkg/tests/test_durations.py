import pytest

from tsbench.durations import (
    DurationError,
    format_duration_ms,
    format_utc_ms,
    parse_duration_ms,
    parse_utc_ms,
)


@pytest.mark.parametrize(
    "text,expected_ms",
    [
        ("250ms", 250),
        ("1s", 1000),
        ("90s", 90_000),
        ("30m", 1_800_000),
        ("1h", 3_600_000),
        ("1.5h", 5_400_000),
        ("15d", 15 * 86_400_000),
        (" 2 m ", 120_000),
    ],
)
def test_parse_duration(text, expected_ms):
    assert parse_duration_ms(text) == expected_ms


@pytest.mark.parametrize("text", ["", "10", "s", "-5s", "0.5ms", "1 hour", "3x", "0s"])
def test_parse_duration_rejects(text):
    with pytest.raises(DurationError):
        parse_duration_ms(text)


@pytest.mark.parametrize("ms", [1, 250, 1000, 90_000, 5_400_000, 86_400_000])
def test_duration_round_trip(ms):
    assert parse_duration_ms(format_duration_ms(ms)) == ms


def test_format_picks_largest_unit():
    assert format_duration_ms(3_600_000) == "1h"
    assert format_duration_ms(1_800_000) == "30m"
    assert format_duration_ms(1500) == "1500ms"


def test_parse_utc():
    assert parse_utc_ms("1970-01-01T00:00:00Z") == 0
    assert parse_utc_ms("2022-01-01T00:00:00Z") == 1_640_995_200_000
    assert parse_utc_ms("2022-01-01T00:00:00+00:00") == 1_640_995_200_000
    # naive timestamps are taken as UTC
    assert parse_utc_ms("2022-01-01T00:00:00") == 1_640_995_200_000
    # offsets are honored
    assert parse_utc_ms("2022-01-01T01:00:00+01:00") == 1_640_995_200_000


def test_utc_round_trip():
    for ms in (0, 1_640_995_200_000, 1_640_995_200_123):
        assert parse_utc_ms(format_utc_ms(ms)) == ms
