"""
Utility functions for working with virtual (simulated) time.

The audit protocol is scheduled on a virtual clock: days start at midnight of
a fixed start date and every event is placed at a wall-clock time of that day
(e.g. 09:00 for activities, 11:00 for searches). These helpers keep the
conversions in one place so the planner, the protocol runner and the run log
agree on how times are written.

Functions:
    parse_clock_time(value) -> time
        Accept "HH:MM", "HH:MM:SS" or a datetime.time.

    at_clock(day_start, clock) -> datetime
        Combine a day's midnight with a clock time.

    minutes_between(earlier, later) -> float
        Difference of two datetimes in minutes.

    format_virtual(dt) -> str
        ISO-8601 representation used in protocol logs.
"""

from __future__ import annotations

import datetime
from typing import Union

from utils.errors import ConfigurationError

ClockLike = Union[str, datetime.time]


def parse_clock_time(value: ClockLike) -> datetime.time:
    """Parse a wall-clock time of day.

    Args:
        value: "09:00", "11:00:00" or an existing datetime.time.

    Returns:
        A naive datetime.time.

    Raises:
        ConfigurationError: If the string is not a valid time of day.
    """
    if isinstance(value, datetime.time):
        return value
    text = str(value).strip()
    for fmt in ("%H:%M", "%H:%M:%S"):
        try:
            return datetime.datetime.strptime(text, fmt).time()
        except ValueError:
            continue
    raise ConfigurationError(f"[EXPERIMENT] Invalid clock time '{value}', expected HH:MM.")


def day_start(start_date: datetime.date, day: int) -> datetime.datetime:
    """Midnight of the given 0-based protocol day."""
    return datetime.datetime.combine(start_date, datetime.time(0, 0)) + datetime.timedelta(days=day)


def at_clock(day_midnight: datetime.datetime, clock: ClockLike) -> datetime.datetime:
    t = parse_clock_time(clock)
    return day_midnight.replace(hour=t.hour, minute=t.minute, second=t.second, microsecond=0)


def minutes_between(earlier: datetime.datetime, later: datetime.datetime) -> float:
    return (later - earlier).total_seconds() / 60.0


def format_virtual(dt: datetime.datetime) -> str:
    return dt.isoformat(timespec="minutes")
