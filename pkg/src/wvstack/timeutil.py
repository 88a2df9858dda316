from datetime import datetime, timedelta, timezone

ISO_FMT = "%Y-%m-%dT%H:%M:%S.%fZ"


def parse_time(text):
    """Parse an ISO-8601 UTC timestamp; naive inputs are taken as UTC."""
    if isinstance(text, datetime):
        dt = text
    else:
        s = str(text).strip()
        if s.endswith("Z"):
            s = s[:-1] + "+00:00"
        dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_time(dt):
    return parse_time(dt).strftime(ISO_FMT)


def add_seconds(dt, seconds):
    return parse_time(dt) + timedelta(seconds=float(seconds))


def seconds_between(t0, t1):
    return (parse_time(t1) - parse_time(t0)).total_seconds()


def days_between(t0, t1):
    return seconds_between(t0, t1) / 86400.0
