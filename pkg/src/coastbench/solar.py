"""Geometric solar altitude from time and location.

Uses the standard low-accuracy closed-form solar position recipe: fractional
year -> declination and equation of time -> true solar time -> hour angle,
then ``altitude = asin(sin(lat) sin(decl) + cos(lat) cos(decl) cos(H))``.
Good to well under half a degree against high-accuracy ephemerides over the
satellite era, which is ample for binning scenes by sun elevation.  Returns
the airless (unrefracted) elevation of the solar centre; values are negative
when the sun is below the horizon.
"""

from __future__ import annotations

import math
from datetime import datetime, timezone

_MIN_YEAR = 1970
_MAX_YEAR = 2100


def _is_leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def solar_altitude(lat_deg: float, lon_deg: float, when: datetime) -> float:
    """Solar elevation in degrees at (``lat_deg``, ``lon_deg``) at time ``when``.

    Longitude is positive east.  Naive datetimes are interpreted as UTC;
    aware datetimes are converted.
    """
    if not -90.0 <= lat_deg <= 90.0:
        raise ValueError(f"latitude out of range: {lat_deg}")
    if not -180.0 <= lon_deg <= 180.0:
        raise ValueError(f"longitude out of range: {lon_deg}")
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    else:
        when = when.astimezone(timezone.utc)
    if not _MIN_YEAR <= when.year <= _MAX_YEAR:
        raise ValueError(f"timestamp year out of supported range: {when.year}")

    days_in_year = 366.0 if _is_leap(when.year) else 365.0
    doy = when.timetuple().tm_yday
    hours = when.hour + when.minute / 60.0 + (when.second + when.microsecond / 1e6) / 3600.0
    gamma = 2.0 * math.pi / days_in_year * (doy - 1 + (hours - 12.0) / 24.0)

    eqtime_min = 229.18 * (
        0.000075
        + 0.001868 * math.cos(gamma)
        - 0.032077 * math.sin(gamma)
        - 0.014615 * math.cos(2 * gamma)
        - 0.040849 * math.sin(2 * gamma)
    )
    decl = (
        0.006918
        - 0.399912 * math.cos(gamma)
        + 0.070257 * math.sin(gamma)
        - 0.006758 * math.cos(2 * gamma)
        + 0.000907 * math.sin(2 * gamma)
        - 0.002697 * math.cos(3 * gamma)
        + 0.001480 * math.sin(3 * gamma)
    )

    true_solar_min = hours * 60.0 + eqtime_min + 4.0 * lon_deg
    hour_angle = math.radians(true_solar_min / 4.0 - 180.0)

    lat = math.radians(lat_deg)
    s = math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(hour_angle)
    return math.degrees(math.asin(max(-1.0, min(1.0, s))))
