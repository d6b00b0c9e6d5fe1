//! The Hex `seconds` built-in: turn a date string into Unix epoch
//! seconds, or "" when no known format applies.
//!
//! Formats are tried in a fixed, documented order so script authors can
//! rely on it:
//!   1. ISO-8601 / RFC 3339 with 'T' or space separator, optional
//!      fractional seconds, 'Z' or a ±hh:mm offset
//!   2. RFC 1123, e.g. "Fri, 13 Dec 2024 17:52:22 GMT"
//!   3. "YYYY-MM-DD" (midnight UTC)
//!   4. "Month DD, YYYY" (full or abbreviated month name, midnight UTC)
//! Timestamps without an offset are read as UTC; fractional seconds are
//! truncated.

use chrono::{DateTime, NaiveDate, NaiveDateTime};

/// Epoch seconds as a decimal string, or None if nothing matched.
pub fn seconds(input: &[u8]) -> Option<String> {
    let s = std::str::from_utf8(input).ok()?.trim();
    if s.is_empty() {
        return None;
    }
    epoch_seconds(s).map(|t| t.to_string())
}

fn epoch_seconds(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    // Offset forms rfc3339 does not take: space separator, e.g.
    // "2024-12-13 17:52:22+01:00".
    for fmt in ["%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%z"] {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.timestamp());
        }
    }
    // Naive date-times: assume UTC.
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc2822(s) {
        return Some(dt.timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp());
    }
    for fmt in ["%B %d, %Y", "%b %d, %Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sec(s: &str) -> Option<String> {
        seconds(s.as_bytes())
    }

    #[test]
    fn published_datetime_value() {
        assert_eq!(sec("2024-12-13T17:52:22.647Z"), Some("1734112342".into()));
    }

    #[test]
    fn epoch_origin() {
        assert_eq!(sec("1970-01-01T00:00:00Z"), Some("0".into()));
    }

    #[test]
    fn failures_are_none() {
        assert_eq!(sec("not a date"), None);
        assert_eq!(sec(""), None);
        assert_eq!(sec("13/12/2024"), None);
        assert_eq!(seconds(b"\xff\xfe"), None);
    }

    #[test]
    fn format_coverage() {
        // Offset applies.
        assert_eq!(sec("2024-12-13T18:52:22+01:00"), Some("1734112342".into()));
        // Space separator, naive, assumed UTC.
        assert_eq!(sec("2024-12-13 17:52:22"), Some("1734112342".into()));
        // 'T' separator, naive.
        assert_eq!(sec("2024-12-13T17:52:22"), Some("1734112342".into()));
        // RFC 1123.
        assert_eq!(
            sec("Fri, 13 Dec 2024 17:52:22 GMT"),
            Some("1734112342".into())
        );
        // Bare dates at midnight UTC.
        assert_eq!(sec("2024-12-13"), Some("1734048000".into()));
        assert_eq!(sec("December 13, 2024"), Some("1734048000".into()));
        assert_eq!(sec("Dec 13, 2024"), Some("1734048000".into()));
    }

    #[test]
    fn fractional_seconds_truncate() {
        assert_eq!(sec("1970-01-01T00:00:00.999Z"), Some("0".into()));
        assert_eq!(sec("2024-12-13T17:52:22.999Z"), Some("1734112342".into()));
    }

    #[test]
    fn pre_epoch_dates() {
        assert_eq!(sec("1969-12-31T23:59:59Z"), Some("-1".into()));
    }
}
