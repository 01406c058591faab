//! Decimal-year calendar arithmetic.
//!
//! A date maps to `year + day_of_year / days_in_year` with `day_of_year`
//! counted from zero, so 2000-01-01 is 2000.0 and 2000-07-02 is 2000.5.
//! The day-number view is the continuous inverse of that map and is what
//! the day-based operations (increments, lags, crash horizons) work in.

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// Tolerance, in days, when matching grid points to observations.
pub(crate) const DAY_EPS: f64 = 1e-6;

pub const ISO_DATE: &str = "%Y-%m-%d";

pub fn days_in_year(year: i32) -> u32 {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

pub fn date_to_decimal_year(date: NaiveDate) -> f64 {
    let year = date.year();
    year as f64 + date.ordinal0() as f64 / days_in_year(year) as f64
}

/// Nearest calendar date to a decimal-year time.
pub fn decimal_year_to_date(t: f64) -> Result<NaiveDate> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("time {t} is not finite")));
    }
    let year = t.floor() as i32;
    let diy = days_in_year(year);
    let day = ((t - year as f64) * diy as f64).round() as u32;
    let (year, day) = if day >= diy { (year + 1, 0) } else { (year, day) };
    NaiveDate::from_yo_opt(year, day + 1).ok_or_else(|| Error::Domain(format!("time {t} has no calendar date")))
}

fn jan1_day_number(year: i32) -> f64 {
    NaiveDate::from_yo_opt(year, 1)
        .map(|d| d.num_days_from_ce() as f64)
        .unwrap_or(f64::NAN)
}

/// Continuous day count since 0001-01-01 (CE day 1). Values within
/// rounding distance of a whole day snap to it, so times built from dates
/// map to exact integers.
pub fn decimal_year_to_day_number(t: f64) -> f64 {
    let year = t.floor() as i32;
    let day = (t - year as f64) * days_in_year(year) as f64;
    let nearest = day.round();
    let day = if (day - nearest).abs() < 1e-7 { nearest } else { day };
    jan1_day_number(year) + day
}

pub fn day_number_to_decimal_year(day: f64) -> f64 {
    // Candidate year from the mean year length, then correct by at most one.
    let mut year = (day / 365.2425).floor() as i32 + 1;
    while jan1_day_number(year) > day {
        year -= 1;
    }
    while jan1_day_number(year + 1) <= day {
        year += 1;
    }
    year as f64 + (day - jan1_day_number(year)) / days_in_year(year) as f64
}

pub fn parse_date(text: &str, format: &str) -> Result<NaiveDate, chrono::ParseError> {
    NaiveDate::parse_from_str(text.trim(), format)
}

/// Parses either an ISO date or a plain decimal year.
pub fn parse_time(text: &str) -> Result<f64> {
    if let Ok(date) = parse_date(text, ISO_DATE) {
        return Ok(date_to_decimal_year(date));
    }
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|t| t.is_finite())
        .ok_or_else(|| Error::Domain(format!("'{text}' is neither a YYYY-MM-DD date nor a decimal year")))
}

pub fn format_time(t: f64) -> String {
    decimal_year_to_date(t)
        .map(|d| d.format(ISO_DATE).to_string())
        .unwrap_or_else(|_| format!("{t}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn mid_leap_year_is_half() {
        assert_eq!(date_to_decimal_year(ymd(2000, 1, 1)), 2000.0);
        assert_eq!(date_to_decimal_year(ymd(2000, 7, 2)), 2000.5);
    }

    #[test]
    fn date_round_trip_over_several_years() {
        let mut d = ymd(1995, 1, 1);
        while d < ymd(2005, 1, 1) {
            let t = date_to_decimal_year(d);
            assert_eq!(decimal_year_to_date(t).unwrap(), d);
            let day = decimal_year_to_day_number(t);
            assert_eq!(day, d.num_days_from_ce() as f64);
            assert_eq!(day_number_to_decimal_year(day), t);
            d = d.succ_opt().unwrap();
        }
    }

    #[test]
    fn day_number_is_continuous_at_year_boundary() {
        let before = decimal_year_to_day_number(2001.0 - 1e-12);
        let after = decimal_year_to_day_number(2001.0);
        assert!((after - before).abs() < 1e-6);
    }

    #[test]
    fn parse_time_accepts_both_forms() {
        assert_eq!(parse_time("2000-07-02").unwrap(), 2000.5);
        assert_eq!(parse_time("1999.25").unwrap(), 1999.25);
        assert!(parse_time("yesterday").is_err());
    }
}
