use chrono::{Datelike, NaiveDate};

use crate::crypto::hash;

pub const VOTING_AGE: i32 = 18;

/// Parse a strict `DD/MM/YYYY` date.
pub fn parse_dob(s: &str) -> Option<NaiveDate> {
    let b = s.as_bytes();
    if b.len() != 10 || b[2] != b'/' || b[5] != b'/' {
        return None;
    }
    let digits = |r: std::ops::Range<usize>| -> Option<u32> {
        let part = &s[r];
        part.bytes().all(|c| c.is_ascii_digit()).then(|| part.parse().ok())?
    };
    let day = digits(0..2)?;
    let month = digits(3..5)?;
    let year = digits(6..10)?;
    NaiveDate::from_ymd_opt(year as i32, month, day)
}

pub fn format_date(d: NaiveDate) -> String {
    d.format("%d/%m/%Y").to_string()
}

/// Whole years from `dob` to `on`. Someone born on 29 February has their
/// birthday on 1 March in non-leap years.
pub fn age_in_years(dob: NaiveDate, on: NaiveDate) -> i32 {
    let mut years = on.year() - dob.year();
    if (on.month(), on.day()) < (dob.month(), dob.day()) {
        years -= 1;
    }
    years
}

pub fn is_of_voting_age(dob: NaiveDate, on: NaiveDate) -> bool {
    age_in_years(dob, on) >= VOTING_AGE
}

/// "V-" + pincode + "-" + first 8 hex chars of hash(aadhaar).
pub fn voter_id(pincode: &str, aadhaar: &str) -> String {
    format!("V-{pincode}-{}", &hash(aadhaar.as_bytes()).to_hex()[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn strict_dob_parsing() {
        assert_eq!(parse_dob("15/08/2002"), Some(d(2002, 8, 15)));
        assert_eq!(parse_dob("29/02/2004"), Some(d(2004, 2, 29)));
        assert_eq!(parse_dob("29/02/2003"), None);
        assert_eq!(parse_dob("DD/MM/YYYY"), None);
        assert_eq!(parse_dob("1/8/2002"), None);
        assert_eq!(parse_dob("2002-08-15"), None);
        assert_eq!(parse_dob("+1/08/2002"), None);
    }

    #[test]
    fn boundary_is_inclusive() {
        let dob = d(2003, 8, 15);
        assert!(is_of_voting_age(dob, d(2021, 8, 15)));
        assert!(!is_of_voting_age(dob, d(2021, 8, 14)));
        assert_eq!(age_in_years(dob, d(2020, 8, 15)), 17);
    }

    #[test]
    fn leap_day_birthday_falls_on_first_of_march() {
        let dob = d(2004, 2, 29);
        assert!(!is_of_voting_age(dob, d(2022, 2, 28)));
        assert!(is_of_voting_age(dob, d(2022, 3, 1)));
        // 2024 is a leap year
        assert!(is_of_voting_age(d(2006, 2, 28), d(2024, 2, 28)));
        assert_eq!(age_in_years(d(2000, 2, 29), d(2018, 2, 28)), 17);
        assert_eq!(age_in_years(d(2000, 2, 29), d(2024, 2, 29)), 24);
    }

    #[test]
    fn voter_id_format() {
        // sha256("12345678911") computed with coreutils sha256sum
        let id = voter_id("522309", "12345678911");
        assert_eq!(id, "V-522309-129c7e02");
    }
}
