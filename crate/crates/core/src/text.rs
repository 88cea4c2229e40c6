//! Small helpers shared by the plain-text file formats.

use std::path::Path;

use crate::error::{Error, Result};

/// Formats `x` so that parsing the text yields exactly `x` again and at least
/// `min_sig` significant digits are written (trailing zeros are appended to
/// short representations such as `3.01`).
pub fn fmt_f64(x: f64, min_sig: usize) -> String {
    let mut s = format!("{x}");
    if !x.is_finite() {
        return s;
    }
    let digits = s
        .chars()
        .filter(|c| c.is_ascii_digit())
        .skip_while(|&c| c == '0')
        .count();
    if digits < min_sig {
        if !s.contains('.') {
            s.push('.');
        }
        // Leading zeros of a value below one are not significant.
        let pad = if x == 0.0 { min_sig - 1 } else { min_sig - digits };
        s.extend(std::iter::repeat_n('0', pad));
    }
    s
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected 'key = value'", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_f64(s: &str, what: &str, path: &Path) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(path, format!("{what}: '{s}' is not a number")))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_values_are_padded() {
        assert_eq!(fmt_f64(3.01, 6), "3.01000");
        assert_eq!(fmt_f64(2.0, 6), "2.00000");
        assert_eq!(fmt_f64(0.0, 6), "0.00000");
        assert_eq!(fmt_f64(0.005, 6), "0.00500000");
        assert_eq!(fmt_f64(151.563, 6), "151.563");
    }

    #[test]
    fn formatting_round_trips() {
        for &x in &[3.01, 1.0 / 3.0, 1e-9, 123456.789012345, -0.25, 7.0] {
            let s = fmt_f64(x, 12);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
