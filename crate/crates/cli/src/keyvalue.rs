//! Line-oriented `key = value` files with `#` comments.

use std::path::Path;

use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str, origin: &str) -> CliResult<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::data(format!("{origin}:{}: expected 'key = value', got '{line}'", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Failure::data(format!("{origin}:{}: missing key", i + 1)));
        }
        out.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn read(path: &Path) -> CliResult<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

/// Error pointing at the line of `entry`.
pub fn at(origin: &str, entry: &Entry, message: impl std::fmt::Display) -> Failure {
    Failure::data(format!("{origin}:{}: {}: {message}", entry.line, entry.key))
}

pub fn parse_f64(origin: &str, entry: &Entry) -> CliResult<f64> {
    entry
        .value
        .parse::<f64>()
        .map_err(|_| at(origin, entry, format!("expected a number, got '{}'", entry.value)))
}

/// Comma-separated numbers.
pub fn parse_list(origin: &str, entry: &Entry) -> CliResult<Vec<f64>> {
    entry
        .value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| at(origin, entry, format!("expected comma-separated numbers, got '{}'", entry.value)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let e = parse("# header\n\nT = 1000, 2000  # windows\nestimator = ds h=0.01\n", "cfg").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].line, 3);
        assert_eq!(e[0].value, "1000, 2000");
        assert_eq!(parse_list("cfg", &e[0]).unwrap(), vec![1000.0, 2000.0]);
        assert_eq!(e[1].value, "ds h=0.01");
    }

    #[test]
    fn missing_equals_reports_line() {
        let err = parse("a = 1\nbogus\n", "cfg").unwrap_err();
        assert!(err.message.contains("cfg:2"), "{}", err.message);
    }
}
