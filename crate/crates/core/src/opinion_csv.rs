//! `k,agent_id,opinion` tables, shared by trajectories and observation panels.
//!
//! Rows are grouped by `k` in strictly ascending order and every group lists
//! each agent `0..n` exactly once (in any order).

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpinionCsvError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("opinion {value} at line {line} is outside [0,1]")]
    OutOfRangeOpinion { line: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const HEADER: &str = "k,agent_id,opinion";

pub fn read_opinion_table(path: impl AsRef<Path>) -> Result<Vec<(usize, Vec<f64>)>, OpinionCsvError> {
    parse_opinion_table(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn parse_opinion_table(reader: impl BufRead) -> Result<Vec<(usize, Vec<f64>)>, OpinionCsvError> {
    let mut groups: Vec<(usize, Vec<Option<f64>>, usize)> = Vec::new();
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let parse_err = |msg: String| OpinionCsvError::Parse { line: lineno, msg };
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if !header_seen {
            if fields.join(",") != HEADER {
                return Err(parse_err(format!("expected header `{HEADER}`, got `{t}`")));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
        }
        let k = fields[0].parse::<usize>().map_err(|_| parse_err(format!("bad step `{}`", fields[0])))?;
        let agent = fields[1].parse::<usize>().map_err(|_| parse_err(format!("bad agent id `{}`", fields[1])))?;
        let value = fields[2].parse::<f64>().map_err(|_| parse_err(format!("bad opinion `{}`", fields[2])))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(OpinionCsvError::OutOfRangeOpinion { line: lineno, value });
        }
        match groups.last_mut() {
            Some((gk, _, _)) if *gk == k => {}
            Some((gk, _, _)) if *gk > k => {
                return Err(parse_err(format!("step {k} follows step {gk}; steps must be ascending")));
            }
            _ => groups.push((k, Vec::new(), lineno)),
        }
        let (_, values, _) = groups.last_mut().expect("just pushed");
        if agent >= values.len() {
            values.resize(agent + 1, None);
        }
        if values[agent].replace(value).is_some() {
            return Err(parse_err(format!("agent {agent} repeated at step {k}")));
        }
    }
    if !header_seen {
        return Err(OpinionCsvError::Parse { line: 1, msg: "empty file".into() });
    }
    let n = groups.first().map_or(0, |g| g.1.len());
    groups
        .into_iter()
        .map(|(k, values, first_line)| {
            if values.len() != n || values.iter().any(Option::is_none) {
                return Err(OpinionCsvError::Parse {
                    line: first_line,
                    msg: format!("step {k} does not list agents 0..{n} exactly once"),
                });
            }
            Ok((k, values.into_iter().map(|v| v.expect("checked")).collect()))
        })
        .collect()
}

pub fn write_opinion_table<'a>(
    rows: impl IntoIterator<Item = (usize, &'a [f64])>,
    path: impl AsRef<Path>,
) -> Result<(), OpinionCsvError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    format_opinion_table(rows, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Values are written with Rust's shortest round-trip float formatting, so a
/// re-read table is bit-identical.
pub fn format_opinion_table<'a>(
    rows: impl IntoIterator<Item = (usize, &'a [f64])>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for (k, x) in rows {
        for (i, v) in x.iter().enumerate() {
            writeln!(out, "{k},{i},{v}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grouped_rows() {
        let t = parse_opinion_table("k,agent_id,opinion\n0,1,0.5\n0,0,0.25\n3,0,1\n3,1,0\n".as_bytes()).unwrap();
        assert_eq!(t, vec![(0, vec![0.25, 0.5]), (3, vec![1.0, 0.0])]);
    }

    #[test]
    fn rejects_bad_tables() {
        let bad = |s: &str| parse_opinion_table(s.as_bytes()).unwrap_err();
        assert!(matches!(bad("k,agent_id,opinion\n0,0,1.5\n"), OpinionCsvError::OutOfRangeOpinion { .. }));
        assert!(matches!(bad("k,agent_id,opinion\n2,0,0.5\n1,0,0.5\n"), OpinionCsvError::Parse { .. }));
        assert!(matches!(bad("k,agent_id,opinion\n0,0,0.5\n0,0,0.5\n"), OpinionCsvError::Parse { .. }));
        assert!(matches!(bad("k,agent_id,opinion\n0,0,0.5\n0,1,0.5\n1,0,0.5\n"), OpinionCsvError::Parse { .. }));
        assert!(matches!(bad("k,agent,opinion\n0,0,0.5\n"), OpinionCsvError::Parse { .. }));
        assert!(matches!(bad("k,agent_id,opinion\n0,0,0.5\n1,0,0.5\n0,1,0.5\n"), OpinionCsvError::Parse { .. }));
    }

    proptest::proptest! {
        #[test]
        fn roundtrip(rows in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 3), 1..6)) {
            let indexed: Vec<(usize, &[f64])> = rows.iter().enumerate().map(|(k, x)| (2 * k, x.as_slice())).collect();
            let mut buf = Vec::new();
            format_opinion_table(indexed.iter().copied(), &mut buf).unwrap();
            let back = parse_opinion_table(buf.as_slice()).unwrap();
            let expected: Vec<(usize, Vec<f64>)> = indexed.iter().map(|(k, x)| (*k, x.to_vec())).collect();
            proptest::prop_assert_eq!(back, expected);
        }
    }
}
