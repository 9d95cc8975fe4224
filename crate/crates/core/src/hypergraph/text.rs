//! Plain-text hypergraph format: a header line `n m` followed by `m` lines,
//! each listing one edge as space-separated vertex indices. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::Hypergraph;
use crate::error::{Error, Result};
use crate::setcore::VertexSet;

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

impl Hypergraph {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n(), self.len());
        for e in self.edges() {
            let line: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).expect("writing to a String");
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Hypergraph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

        let (header_no, header) = lines.next().ok_or_else(|| parse_error(1, 1, "missing header `n m`"))?;
        let header_fields = fields(header_no, header)?;
        let [n, m] = header_fields[..] else {
            return Err(parse_error(header_no, 1, "header must be exactly `n m`"));
        };

        let mut edges = Vec::with_capacity(m);
        for (line_no, line) in lines {
            if edges.len() == m {
                return Err(parse_error(line_no, 1, format!("more than the declared {m} edges")));
            }
            let members = fields(line_no, line)?;
            if let Some(pos) = members.iter().position(|&v| v >= n) {
                return Err(parse_error(line_no, column_of(line, pos), format!("vertex {} outside [0, {n})", members[pos])));
            }
            let edge = VertexSet::try_from_indices(&members, n)
                .map_err(|e| parse_error(line_no, 1, e.to_string()))?;
            if edge.is_empty() {
                return Err(parse_error(line_no, 1, "empty edge"));
            }
            edges.push(edge);
        }
        if edges.len() != m {
            let last = text.lines().count().max(1);
            return Err(parse_error(last, 1, format!("declared {m} edges, found {}", edges.len())));
        }
        Hypergraph::new(n, edges)
    }

    pub fn read_text(path: &Path) -> Result<Hypergraph> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn fields(line_no: usize, line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<usize>()
                .map_err(|_| parse_error(line_no, column_of(line, i), format!("`{tok}` is not a vertex index")))
        })
        .collect()
}

/// 1-based column of the `index`-th whitespace-separated token.
fn column_of(line: &str, index: usize) -> usize {
    let mut seen = 0;
    let mut in_token = false;
    for (col, ch) in line.char_indices() {
        if ch.is_whitespace() {
            in_token = false;
        } else if !in_token {
            if seen == index {
                return col + 1;
            }
            seen += 1;
            in_token = true;
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let h = Hypergraph::from_index_lists(10, &[&[1, 2], &[0, 9], &[3]]).unwrap();
        let text = h.to_text();
        assert_eq!(text, "10 3\n0 9\n1 2\n3\n");
        assert_eq!(Hypergraph::parse_text(&text).unwrap(), h);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.txt");
        h.write_text(&path).unwrap();
        assert_eq!(Hypergraph::read_text(&path).unwrap(), h);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let h = Hypergraph::parse_text("# star\n5 2\n\n0 1\n0 2\n").unwrap();
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn malformed_inputs_report_positions() {
        let cases = [
            ("", 1),
            ("5\n", 1),
            ("5 2\n0 1\n", 2),
            ("5 1\n0 x\n", 2),
            ("5 1\n0 7\n", 2),
            ("5 1\n1 1\n", 2),
            ("5 1\n0 1\n2 3\n", 3),
        ];
        for (text, line) in cases {
            match Hypergraph::parse_text(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} parsed as {other:?}"),
            }
        }
        match Hypergraph::parse_text("5 1\n0  7\n") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 4),
            other => panic!("{other:?}"),
        }
    }
}
