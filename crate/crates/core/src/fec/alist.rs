//! MacKay alist format. Zero padding on the adjacency lines is accepted on
//! input and never written.

use std::fmt::Write as _;

use super::ParityCheckMatrix;
use crate::error::{Error, Result};

pub(super) fn write(h: &ParityCheckMatrix) -> String {
    let col_deg: Vec<usize> = h.cols.iter().map(Vec::len).collect();
    let row_deg: Vec<usize> = h.rows.iter().map(Vec::len).collect();
    let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut s = String::new();
    writeln!(s, "{} {}", h.n, h.rows.len()).unwrap();
    writeln!(
        s,
        "{} {}",
        col_deg.iter().max().unwrap_or(&0),
        row_deg.iter().max().unwrap_or(&0)
    )
    .unwrap();
    writeln!(s, "{}", join(&mut col_deg.iter().copied())).unwrap();
    writeln!(s, "{}", join(&mut row_deg.iter().copied())).unwrap();
    for c in &h.cols {
        writeln!(s, "{}", join(&mut c.iter().map(|r| r + 1))).unwrap();
    }
    for r in &h.rows {
        writeln!(s, "{}", join(&mut r.iter().map(|v| v + 1))).unwrap();
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> =
            Box::new(text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty()));
        Self { inner: it.peekable() }
    }

    fn next_ints(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        let (line, text) = self
            .inner
            .next()
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") })?;
        let ints = text
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Parse { line, msg: format!("bad integer {t:?} in {what}") }))
            .collect::<Result<Vec<_>>>()?;
        Ok((line, ints))
    }
}

fn expect_len(line: usize, got: &[usize], want: usize, what: &str) -> Result<()> {
    if got.len() == want {
        Ok(())
    } else {
        Err(Error::Parse { line, msg: format!("{what}: expected {want} values, found {}", got.len()) })
    }
}

pub(super) fn parse(text: &str) -> Result<ParityCheckMatrix> {
    if text.trim().is_empty() {
        return Err(Error::Parse { line: 1, msg: "empty alist".into() });
    }
    let mut lines = Lines::new(text);
    let (l, dims) = lines.next_ints("dimensions")?;
    expect_len(l, &dims, 2, "dimensions")?;
    let (n, m) = (dims[0], dims[1]);
    let (l, maxes) = lines.next_ints("maximum degrees")?;
    expect_len(l, &maxes, 2, "maximum degrees")?;
    let (l, col_deg) = lines.next_ints("column degrees")?;
    expect_len(l, &col_deg, n, "column degrees")?;
    if col_deg.iter().max().copied().unwrap_or(0) != maxes[0] {
        return Err(Error::Parse { line: l, msg: "column degrees disagree with maximum".into() });
    }
    let (l, row_deg) = lines.next_ints("row degrees")?;
    expect_len(l, &row_deg, m, "row degrees")?;
    if row_deg.iter().max().copied().unwrap_or(0) != maxes[1] {
        return Err(Error::Parse { line: l, msg: "row degrees disagree with maximum".into() });
    }

    let mut cols = Vec::with_capacity(n);
    for (v, &deg) in col_deg.iter().enumerate() {
        let (l, entries) = lines.next_ints("column entries")?;
        let nz: Vec<usize> = entries.into_iter().filter(|&x| x != 0).collect();
        if nz.len() != deg {
            return Err(Error::Parse { line: l, msg: format!("column {} lists {} entries, degree {deg}", v + 1, nz.len()) });
        }
        if let Some(&bad) = nz.iter().find(|&&r| r > m) {
            return Err(Error::Parse { line: l, msg: format!("row index {bad} exceeds {m}") });
        }
        cols.push(nz.into_iter().map(|r| r - 1).collect::<Vec<_>>());
    }
    let mut rows = Vec::with_capacity(m);
    for (r, &deg) in row_deg.iter().enumerate() {
        let (l, entries) = lines.next_ints("row entries")?;
        let nz: Vec<usize> = entries.into_iter().filter(|&x| x != 0).collect();
        if nz.len() != deg {
            return Err(Error::Parse { line: l, msg: format!("row {} lists {} entries, degree {deg}", r + 1, nz.len()) });
        }
        if let Some(&bad) = nz.iter().find(|&&v| v > n) {
            return Err(Error::Parse { line: l, msg: format!("column index {bad} exceeds {n}") });
        }
        rows.push(nz.into_iter().map(|v| v - 1).collect::<Vec<_>>());
    }
    if let Some((line, _)) = lines.inner.next() {
        return Err(Error::Parse { line, msg: "trailing content".into() });
    }

    let h = ParityCheckMatrix::from_rows(n, rows).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
    let mut sorted_cols: Vec<Vec<usize>> = cols;
    for c in &mut sorted_cols {
        c.sort_unstable();
    }
    if sorted_cols != h.cols {
        return Err(Error::Parse { line: 0, msg: "column lists disagree with row lists".into() });
    }
    Ok(h)
}
