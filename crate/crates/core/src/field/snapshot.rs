//! Plain-text field snapshots.
//!
//! ```text
//! mincon-field v1 n=2 k=1 N=32,32 L=6.283185307179586,6.283185307179586
//! <components of site 0>
//! <components of site 1>
//! ...
//! ```

use std::io::{BufRead, Write};

use super::form_field::FormField;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

const MAGIC: &str = "mincon-field v1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_snapshot<W: Write>(field: &FormField, mut w: W) -> Result<()> {
    let g = field.grid();
    writeln!(
        w,
        "{MAGIC} n={} k={} N={} L={}",
        g.dim(),
        field.degree(),
        join(g.sizes()),
        join(g.lengths())
    )?;
    let nc = field.ncomp();
    for site in 0..g.site_count() {
        let line = field.at(site).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        if nc == 0 {
            writeln!(w)?;
        } else {
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn header_value<'a>(fields: &[&'a str], key: &str) -> Option<&'a str> {
    fields.iter().find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<FormField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty snapshot"))??;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| parse_err(1, "missing mincon-field v1 header"))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let get = |key: &str| header_value(&fields, key).ok_or_else(|| parse_err(1, format!("missing {key}=")));
    let n: usize = get("n")?.parse().map_err(|_| parse_err(1, "bad n"))?;
    let k: usize = get("k")?.parse().map_err(|_| parse_err(1, "bad k"))?;
    let sizes: Vec<usize> = get("N")?
        .split(',')
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(1, "bad N"))?;
    let lengths: Vec<f64> = get("L")?
        .split(',')
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(1, "bad L"))?;
    if sizes.len() != n {
        return Err(parse_err(1, "N does not have n entries"));
    }
    let grid = TorusGrid::new(sizes, lengths)?;
    let mut field = FormField::zeros(&grid, k)?;
    let nc = field.ncomp();
    let mut data = Vec::with_capacity(grid.site_count() * nc);
    for site in 0..grid.site_count() {
        let line_no = site + 2;
        let line = lines.next().ok_or_else(|| parse_err(line_no, "truncated snapshot"))??;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(line_no, "bad number"))?;
        if values.len() != nc {
            return Err(parse_err(line_no, format!("expected {nc} components, found {}", values.len())));
        }
        data.extend(values);
    }
    if let Some(extra) = lines.next() {
        if !extra?.trim().is_empty() {
            return Err(parse_err(grid.site_count() + 2, "trailing data"));
        }
    }
    field = FormField::from_data(&grid, k, data)?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_is_exact() {
        let g = TorusGrid::new(vec![8, 10], vec![2.0 * PI, 1.3]).unwrap();
        let f = FormField::from_fn(&g, 1, |x| vec![x[0].sin() / 3.0, (x[1] * 7.1).cos()]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mincon-field v1 n=2 k=1 N=8,10 L=6.283185307179586,1.3\n"));
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_snapshot("hello\n".as_bytes()).is_err());
        let truncated = "mincon-field v1 n=2 k=0 N=8,8 L=1,1\n0.5\n";
        assert!(matches!(read_snapshot(truncated.as_bytes()), Err(Error::Parse { .. })));
        let wrong = "mincon-field v1 n=2 k=0 N=8,8 L=1,1\n0.5 0.5\n";
        assert!(read_snapshot(wrong.as_bytes()).is_err());
    }
}
