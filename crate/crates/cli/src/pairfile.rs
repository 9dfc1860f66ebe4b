//! Reading a pair of numeric columns from a small delimited file.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

fn split(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Two columns selected by header name or 1-based index; the first two by
/// default. A first row that does not parse as numbers is the header.
pub fn read_pair(path: &Path, columns: Option<&[String]>) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let header: Option<Vec<String>> = match rows.peek() {
        Some((_, first)) if split(first).iter().any(|c| c.parse::<f64>().is_err()) => {
            let h = split(first).into_iter().map(String::from).collect();
            rows.next();
            Some(h)
        }
        _ => None,
    };

    let pick = |spec: &str| -> Result<usize> {
        if let Some(h) = &header {
            if let Some(pos) = h.iter().position(|c| c == spec) {
                return Ok(pos);
            }
        }
        match spec.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => Err(anyhow!("no column `{spec}` in {}", path.display())),
        }
    };
    let (cx, cy) = match columns {
        Some([a, b]) => (pick(a)?, pick(b)?),
        Some(_) => bail!("--columns takes exactly two columns"),
        None => (0, 1),
    };

    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (lineno, line) in rows {
        let cells = split(line);
        for (col, out) in [(cx, &mut x), (cy, &mut y)] {
            let cell = cells
                .get(col)
                .ok_or_else(|| anyhow!("line {lineno}: missing column {}", col + 1))?;
            let v: f64 = cell
                .parse()
                .map_err(|_| anyhow!("line {lineno}, column {}: non-numeric value `{cell}`", col + 1))?;
            out.push(v);
        }
    }
    Ok((x, y))
}
