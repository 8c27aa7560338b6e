//! Measure CSV: header `x1,...,xd[,w]`, one atom per row, `#` comments.
//! Without a `w` column every atom gets the same weight.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::DiscreteMeasure;
use crate::error::{Error, Result};

pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
    parse_measure_csv(file, path)
}

pub(crate) fn parse_measure_csv<R: Read>(reader: R, path: &Path) -> Result<DiscreteMeasure> {
    let parse_err = |line: usize, msg: String| Error::Parse { path: path.into(), line, msg };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_w = names.last() == Some(&"w");
    let dim = names.len() - usize::from(has_w);
    if dim == 0 {
        return Err(parse_err(1, "no coordinate columns".into()));
    }
    for (k, name) in names.iter().take(dim).enumerate() {
        if *name != format!("x{}", k + 1) {
            return Err(parse_err(1, format!("expected column x{}, found {name:?}", k + 1)));
        }
    }
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(parse_err(line, format!("expected {} fields, got {}", names.len(), rec.len())));
        }
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
            if k < dim {
                pts.push(v);
            } else {
                ws.push(v);
            }
        }
        if !has_w {
            ws.push(1.0);
        }
    }
    if ws.is_empty() {
        return Err(parse_err(1, "no atoms".into()));
    }
    DiscreteMeasure::from_flat(dim, pts, ws)
}

pub fn write_measure_csv(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    let io_err = |source| Error::Io { path: path.into(), source };
    let mut f = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header: Vec<String> = (1..=m.dim()).map(|k| format!("x{k}")).collect();
    header.push("w".into());
    writeln!(f, "{}", header.join(",")).map_err(io_err)?;
    for (p, w) in m.atoms() {
        let mut row: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
        row.push(format!("{w:e}"));
        writeln!(f, "{}", row.join(",")).map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<DiscreteMeasure> {
        parse_measure_csv(s.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn weights_optional() {
        let m = parse("# comment\nx1,x2\n0,1\n2,3\n").unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        let m = parse("x1,w\n-1,1\n# inline comment line\n1,3\n").unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse("y1,w\n0,1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("x1,w\n0,abc\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("x1,w\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("x1,w\n0,0\n"), Err(Error::AllZeroWeights)));
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("bassmbb-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        let m = DiscreteMeasure::from_points(&[vec![0.1, -2.0], vec![3.5, 1e-7]], &[0.3, 0.7]).unwrap();
        write_measure_csv(&path, &m).unwrap();
        let back = read_measure_csv(&path).unwrap();
        assert_eq!(back, m);
        std::fs::remove_dir_all(&dir).ok();
    }
}
