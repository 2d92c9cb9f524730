//! On-disk formats: `MVX1` dense matrices, `rows cols nnz` sparse text,
//! keyed lists (`id<TAB>a,b,c`), id lists, cluster assignments, and
//! vocabularies (`term<TAB>document frequency`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::linalg::SparseMatrix;
use crate::text_view::TagVocabulary;
use crate::{Error, Result};

pub const DENSE_MAGIC: &[u8; 4] = b"MVX1";

pub fn encode_dense(m: &DMatrix<f64>, out: &mut impl Write) -> Result<()> {
    out.write_all(DENSE_MAGIC)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn decode_dense(input: &mut impl Read, path: &Path) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    read_exact(input, &mut magic, path, "header")?;
    if &magic != DENSE_MAGIC {
        return Err(Error::format(path, "missing MVX1 magic"));
    }
    let mut word = [0u8; 8];
    read_exact(input, &mut word, path, "header")?;
    let rows = u64::from_le_bytes(word) as usize;
    read_exact(input, &mut word, path, "header")?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(path, "dimensions overflow"))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::format(
            path,
            format!("expected {} value bytes for {rows}x{cols}, found {}", len * 8, bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(path, format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub fn write_dense(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_dense(m, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    decode_dense(&mut r, path)
}

pub fn write_sparse(path: impl AsRef<Path>, m: &SparseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{i} {j} {v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sparse(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().ok_or_else(|| Error::format(path, "empty file"))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(path, format!("bad header {header:?}")))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(Error::format(path, format!("header needs rows cols nnz, got {header:?}")));
    };
    let mut triplets = Vec::with_capacity(nnz);
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::format(path, format!("line {}: expected `i j v`, got {line:?}", ln + 2));
        if parts.len() != 3 {
            return Err(bad());
        }
        let i: usize = parts[0].parse().map_err(|_| bad())?;
        let j: usize = parts[1].parse().map_err(|_| bad())?;
        let v: f64 = parts[2].parse().map_err(|_| bad())?;
        triplets.push((i, j, v));
    }
    if triplets.len() != nnz {
        return Err(Error::format(path, format!("header says {nnz} entries, found {}", triplets.len())));
    }
    SparseMatrix::from_triplets(rows, cols, triplets)
}

/// Writes `id<TAB>v1,v2,...` lines.
pub fn write_keyed_lists(path: impl AsRef<Path>, rows: &[(String, Vec<String>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, values) in rows {
        writeln!(w, "{id}\t{}", values.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `id<TAB>v1,v2,...` lines; values may also be space separated.
pub fn read_keyed_lists(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<String>)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (ln, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, format!("line {}: missing tab", ln + 1)))?;
        let values = rest
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        out.push((id.to_string(), values));
    }
    Ok(out)
}

pub fn write_ids(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for id in ids {
        writeln!(w, "{id}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            ids.push(id.to_string());
        }
    }
    Ok(ids)
}

/// Writes `id<TAB>cluster` lines.
pub fn write_assignments(path: impl AsRef<Path>, ids: &[String], labels: &[usize]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::validation(format!("{} ids for {} labels", ids.len(), labels.len())));
    }
    let mut w = BufWriter::new(File::create(path)?);
    for (id, l) in ids.iter().zip(labels) {
        writeln!(w, "{id}\t{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignments(path: impl AsRef<Path>) -> Result<Vec<(String, usize)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (ln, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format(path, format!("line {}: expected `id<TAB>cluster`", ln + 1));
        let (id, c) = line.split_once('\t').ok_or_else(bad)?;
        out.push((id.to_string(), c.trim().parse().map_err(|_| bad())?));
    }
    Ok(out)
}

pub fn write_vocabulary(path: impl AsRef<Path>, vocab: &TagVocabulary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (t, df) in vocab.terms().iter().zip(vocab.doc_freq()) {
        writeln!(w, "{t}\t{df}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vocabulary(path: impl AsRef<Path>) -> Result<TagVocabulary> {
    let path = path.as_ref();
    let (mut terms, mut dfs) = (Vec::new(), Vec::new());
    for (ln, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format(path, format!("line {}: expected `term<TAB>count`", ln + 1));
        let (t, df) = line.split_once('\t').ok_or_else(bad)?;
        terms.push(t.to_string());
        dfs.push(df.trim().parse().map_err(|_| bad())?);
    }
    TagVocabulary::from_terms(terms, dfs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dense_layout_is_row_major_little_endian() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut buf = Vec::new();
        encode_dense(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"MVX1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 2.0);
        assert_eq!(buf.len(), 20 + 6 * 8);
    }

    #[test]
    fn dense_rejects_bad_input() {
        let p = Path::new("x");
        assert!(matches!(decode_dense(&mut &b"MVX2"[..], p), Err(Error::Format { .. })));
        let mut buf = Vec::new();
        encode_dense(&DMatrix::from_element(2, 2, 1.0), &mut buf).unwrap();
        buf.pop();
        assert!(matches!(decode_dense(&mut &buf[..], p), Err(Error::Format { .. })));
        assert!(matches!(decode_dense(&mut &b"MV"[..], p), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn dense_round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let m = DMatrix::from_fn(rows, cols, |i, j| (seed.wrapping_mul(31 + i as u64 * 7 + j as u64) as f64).sin() * 1e3);
            let mut buf = Vec::new();
            encode_dense(&m, &mut buf).unwrap();
            let back = decode_dense(&mut &buf[..], Path::new("mem")).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn sparse_and_text_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let s = SparseMatrix::from_triplets(3, 4, [(0, 1, 1.0), (2, 3, 0.25), (1, 0, 2.0)]).unwrap();
        let p = dir.path().join("t.txt");
        write_sparse(&p, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("3 4 3\n"));
        assert_eq!(read_sparse(&p).unwrap(), s);

        std::fs::write(&p, "2 2 2\n0 0 1\n").unwrap();
        assert!(matches!(read_sparse(&p), Err(Error::Format { .. })));
        std::fs::write(&p, "2 2 1\n0 5 1\n").unwrap();
        assert!(matches!(read_sparse(&p), Err(Error::Validation(_))));

        let rows = vec![
            ("a".to_string(), vec!["x".to_string(), "y".to_string()]),
            ("b".to_string(), vec![]),
        ];
        write_keyed_lists(&p, &rows).unwrap();
        assert_eq!(read_keyed_lists(&p).unwrap(), rows);

        let ids = vec!["i1".to_string(), "i2".to_string()];
        write_ids(&p, &ids).unwrap();
        assert_eq!(read_ids(&p).unwrap(), ids);

        write_assignments(&p, &ids, &[3, 0]).unwrap();
        assert_eq!(read_assignments(&p).unwrap(), vec![("i1".to_string(), 3), ("i2".to_string(), 0)]);
        assert!(read_dense(dir.path().join("missing")).is_err_and(|e| e.exit_code() == 4));

        let vocab = TagVocabulary::from_terms(vec!["sky".into(), "sea".into()], vec![7, 2]).unwrap();
        write_vocabulary(&p, &vocab).unwrap();
        let back = read_vocabulary(&p).unwrap();
        assert_eq!(back.terms(), vocab.terms());
        assert_eq!(back.doc_freq(), vocab.doc_freq());
        std::fs::write(&p, "sky 7\n").unwrap();
        assert!(matches!(read_vocabulary(&p), Err(Error::Format { .. })));
    }
}
