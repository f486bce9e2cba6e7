use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MetadataTable, TableError};

/// Dense row-major `n x d` matrix of per-instance embeddings. Row `i` is
/// aligned with table row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    values: Vec<f32>,
}

/// Sidecar written next to `<name>.f32` as `<name>.meta`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub n: usize,
    pub d: usize,
    /// Hex FNV-1a 64 over the concatenated row ids.
    pub id_checksum: String,
}

/// FNV-1a 64-bit hash over the concatenation of `ids`.
pub fn fnv1a64_ids<S: AsRef<str>>(ids: &[S]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for id in ids {
        for b in id.as_ref().bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(PRIME);
        }
    }
    hash
}

impl EmbeddingMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f32>) -> Result<Self, TableError> {
        if d == 0 {
            return Err(TableError::ZeroDimension);
        }
        if values.len() != n * d {
            return Err(TableError::SizeMismatch {
                n,
                d,
                expected: n * d * 4,
                actual: values.len() * 4,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TableError::NonFinite {
                index,
                row: index / d,
                col: index % d,
            });
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, TableError> {
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(TableError::SizeMismatch {
                    n: rows.len(),
                    d,
                    expected: rows.len() * d * 4,
                    actual: (values.len() + r.len()) * 4,
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), d, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.d)
    }

    /// Reads exactly `n * d` little-endian f32 values.
    pub fn read_from<R: Read>(mut source: R, n: usize, d: usize) -> Result<Self, TableError> {
        if d == 0 {
            return Err(TableError::ZeroDimension);
        }
        let mut bytes = Vec::with_capacity(n * d * 4);
        source.read_to_end(&mut bytes)?;
        let expected = n * d * 4;
        if bytes.len() != expected {
            return Err(TableError::SizeMismatch {
                n,
                d,
                expected,
                actual: bytes.len(),
            });
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(n, d, values)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        path.with_extension("meta")
    }

    /// Writes `<path>` (raw f32) and its `.meta` sidecar.
    pub fn save<S: AsRef<str>>(&self, path: &Path, ids: &[S]) -> Result<(), TableError> {
        let file = fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))?;
        let meta = EmbeddingMeta {
            n: self.n,
            d: self.d,
            id_checksum: format!("{:016x}", fnv1a64_ids(ids)),
        };
        fs::write(
            Self::meta_path(path),
            serde_json::to_string(&meta).expect("meta serializes"),
        )?;
        Ok(())
    }

    /// Loads `<path>` using the shape recorded in its `.meta` sidecar.
    pub fn load(path: &Path) -> Result<(Self, EmbeddingMeta), TableError> {
        let meta_path = Self::meta_path(path);
        let text = fs::read_to_string(&meta_path)?;
        let meta: EmbeddingMeta =
            serde_json::from_str(&text).map_err(|e| TableError::BadMeta {
                path: meta_path.clone(),
                reason: e.to_string(),
            })?;
        let file = fs::File::open(path)?;
        let m = Self::read_from(std::io::BufReader::new(file), meta.n, meta.d)?;
        Ok((m, meta))
    }

    /// Checks that this matrix lines up with `table` row-for-row.
    pub fn check_alignment(&self, table: &MetadataTable, meta: Option<&EmbeddingMeta>) -> Result<(), TableError> {
        if self.n != table.row_count() {
            return Err(TableError::RowCountMismatch {
                embedding_rows: self.n,
                table_rows: table.row_count(),
            });
        }
        if let Some(meta) = meta {
            let expected = format!("{:016x}", fnv1a64_ids(table.ids()));
            if !meta.id_checksum.eq_ignore_ascii_case(&expected) {
                return Err(TableError::ChecksumMismatch {
                    expected,
                    found: meta.id_checksum.clone(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn le_bytes(vals: &[f32]) -> Vec<u8> {
        vals.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn reads_exact_shape() {
        let bytes = le_bytes(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(bytes.len(), 24);
        let m = EmbeddingMatrix::read_from(&bytes[..], 2, 3).unwrap();
        assert_eq!((m.n(), m.d()), (2, 3));
        assert_eq!(m.row(1), [4.0, 5.0, 6.0]);
    }

    #[test]
    fn size_mismatch() {
        let bytes = [0u8; 20];
        assert!(matches!(
            EmbeddingMatrix::read_from(&bytes[..], 2, 3),
            Err(TableError::SizeMismatch { expected: 24, actual: 20, .. })
        ));
    }

    #[test]
    fn non_finite_reports_first_index() {
        let bytes = le_bytes(&[0.0, 1.0, f32::NAN, f32::INFINITY]);
        match EmbeddingMatrix::read_from(&bytes[..], 2, 2) {
            Err(TableError::NonFinite { index, row, col }) => assert_eq!((index, row, col), (2, 1, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fnv_known_values() {
        // Reference values of FNV-1a 64 for "" and "a".
        assert_eq!(fnv1a64_ids::<&str>(&[]), 0xcbf29ce484222325);
        assert_eq!(fnv1a64_ids(&["a"]), 0xaf63dc4c8601ec8c);
        // concatenation, no separator
        assert_eq!(fnv1a64_ids(&["ab", "c"]), fnv1a64_ids(&["a", "bc"]));
    }

    #[test]
    fn save_load_checks_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.f32");
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, -2.5], vec![0.125, 3.0]]).unwrap();
        m.save(&path, &["x", "y"]).unwrap();
        let (back, meta) = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!(back, m);
        let table = crate::table::ingest_table(
            "id\nx\ny\n".as_bytes(),
            &crate::table::KindHints::new(),
        )
        .unwrap();
        back.check_alignment(&table, Some(&meta)).unwrap();
        let other = crate::table::ingest_table(
            "id\ny\nx\n".as_bytes(),
            &crate::table::KindHints::new(),
        )
        .unwrap();
        assert!(matches!(
            back.check_alignment(&other, Some(&meta)),
            Err(TableError::ChecksumMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn write_read_bit_exact(n in 0usize..8, d in 1usize..6, seed in any::<u64>()) {
            let mut state = seed;
            let values: Vec<f32> = (0..n * d)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let bits = (state >> 32) as u32;
                    let v = f32::from_bits(bits);
                    if v.is_finite() { v } else { 0.5 }
                })
                .collect();
            let m = EmbeddingMatrix::new(n, d, values).unwrap();
            let mut buf = Vec::new();
            m.write_to(&mut buf).unwrap();
            let back = EmbeddingMatrix::read_from(&buf[..], n, d).unwrap();
            let a: Vec<u32> = m.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
