//! Corrupted datasets and their on-disk container.
//!
//! The dump format is a small self-describing binary container: an 8-byte
//! magic, a JSON header (provenance and dimensions), then raw little-endian
//! payload blocks. Floats are stored as raw bits, so a round trip is bitwise.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DatagenError;
use crate::autodiff::Tensor;

const MAGIC: &[u8; 8] = b"SDRODS01";

/// Where a dataset came from: the generation seed plus a content hash of the
/// generating specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub spec_hash: String,
}

/// SHA-256 hex digest of a serializable spec, with map keys sorted by the
/// serializer so the hash is independent of field order at the call site.
pub fn spec_hash<T: Serialize>(spec: &T) -> String {
    let json = serde_json::to_string(spec).expect("spec serialization cannot fail");
    let mut h = Sha256::new();
    h.update(json.as_bytes());
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Features, labels, and per-sample corruption severities.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedDataset {
    x: Tensor,
    y: Vec<usize>,
    severity: Vec<usize>,
    num_classes: usize,
    max_severity: usize,
    provenance: Provenance,
}

impl CorruptedDataset {
    pub fn new(
        x: Tensor,
        y: Vec<usize>,
        severity: Vec<usize>,
        num_classes: usize,
        max_severity: usize,
        provenance: Provenance,
    ) -> Result<Self, DatagenError> {
        let n = x.nrows();
        if y.len() != n || severity.len() != n {
            return Err(DatagenError::Inconsistent {
                detail: format!(
                    "row counts differ: {} features, {} labels, {} severities",
                    n,
                    y.len(),
                    severity.len()
                ),
            });
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= num_classes) {
            return Err(DatagenError::Inconsistent {
                detail: format!("label {bad} out of range for {num_classes} classes"),
            });
        }
        if let Some(&bad) = severity.iter().find(|&&s| s > max_severity) {
            return Err(DatagenError::Inconsistent {
                detail: format!("severity {bad} exceeds max {max_severity}"),
            });
        }
        Ok(Self {
            x,
            y,
            severity,
            num_classes,
            max_severity,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn max_severity(&self) -> usize {
        self.max_severity
    }

    pub fn features(&self) -> &Tensor {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn severities(&self) -> &[usize] {
        &self.severity
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Indices of all samples at the given severity.
    pub fn indices_at_severity(&self, s: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.severity[i] == s).collect()
    }

    /// SHA-256 hex digest of the serialized container.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        self.write_to(&mut bytes).expect("in-memory write");
        let mut h = Sha256::new();
        h.update(&bytes);
        hex_string(&h.finalize())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), DatagenError> {
        #[derive(Serialize)]
        struct Header<'a> {
            n: usize,
            dim: usize,
            num_classes: usize,
            max_severity: usize,
            provenance: &'a Provenance,
        }
        let header = serde_json::to_vec(&Header {
            n: self.len(),
            dim: self.dim(),
            num_classes: self.num_classes,
            max_severity: self.max_severity,
            provenance: &self.provenance,
        })
        .expect("header serialization cannot fail");

        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(header.len() as u32)?;
        w.write_all(&header)?;
        for &v in self.x.data() {
            w.write_u64::<LittleEndian>(v.to_bits())?;
        }
        for &l in &self.y {
            w.write_u32::<LittleEndian>(l as u32)?;
        }
        for &s in &self.severity {
            w.write_u32::<LittleEndian>(s as u32)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, DatagenError> {
        #[derive(Deserialize)]
        struct Header {
            n: usize,
            dim: usize,
            num_classes: usize,
            max_severity: usize,
            provenance: Provenance,
        }
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DatagenError::BadContainer {
                detail: "bad magic".to_string(),
            });
        }
        let header_len = r.read_u32::<LittleEndian>()? as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let header: Header =
            serde_json::from_slice(&header_bytes).map_err(|e| DatagenError::BadContainer {
                detail: format!("bad header: {e}"),
            })?;

        let mut data = Vec::with_capacity(header.n * header.dim);
        for _ in 0..header.n * header.dim {
            data.push(f64::from_bits(r.read_u64::<LittleEndian>()?));
        }
        let mut y = Vec::with_capacity(header.n);
        for _ in 0..header.n {
            y.push(r.read_u32::<LittleEndian>()? as usize);
        }
        let mut severity = Vec::with_capacity(header.n);
        for _ in 0..header.n {
            severity.push(r.read_u32::<LittleEndian>()? as usize);
        }
        let x = Tensor::matrix(header.n, header.dim, data).map_err(|e| {
            DatagenError::BadContainer {
                detail: e.to_string(),
            }
        })?;
        Self::new(
            x,
            y,
            severity,
            header.num_classes,
            header.max_severity,
            header.provenance,
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), DatagenError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn load(path: &Path) -> Result<Self, DatagenError> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}
