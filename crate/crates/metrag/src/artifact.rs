//! On-disk artifacts: the index binary format, run metadata embedded in
//! every output, and fingerprint helpers.
//!
//! Artifacts carry `{seed, config_fingerprint, tool_version}` so a later
//! `verify` pass can prove which configuration produced them. All formats
//! are byte-deterministic: identical inputs write identical files.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retriever::{Document, Index};
use crate::textcore::{fnv1a64, EmbeddingVector, EncoderParams};

const INDEX_MAGIC: &[u8; 8] = b"MRGIDX1\0";
const INDEX_VERSION: u32 = 1;

/// Version string stamped into artifacts.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad artifact: {0}")]
    Malformed(String),
    #[error(transparent)]
    Encoder(#[from] crate::textcore::TextcoreError),
    #[error(transparent)]
    Retriever(#[from] crate::retriever::RetrieverError),
}

/// Run provenance embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub seed: i64,
    pub config_fingerprint: String,
    pub tool_version: String,
}

impl ArtifactMeta {
    #[must_use]
    pub fn new(seed: i64, config_fingerprint: String) -> Self {
        Self {
            seed,
            config_fingerprint,
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    /// The leading comment line embedded in CSV artifacts.
    #[must_use]
    pub fn csv_comment(&self) -> String {
        format!(
            "# seed={} config_fingerprint={} tool_version={}",
            self.seed, self.config_fingerprint, self.tool_version
        )
    }

    pub fn parse_csv_comment(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# ")?;
        let mut seed = None;
        let mut fingerprint = None;
        let mut version = None;
        for part in rest.split_whitespace() {
            let (key, value) = part.split_once('=')?;
            match key {
                "seed" => seed = value.parse().ok(),
                "config_fingerprint" => fingerprint = Some(value.to_string()),
                "tool_version" => version = Some(value.to_string()),
                _ => {}
            }
        }
        Some(Self {
            seed: seed?,
            config_fingerprint: fingerprint?,
            tool_version: version?,
        })
    }
}

/// FNV-1a fingerprint of any serializable value via its canonical JSON.
pub fn fingerprint_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("value serializes");
    format!("{:016x}", fnv1a64(json.as_bytes()))
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(bytes);
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        if self.pos + n > self.bytes.len() {
            return Err(ArtifactError::Malformed("unexpected end of file".to_string()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ArtifactError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn blob(&mut self) -> Result<&'a [u8], ArtifactError> {
        let len = self.u64()? as usize;
        self.take(len)
    }

    fn string(&mut self) -> Result<String, ArtifactError> {
        String::from_utf8(self.blob()?.to_vec())
            .map_err(|_| ArtifactError::Malformed("invalid utf-8".to_string()))
    }
}

/// Serialize an index with its provenance. Layout: magic, format version,
/// meta JSON, encoder params (canonical encoder artifact bytes), documents,
/// embeddings, all length-prefixed little-endian.
pub fn write_index(path: &Path, index: &Index, meta: &ArtifactMeta) -> Result<(), ArtifactError> {
    let mut out = Vec::new();
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    put_bytes(&mut out, serde_json::to_string(meta).unwrap().as_bytes());
    put_bytes(&mut out, &index.params().to_bytes());
    out.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for doc in index.documents() {
        put_bytes(&mut out, doc.id.as_bytes());
        put_bytes(&mut out, doc.title.as_bytes());
        put_bytes(&mut out, doc.text.as_bytes());
    }
    for doc in index.documents() {
        let emb = index.embedding(&doc.id).expect("index is consistent");
        out.extend_from_slice(&(emb.len() as u64).to_le_bytes());
        for v in emb.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_index(path: &Path) -> Result<(Index, ArtifactMeta), ArtifactError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = Cursor { bytes: &bytes, pos: 0 };
    if cursor.take(8)? != INDEX_MAGIC {
        return Err(ArtifactError::Malformed("wrong magic".to_string()));
    }
    let version = cursor.u32()?;
    if version != INDEX_VERSION {
        return Err(ArtifactError::Malformed(format!(
            "unsupported index version {version}"
        )));
    }
    let meta: ArtifactMeta = serde_json::from_slice(cursor.blob()?)
        .map_err(|e| ArtifactError::Malformed(format!("bad meta: {e}")))?;
    let params = EncoderParams::from_bytes(cursor.blob()?)?;
    let n_docs = cursor.u64()? as usize;
    let mut documents = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        documents.push(Document {
            id: cursor.string()?,
            title: cursor.string()?,
            text: cursor.string()?,
        });
    }
    let mut embeddings = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let dim = cursor.u64()? as usize;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(f64::from_le_bytes(cursor.take(8)?.try_into().unwrap()));
        }
        embeddings.push(EmbeddingVector::from_values(values));
    }
    if cursor.pos != bytes.len() {
        return Err(ArtifactError::Malformed("trailing bytes".to_string()));
    }
    let index = Index::from_parts(documents, embeddings, params)?;
    Ok((index, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retriever::build_index;

    #[test]
    fn index_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let params = EncoderParams::identity(64);
        let corpus = vec![
            Document {
                id: "a".to_string(),
                title: "T".to_string(),
                text: "some text".to_string(),
            },
            Document {
                id: "b".to_string(),
                title: String::new(),
                text: "other words".to_string(),
            },
        ];
        let index = build_index(&corpus, &params).unwrap();
        let meta = ArtifactMeta::new(7, "deadbeefdeadbeef".to_string());
        let path = dir.path().join("index.bin");
        write_index(&path, &index, &meta).unwrap();
        let first = std::fs::read(&path).unwrap();

        let (restored, restored_meta) = read_index(&path).unwrap();
        assert_eq!(restored_meta, meta);
        assert_eq!(restored.documents(), index.documents());
        assert_eq!(restored.params_fingerprint(), index.params_fingerprint());

        let path2 = dir.path().join("index2.bin");
        write_index(&path2, &restored, &meta).unwrap();
        assert_eq!(first, std::fs::read(&path2).unwrap());
    }

    #[test]
    fn index_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let params = EncoderParams::identity(16);
        let corpus = vec![Document {
            id: "a".to_string(),
            title: String::new(),
            text: "x".to_string(),
        }];
        let index = build_index(&corpus, &params).unwrap();
        let meta = ArtifactMeta::new(0, "0".repeat(16));
        let path = dir.path().join("index.bin");
        write_index(&path, &index, &meta).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[3] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_index(&path).is_err());
    }

    #[test]
    fn csv_comment_roundtrips() {
        let meta = ArtifactMeta::new(-3, "00ff00ff00ff00ff".to_string());
        let parsed = ArtifactMeta::parse_csv_comment(&meta.csv_comment()).unwrap();
        assert_eq!(parsed, meta);
    }
}
