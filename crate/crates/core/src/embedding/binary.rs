//! ACTE binary layout (all integers little-endian):
//!
//! ```text
//! magic   "ACTE"            4 bytes
//! version u32 = 1
//! dim     u32
//! count   u64
//! rows    count * dim f32
//! ids     count * (u32 byte length, UTF-8 bytes)
//! ```

use std::fs;
use std::path::Path;

use super::{EmbeddingError, EmbeddingMatrix};

pub const ACTE_MAGIC: [u8; 4] = *b"ACTE";
pub const ACTE_VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.bytes(&v.to_le_bytes());
        }
    }
    pub fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.bytes(&v.to_le_bytes());
        }
    }
    pub fn str(&mut self, s: &str) {
        self.u32(u32::try_from(s.len()).expect("string shorter than 4 GiB"));
        self.bytes(s.as_bytes());
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], EmbeddingError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(EmbeddingError::Truncated {
                offset: self.pos,
                needed: n - available,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), EmbeddingError> {
        let found: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        if found != expected {
            return Err(EmbeddingError::BadMagic { found, expected });
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, EmbeddingError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, EmbeddingError> {
        let bytes = self.take(n.checked_mul(4).ok_or(EmbeddingError::Truncated {
            offset: self.pos,
            needed: usize::MAX,
        })?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, EmbeddingError> {
        let bytes = self.take(n.checked_mul(8).ok_or(EmbeddingError::Truncated {
            offset: self.pos,
            needed: usize::MAX,
        })?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn str(&mut self) -> Result<String, EmbeddingError> {
        let len = self.u32()? as usize;
        let start = self.pos;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| EmbeddingError::InvalidUtf8(start))
    }

    pub fn finish(self) -> Result<(), EmbeddingError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(EmbeddingError::TrailingBytes(n)),
        }
    }
}

pub fn encode_binary(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(&ACTE_MAGIC);
    w.u32(ACTE_VERSION);
    w.u32(u32::try_from(matrix.dim()).expect("dim fits u32"));
    w.u64(matrix.len() as u64);
    w.f32s(matrix.data());
    for id in matrix.ids() {
        w.str(id);
    }
    w.buf
}

pub fn decode_binary(bytes: &[u8]) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut r = ByteReader::new(bytes);
    r.magic(ACTE_MAGIC)?;
    let version = r.u32()?;
    if version != ACTE_VERSION {
        return Err(EmbeddingError::VersionUnsupported(version));
    }
    let dim = r.u32()? as usize;
    let count = usize::try_from(r.u64()?).map_err(|_| EmbeddingError::Truncated {
        offset: 12,
        needed: usize::MAX,
    })?;
    let data = r.f32s(count.checked_mul(dim).ok_or(EmbeddingError::Truncated {
        offset: 20,
        needed: usize::MAX,
    })?)?;
    let ids = (0..count).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    EmbeddingMatrix::new(dim, ids, data)
}

pub fn write_binary(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    let path = path.as_ref();
    fs::write(path, encode_binary(matrix)).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, EmbeddingError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_binary(&bytes)
}
