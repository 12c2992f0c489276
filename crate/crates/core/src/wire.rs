//! Little-endian byte encoding used by tree and agent snapshots.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("unexpected end of data")]
    Truncated,
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: [u8; 4] },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("corrupt data: {0}")]
    Corrupt(String),
}

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u16(&mut self, v: u16) {
        self.put_bytes(&v.to_le_bytes());
    }

    pub fn put_u32(&mut self, v: u32) {
        self.put_bytes(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.put_bytes(&v.to_le_bytes());
    }

    pub fn put_u128(&mut self, v: u128) {
        self.put_bytes(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.put_u64(v.to_bits());
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_u64(s.len() as u64);
        self.put_bytes(s.as_bytes());
    }

    /// Length-prefixed blob.
    pub fn put_blob(&mut self, b: &[u8]) {
        self.put_u64(b.len() as u64);
        self.put_bytes(b);
    }
}

#[derive(Debug)]
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn is_at_end(&self) -> bool {
        self.pos == self.data.len()
    }

    pub fn get_bytes(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated)?;
        let out = self.data.get(self.pos..end).ok_or(WireError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.get_bytes(N)?.try_into().expect("length checked"))
    }

    pub fn get_u8(&mut self) -> Result<u8, WireError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn get_u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn get_u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn get_u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn get_u128(&mut self) -> Result<u128, WireError> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    pub fn get_f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_bits(self.get_u64()?))
    }

    /// A length prefix, sanity-checked against the bytes that remain.
    pub fn get_len(&mut self) -> Result<usize, WireError> {
        let n = self.get_u64()?;
        if n > (self.data.len() - self.pos) as u64 * 8 + 64 {
            return Err(WireError::Corrupt(format!("implausible length {n}")));
        }
        Ok(n as usize)
    }

    pub fn get_str(&mut self) -> Result<String, WireError> {
        let n = self.get_len()?;
        String::from_utf8(self.get_bytes(n)?.to_vec())
            .map_err(|e| WireError::Corrupt(e.to_string()))
    }

    pub fn get_blob(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.get_len()?;
        self.get_bytes(n)
    }

    pub fn expect_magic(&mut self, magic: [u8; 4]) -> Result<(), WireError> {
        if self.array::<4>()? != magic {
            return Err(WireError::BadMagic { expected: magic });
        }
        Ok(())
    }

    pub fn expect_version(&mut self, expected: u16) -> Result<(), WireError> {
        let found = self.get_u16()?;
        if found != expected {
            return Err(WireError::Version { found, expected });
        }
        Ok(())
    }
}
