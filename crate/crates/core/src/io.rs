//! Little-endian byte parsing shared by the binary file formats.

use crate::error::FormatError;
use crate::scalar::Scalar;

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N], FormatError> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(FormatError::Truncated(format!(
                "{what} at byte {} needs {N} bytes, file has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found = self.take::<4>("magic")?;
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take("u16")?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take("u32")?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take("u64")?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take("f64")?))
    }

    pub(crate) fn f64_vec<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, FormatError> {
        (0..n).map(|_| self.f64().map(T::lit)).collect()
    }

    /// Fail early when the payload is shorter than announced.
    pub(crate) fn expect_remaining(&self, bytes: usize) -> Result<(), FormatError> {
        let left = self.buf.len() - self.pos;
        if left < bytes {
            return Err(FormatError::Truncated(format!(
                "payload needs {bytes} bytes, {left} remain"
            )));
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::Inconsistent(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
