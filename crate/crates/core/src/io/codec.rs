//! Little-endian byte codec shared by the binary cache and checkpoint
//! formats. Length-prefixed, bounds-checked, with no padding, so a payload
//! round-trips bit for bit.

use crate::error::{Error, Result};
use crate::C64;
use ndarray::Array2;

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn c64(&mut self, v: C64) {
        self.f64(v.re);
        self.f64(v.im);
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.usize(v.len());
        self.buf.extend_from_slice(v);
    }

    pub fn f64_slice(&mut self, v: &[f64]) {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
    }

    pub fn usize_slice(&mut self, v: &[usize]) {
        self.usize(v.len());
        for &x in v {
            self.usize(x);
        }
    }

    pub fn c64_slice(&mut self, v: &[C64]) {
        self.usize(v.len());
        for &x in v {
            self.c64(x);
        }
    }

    pub fn array2_f64(&mut self, a: &Array2<f64>) {
        self.usize(a.nrows());
        self.usize(a.ncols());
        for &x in a.iter() {
            self.f64(x);
        }
    }

    pub fn array2_c64(&mut self, a: &Array2<C64>) {
        self.usize(a.nrows());
        self.usize(a.ncols());
        for &x in a.iter() {
            self.c64(x);
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(format!(
                "truncated payload: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::format(format!("length {v} overflows usize")))
    }

    /// Length prefix that is about to size an allocation; bounded by the
    /// bytes actually remaining so corrupt files cannot trigger huge
    /// reservations.
    fn checked_len(&mut self, elem_bytes: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem_bytes) > self.buf.len() - self.pos {
            return Err(Error::format(format!(
                "declared length {n} exceeds remaining payload"
            )));
        }
        Ok(n)
    }

    pub fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn c64(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.checked_len(1)?;
        self.take(n)
    }

    pub fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.checked_len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn usize_vec(&mut self) -> Result<Vec<usize>> {
        let n = self.checked_len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }

    pub fn c64_vec(&mut self) -> Result<Vec<C64>> {
        let n = self.checked_len(16)?;
        (0..n).map(|_| self.c64()).collect()
    }

    pub fn array2_f64(&mut self) -> Result<Array2<f64>> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        if rows.saturating_mul(cols).saturating_mul(8) > self.buf.len() - self.pos {
            return Err(Error::format("array dimensions exceed remaining payload"));
        }
        let data: Vec<f64> = (0..rows * cols).map(|_| self.f64()).collect::<Result<_>>()?;
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::format(format!("bad array shape: {e}")))
    }

    pub fn array2_c64(&mut self) -> Result<Array2<C64>> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        if rows.saturating_mul(cols).saturating_mul(16) > self.buf.len() - self.pos {
            return Err(Error::format("array dimensions exceed remaining payload"));
        }
        let data: Vec<C64> = (0..rows * cols).map(|_| self.c64()).collect::<Result<_>>()?;
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::format(format!("bad array shape: {e}")))
    }
}
