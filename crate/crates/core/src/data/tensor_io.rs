//! `CWT1` tensor files: magic, `u32` rank, `u32` dims, little-endian `f32` data.

use std::io::{self, Read, Write};

use crate::autograd::Tensor;
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"CWT1";

/// Largest rank accepted when reading, a guard against garbage headers.
const MAX_FILE_RANK: usize = 8;

pub fn write_tensor<W: Write>(w: &mut W, shape: &[usize], data: &[f32]) -> Result<()> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        let d = u32::try_from(d).map_err(|_| Error::invalid(format!("dimension {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(4 * data.len());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Byte-counting reader that turns short reads into offset-tagged errors.
pub struct OffsetReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> OffsetReader<R> {
    pub fn new(inner: R) -> Self {
        OffsetReader { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(Error::Format {
                        offset: self.offset + filled as u64,
                        msg: format!("unexpected end of file reading {what}"),
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub fn read_u32_le(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn read_u32_be(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_be_bytes(b))
    }

    /// True when no bytes remain.
    pub fn at_end(&mut self) -> Result<bool> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(true),
                Ok(_) => {
                    return Err(Error::Format {
                        offset: self.offset,
                        msg: "trailing bytes after the last record".into(),
                    })
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
}

/// Reads one tensor header, returning its shape.
pub fn read_header<R: Read>(r: &mut OffsetReader<R>) -> Result<Vec<usize>> {
    let start = r.offset();
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic, "tensor magic")?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::Format {
            offset: start,
            msg: format!("bad tensor magic {magic:?}"),
        });
    }
    let rank_at = r.offset();
    let rank = r.read_u32_le("tensor rank")? as usize;
    if rank > MAX_FILE_RANK {
        return Err(Error::Format {
            offset: rank_at,
            msg: format!("tensor rank {rank} exceeds {MAX_FILE_RANK}"),
        });
    }
    (0..rank).map(|_| Ok(r.read_u32_le("tensor dimension")? as usize)).collect()
}

/// Appends `count` little-endian `f32` values to `out`.
pub fn read_f32s<R: Read>(r: &mut OffsetReader<R>, count: usize, out: &mut Vec<f32>) -> Result<()> {
    const CHUNK: usize = 1 << 14;
    let mut buf = vec![0u8; 4 * CHUNK.min(count)];
    let mut left = count;
    while left > 0 {
        let n = left.min(CHUNK);
        r.read_exact(&mut buf[..4 * n], "tensor data")?;
        out.extend(buf[..4 * n].chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
        left -= n;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut OffsetReader<R>) -> Result<Tensor<f32>> {
    let shape = read_header(r)?;
    let n = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    read_f32s(r, n, &mut data)?;
    Tensor::new(shape, data)
}

pub fn save_tensor(path: &std::path::Path, t: &Tensor<f32>) -> Result<()> {
    let f = std::fs::File::create(path).map_err(Error::at_path(path))?;
    let mut w = io::BufWriter::new(f);
    write_tensor(&mut w, t.shape(), t.data())?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: &std::path::Path) -> Result<Tensor<f32>> {
    let f = std::fs::File::open(path).map_err(Error::at_path(path))?;
    read_tensor(&mut OffsetReader::new(io::BufReader::new(f)))
}
