//! `WVTR` binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"WVTR"
//! version  u16
//! count    u32
//! repeated count times:
//!   name_len u16, name (UTF-8)
//!   rank     u8, dims u32 × rank
//!   payload  f32 × product(dims), row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MAGIC: &[u8; 4] = b"WVTR";
pub const VERSION: u16 = 1;

/// Named tensor with 32-bit payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlob {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorBlob {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let blob = Self {
            name: name.into(),
            shape,
            data,
        };
        let n = element_count(&blob.shape)?;
        if n != blob.data.len() {
            return Err(Error::dims(
                format!("{n} elements for shape {:?}", blob.shape),
                format!("{} elements", blob.data.len()),
            ));
        }
        Ok(blob)
    }

    /// Rank-2 blob from a matrix, narrowing each entry to `f32`.
    pub fn from_matrix(name: impl Into<String>, m: &Matrix) -> Self {
        Self {
            name: name.into(),
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().iter().map(|&x| x as f32).collect(),
        }
    }

    /// Widens a rank-2 (or rank-1, as a single row) blob to a matrix.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let (rows, cols) = match self.shape.as_slice() {
            [r, c] => (*r, *c),
            [c] => (1, *c),
            other => {
                return Err(Error::dims(
                    "rank-1 or rank-2 tensor",
                    format!("`{}` of shape {other:?}", self.name),
                ))
            }
        };
        Matrix::new(
            rows,
            cols,
            self.data.iter().map(|&x| f64::from(x)).collect(),
        )
    }
}

fn element_count(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::ShapeOverflow(format!("{shape:?}")))
}

pub fn encode_tensors(blobs: &[TensorBlob]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_tensors(&mut out, blobs)?;
    Ok(out)
}

pub fn write_tensors(mut w: impl Write, blobs: &[TensorBlob]) -> Result<()> {
    let io = |e| Error::io("<tensor stream>", e);
    let count = u32::try_from(blobs.len())
        .map_err(|_| Error::ShapeOverflow(format!("{} blobs", blobs.len())))?;
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&count.to_le_bytes()).map_err(io)?;
    for blob in blobs {
        let name = blob.name.as_bytes();
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::ShapeOverflow(format!("name of {} bytes", name.len())))?;
        let rank = u8::try_from(blob.shape.len())
            .map_err(|_| Error::ShapeOverflow(format!("rank {}", blob.shape.len())))?;
        if element_count(&blob.shape)? != blob.data.len() {
            return Err(Error::dims(
                format!("payload for shape {:?}", blob.shape),
                format!("{} elements", blob.data.len()),
            ));
        }
        w.write_all(&name_len.to_le_bytes()).map_err(io)?;
        w.write_all(name).map_err(io)?;
        w.write_all(&[rank]).map_err(io)?;
        for &d in &blob.shape {
            let d = u32::try_from(d).map_err(|_| Error::ShapeOverflow(format!("dim {d}")))?;
            w.write_all(&d.to_le_bytes()).map_err(io)?;
        }
        let mut payload = Vec::with_capacity(blob.data.len() * 4);
        for x in &blob.data {
            payload.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&payload).map_err(io)?;
    }
    Ok(())
}

/// Cursor over an in-memory container.
struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::TruncatedFile(what));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<TensorBlob>> {
    let mut r = Reader { buf: bytes };
    if r.take(4, "magic").map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::parse(
            0,
            format!("unsupported tensor version {version}"),
        ));
    }
    let count = r.u32("blob count")? as usize;
    // each blob needs at least 3 header bytes
    let mut blobs = Vec::with_capacity(count.min(r.buf.len() / 3));
    for _ in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|e| Error::parse(0, format!("blob name is not UTF-8: {e}")))?
            .to_owned();
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dims")? as usize);
        }
        let n = element_count(&shape)?;
        let payload = r.take(n * 4, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blobs.push(TensorBlob { name, shape, data });
    }
    if !r.buf.is_empty() {
        return Err(Error::parse(
            0,
            format!("{} trailing bytes after last blob", r.buf.len()),
        ));
    }
    Ok(blobs)
}

pub fn write_tensor_file(path: impl AsRef<Path>, blobs: &[TensorBlob]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tensors(&mut w, blobs)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<Vec<TensorBlob>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .map(BufReader::new)
        .and_then(|mut r| r.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_tensors(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_list_round_trips() {
        let bytes = encode_tensors(&[]).unwrap();
        assert_eq!(bytes.len(), 4 + 2 + 4);
        assert!(decode_tensors(&bytes).unwrap().is_empty());
    }

    #[test]
    fn scalar_round_trips_bit_exactly() {
        let blob = TensorBlob::new("x", vec![1, 1], vec![3.5]).unwrap();
        let bytes = encode_tensors(std::slice::from_ref(&blob)).unwrap();
        let back = decode_tensors(&bytes).unwrap();
        assert_eq!(back, vec![blob]);
        assert_eq!(back[0].data[0].to_bits(), 3.5f32.to_bits());
    }

    #[test]
    fn layout_is_stable() {
        let blob = TensorBlob::new("ab", vec![2], vec![1.0, -2.0]).unwrap();
        let bytes = encode_tensors(&[blob]).unwrap();
        let mut expected = b"WVTR".to_vec();
        expected.extend_from_slice(&1u16.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(b"ab");
        expected.push(1);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        assert!(matches!(decode_tensors(b"WVT"), Err(Error::BadMagic)));
        assert!(matches!(
            decode_tensors(b"NOPE\x01\x00\x00\x00\x00\x00"),
            Err(Error::BadMagic)
        ));
        let blob = TensorBlob::new("t", vec![2, 3], vec![0.5; 6]).unwrap();
        let bytes = encode_tensors(&[blob]).unwrap();
        for cut in 4..bytes.len() {
            assert!(
                matches!(decode_tensors(&bytes[..cut]), Err(Error::TruncatedFile(_))),
                "cut at {cut}"
            );
        }
        let mut huge = b"WVTR".to_vec();
        huge.extend_from_slice(&1u16.to_le_bytes());
        huge.extend_from_slice(&1u32.to_le_bytes());
        huge.extend_from_slice(&0u16.to_le_bytes());
        huge.push(4);
        for _ in 0..4 {
            huge.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(
            decode_tensors(&huge),
            Err(Error::ShapeOverflow(_))
        ));
    }

    #[test]
    fn inconsistent_shape_is_rejected_on_write() {
        let blob = TensorBlob {
            name: "bad".into(),
            shape: vec![2, 2],
            data: vec![0.0; 3],
        };
        assert!(encode_tensors(&[blob]).is_err());
    }

    #[test]
    fn matrix_conversion() {
        let m = Matrix::from_rows(&[[1.0, 2.5], [-3.0, 0.125]]).unwrap();
        let blob = TensorBlob::from_matrix("m", &m);
        assert_eq!(blob.to_matrix().unwrap(), m);
    }

    fn arb_blob() -> impl Strategy<Value = TensorBlob> {
        ("[a-z./_0-9]{0,12}", prop::collection::vec(0usize..5, 0..4)).prop_flat_map(
            |(name, shape)| {
                let n: usize = shape.iter().product();
                prop::collection::vec(any::<u32>().prop_map(f32::from_bits), n).prop_map(
                    move |data| TensorBlob {
                        name: name.clone(),
                        shape: shape.clone(),
                        data,
                    },
                )
            },
        )
    }

    proptest! {
        #[test]
        fn reserialization_is_byte_identical(blobs in prop::collection::vec(arb_blob(), 0..5)) {
            let bytes = encode_tensors(&blobs).unwrap();
            let back = decode_tensors(&bytes).unwrap();
            prop_assert_eq!(encode_tensors(&back).unwrap(), bytes);
            for (a, b) in blobs.iter().zip(&back) {
                let bits = |x: &TensorBlob| x.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(a), bits(b));
            }
        }
    }
}
