//! Flat binary parameter checkpoints.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! | offset | size | content |
//! |--------|------|---------|
//! | 0 | 8 | magic `b"IMARLNN\0"` |
//! | 8 | 4 | format version, `u32` = 1 |
//! | 12 | 1 | head: 0 identity, 1 squash |
//! | 13 | 3 | zero padding |
//! | 16 | 4 | layer count `L`, `u32` |
//! | 20 | 4·(L+1) | layer widths, input first, `u32` each |
//! | … | … | per layer: weights (inputs × outputs, row-major) then biases, `f64` each |
//!
//! Parameters are always stored as 64-bit floats regardless of the scalar
//! type of the network.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Dense, Head, Mlp};

pub const MAGIC: &[u8; 8] = b"IMARLNN\0";
pub const VERSION: u32 = 1;

pub fn encode<T: Scalar>(net: &Mlp<T>) -> Vec<u8> {
    let sizes = net.sizes();
    let mut out = Vec::with_capacity(20 + 4 * sizes.len() + 8 * net.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match net.head() {
        Head::Identity => 0,
        Head::Squash => 1,
    });
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Mlp<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let head = match r.take(4)?[0] {
        0 => Head::Identity,
        1 => Head::Squash,
        h => return Err(Error::Checkpoint(format!("unknown head tag {h}"))),
    };
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(Error::Checkpoint(format!(
            "implausible layer count {n_layers}"
        )));
    }
    let sizes = (0..=n_layers)
        .map(|_| r.u32().map(|x| x as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(n_layers);
    for w in sizes.windows(2) {
        let weight = (0..w[0] * w[1])
            .map(|_| r.f64().map(T::of))
            .collect::<Result<Vec<_>>>()?;
        let bias = (0..w[1])
            .map(|_| r.f64().map(T::of))
            .collect::<Result<Vec<_>>>()?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((w[0], w[1]), weight).expect("sized above"),
            bias: Array1::from_vec(bias),
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Mlp::from_layers(layers, head)
}

pub fn save<T: Scalar>(net: &Mlp<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode(net)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: &Path) -> Result<Mlp<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_layout() {
        let net: Mlp<f64> = Mlp::zeros(&[3, 2], Head::Squash);
        let b = encode(&net);
        assert_eq!(&b[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(b[12], 1);
        assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[20..24].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[24..28].try_into().unwrap()), 2);
        assert_eq!(b.len(), 28 + 8 * (6 + 2));
    }

    #[test]
    fn rejects_corruption() {
        let net: Mlp<f64> = Mlp::zeros(&[3, 2], Head::Identity);
        let mut b = encode(&net);
        assert!(decode::<f64>(&b[..b.len() - 1]).is_err());
        b.push(0);
        assert!(decode::<f64>(&b).is_err());
        let mut bad = encode(&net);
        bad[0] = b'X';
        assert!(decode::<f64>(&bad).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.bin");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net: Mlp<f64> = Mlp::new(&[5, 7, 3], Head::Squash, &mut rng);
        save(&net, &path).unwrap();
        assert_eq!(load::<f64>(&path).unwrap(), net);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(seed in any::<u64>(), a in 1usize..6, b in 1usize..6, c in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net: Mlp<f64> = Mlp::new(&[a, b, c], Head::Identity, &mut rng);
            prop_assert_eq!(decode::<f64>(&encode(&net)).unwrap(), net);
        }
    }
}
