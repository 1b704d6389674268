//! `GPM1` pointmap and `GDM1` depth containers.
//!
//! Layout, all little-endian: magic (4 bytes), version `u16` = 1, `N`, `H`, `W`
//! as `u32`, flags `u16` (bit 0: mask present), then `N·H·W·C` `f32` values
//! (frame, row, col, channel) and, if flagged, `N·H·W` mask bytes of 0 or 1.
//! `C` is 3 for pointmaps and 1 for depth.

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Pointmap};

pub const GPM_MAGIC: &[u8; 4] = b"GPM1";
pub const GDM_MAGIC: &[u8; 4] = b"GDM1";
pub const FORMAT_VERSION: u16 = 1;
const FLAG_MASK: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 12 + 2;

/// Raw on-disk contents of one container record.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub magic: [u8; 4],
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
    pub mask: Option<Vec<bool>>,
}

impl TensorRecord {
    fn channels(&self) -> usize {
        if &self.magic == GPM_MAGIC {
            3
        } else {
            1
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for d in [self.frames, self.height, self.width] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let flags = if self.mask.is_some() { FLAG_MASK } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(m) = &self.mask {
            out.extend(m.iter().map(|&b| b as u8));
        }
        out
    }

    /// Decodes one record from the front of `bytes`; returns it and the bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format("truncated header".into()));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if &magic != GPM_MAGIC && &magic != GDM_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", String::from_utf8_lossy(&magic))));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let (frames, height, width) = (dim(6), dim(10), dim(14));
        let flags = u16::from_le_bytes([bytes[18], bytes[19]]);
        if flags & !FLAG_MASK != 0 {
            return Err(Error::Format(format!("unknown flags {flags:#x}")));
        }
        let channels = if &magic == GPM_MAGIC { 3 } else { 1 };
        let cells = frames
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
        let payload = cells * channels * 4;
        let mask_len = if flags & FLAG_MASK != 0 { cells } else { 0 };
        let total = HEADER_LEN + payload + mask_len;
        if bytes.len() < total {
            return Err(Error::Format(format!("payload needs {total} bytes, found {}", bytes.len())));
        }
        let values: Vec<f32> = bytes[HEADER_LEN..HEADER_LEN + payload]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let mask = if mask_len > 0 {
            let raw = &bytes[HEADER_LEN + payload..total];
            if raw.iter().any(|&b| b > 1) {
                return Err(Error::Format("mask bytes must be 0 or 1".into()));
            }
            Some(raw.iter().map(|&b| b == 1).collect())
        } else {
            None
        };
        let rec = Self { magic, frames, height, width, values, mask };
        rec.check_values()?;
        Ok((rec, total))
    }

    /// Decodes exactly one record; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (rec, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - used)));
        }
        Ok(rec)
    }

    fn check_values(&self) -> Result<()> {
        let c = self.channels();
        for (cell, chunk) in self.values.chunks_exact(c).enumerate() {
            let valid = self.mask.as_ref().is_none_or(|m| m[cell]);
            if valid && chunk.iter().any(|v| v.is_nan()) {
                return Err(Error::Format(format!("NaN in valid cell {cell}")));
            }
        }
        Ok(())
    }
}

fn mask_field(masks: impl Iterator<Item = bool> + Clone) -> Option<Vec<bool>> {
    if masks.clone().all(|m| m) {
        None
    } else {
        Some(masks.collect())
    }
}

fn shared_shape(shapes: impl Iterator<Item = (usize, usize)>) -> Result<(usize, usize)> {
    let mut shape = None;
    for s in shapes {
        match shape {
            None => shape = Some(s),
            Some(prev) if prev != s => {
                return Err(Error::ShapeMismatch(format!("frames of {prev:?} and {s:?} in one file")));
            }
            _ => {}
        }
    }
    shape.ok_or_else(|| Error::InvalidArgument("no frames to write".into()))
}

pub fn encode_pointmaps(maps: &[Pointmap<f64>]) -> Result<Vec<u8>> {
    let (height, width) = shared_shape(maps.iter().map(|m| (m.height, m.width)))?;
    let values = maps.iter().flat_map(|m| m.points.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32])).collect();
    let mask = mask_field(maps.iter().flat_map(|m| m.mask.iter().copied()));
    Ok(TensorRecord { magic: *GPM_MAGIC, frames: maps.len(), height, width, values, mask }.encode())
}

pub fn decode_pointmaps(bytes: &[u8]) -> Result<Vec<Pointmap<f64>>> {
    let rec = TensorRecord::decode(bytes)?;
    if &rec.magic != GPM_MAGIC {
        return Err(Error::Format("expected a GPM1 pointmap file".into()));
    }
    let cells = rec.height * rec.width;
    (0..rec.frames)
        .map(|f| {
            let points = rec.values[f * cells * 3..(f + 1) * cells * 3]
                .chunks_exact(3)
                .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64))
                .collect();
            let mask = rec.mask.as_ref().map_or(vec![true; cells], |m| m[f * cells..(f + 1) * cells].to_vec());
            Pointmap::new(rec.height, rec.width, points, mask, f)
        })
        .collect()
}

pub fn encode_depths(maps: &[DepthMap<f64>]) -> Result<Vec<u8>> {
    let (height, width) = shared_shape(maps.iter().map(|m| (m.height, m.width)))?;
    let values = maps.iter().flat_map(|m| m.values.iter().map(|&v| v as f32)).collect();
    let mask = mask_field(maps.iter().flat_map(|m| m.mask.iter().copied()));
    Ok(TensorRecord { magic: *GDM_MAGIC, frames: maps.len(), height, width, values, mask }.encode())
}

pub fn decode_depths(bytes: &[u8]) -> Result<Vec<DepthMap<f64>>> {
    let rec = TensorRecord::decode(bytes)?;
    if &rec.magic != GDM_MAGIC {
        return Err(Error::Format("expected a GDM1 depth file".into()));
    }
    let cells = rec.height * rec.width;
    (0..rec.frames)
        .map(|f| {
            let values = rec.values[f * cells..(f + 1) * cells].iter().map(|&v| v as f64).collect();
            let mask = rec.mask.as_ref().map_or(vec![true; cells], |m| m[f * cells..(f + 1) * cells].to_vec());
            DepthMap::new(rec.height, rec.width, values, mask)
        })
        .collect()
}

/// Matrices as consecutive single-frame `GDM1` records (rows × cols each).
pub fn encode_matrices(mats: &[DMatrix<f64>]) -> Vec<u8> {
    let mut out = Vec::new();
    for m in mats {
        let mut values = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            values.extend(m.row(r).iter().map(|&v| v as f32));
        }
        let rec =
            TensorRecord { magic: *GDM_MAGIC, frames: 1, height: m.nrows(), width: m.ncols(), values, mask: None };
        out.extend(rec.encode());
    }
    out
}

pub fn decode_matrices(mut bytes: &[u8]) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (rec, used) = TensorRecord::decode_prefix(bytes)?;
        if &rec.magic != GDM_MAGIC || rec.frames != 1 || rec.mask.is_some() {
            return Err(Error::Format("weight bundles hold unmasked single-frame GDM1 records".into()));
        }
        let vals: Vec<f64> = rec.values.iter().map(|&v| v as f64).collect();
        out.push(DMatrix::from_row_slice(rec.height, rec.width, &vals));
        bytes = &bytes[used..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn maps(n: usize, seed: u64, masked: bool) -> Vec<Pointmap<f64>> {
        let mut r = StreamRng::new(seed, 0);
        (0..n)
            .map(|f| {
                let pts = (0..20)
                    .map(|_| Vector3::new(r.normal(), r.normal(), r.normal()).map(|v| v as f32 as f64))
                    .collect();
                let mask = (0..20).map(|_| !masked || r.uniform() > 0.3).collect();
                Pointmap::new(4, 5, pts, mask, f).unwrap()
            })
            .collect()
    }

    #[test]
    fn pointmap_round_trip() {
        for masked in [false, true] {
            let m = maps(3, 1, masked);
            let bytes = encode_pointmaps(&m).unwrap();
            assert_eq!(decode_pointmaps(&bytes).unwrap(), m);
            assert_eq!(encode_pointmaps(&decode_pointmaps(&bytes).unwrap()).unwrap(), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_pointmaps(&maps(2, 3, false)).unwrap();
        assert_eq!(&bytes[..4], b"GPM1");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 5);
        assert_eq!(bytes.len(), 20 + 2 * 20 * 3 * 4);
    }

    #[test]
    fn depth_round_trip_and_nan_rules() {
        let mut d = DepthMap::dense(3, 3, (0..9).map(|v| v as f64 * 0.5).collect()).unwrap();
        d.mask[4] = false;
        d.values[4] = f64::NAN;
        let bytes = encode_depths(std::slice::from_ref(&d)).unwrap();
        let back = decode_depths(&bytes).unwrap();
        assert_eq!(back[0].mask, d.mask);
        assert!(back[0].values[4].is_nan());
        d.mask[4] = true;
        let bad = encode_depths(&[d]).unwrap();
        assert!(matches!(decode_depths(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn malformed_inputs() {
        let bytes = encode_pointmaps(&maps(1, 2, true)).unwrap();
        assert!(decode_pointmaps(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_pointmaps(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_pointmaps(&magic).is_err());
        assert!(decode_depths(&bytes).is_err());
        let mut version = bytes;
        version[4] = 2;
        assert!(decode_pointmaps(&version).is_err());
    }

    #[test]
    fn matrix_bundle_round_trip() {
        let mats = vec![
            DMatrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64 * 0.25),
            DMatrix::from_fn(1, 4, |_, c| c as f64 - 1.5),
        ];
        assert_eq!(decode_matrices(&encode_matrices(&mats)).unwrap(), mats);
    }
}
