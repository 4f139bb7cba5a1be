//! Cascade model file.
//!
//! ```text
//! "RELC" | version u32 | base_window u32 | stage_count u32
//! per stage:  threshold f64 | stump_count u32
//! per stump:  kind u8 | x u8 | y u8 | w u8 | h u8 | threshold f64 | polarity i8 | alpha f64
//! ```
//! All integers and floats little-endian.

use std::fmt::Write as _;
use std::path::Path;

use super::adaboost::Stump;
use super::cascade::{Cascade, CascadeStage, CASCADE_VERSION};
use super::features::{FeatureKind, HaarFeature};
use super::{DetectorError, Result};

pub const CASCADE_MAGIC: &[u8; 4] = b"RELC";

pub fn encode_cascade(c: &Cascade) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + c.stump_count() * 30);
    out.extend_from_slice(CASCADE_MAGIC);
    out.extend_from_slice(&c.version.to_le_bytes());
    out.extend_from_slice(&c.base_window.to_le_bytes());
    out.extend_from_slice(&(c.stages.len() as u32).to_le_bytes());
    for stage in &c.stages {
        out.extend_from_slice(&stage.threshold.to_le_bytes());
        out.extend_from_slice(&(stage.stumps.len() as u32).to_le_bytes());
        for s in &stage.stumps {
            let f = &s.feature;
            out.extend_from_slice(&[f.kind as u8, f.x, f.y, f.w, f.h]);
            out.extend_from_slice(&s.threshold.to_le_bytes());
            out.push(s.polarity as u8);
            out.extend_from_slice(&s.alpha.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(DetectorError::Model(format!("truncated cascade file at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_cascade(bytes: &[u8]) -> Result<Cascade> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CASCADE_MAGIC {
        return Err(DetectorError::Model("not a cascade file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CASCADE_VERSION {
        return Err(DetectorError::Model(format!("unsupported cascade version {version}")));
    }
    let base_window = r.u32()?;
    let stage_count = r.u32()?;
    let mut stages = Vec::new();
    for _ in 0..stage_count {
        let threshold = r.f64()?;
        let n = r.u32()?;
        let mut stumps = Vec::new();
        for _ in 0..n {
            let kind_byte = r.u8()?;
            let kind = FeatureKind::from_u8(kind_byte)
                .ok_or_else(|| DetectorError::Model(format!("unknown feature kind {kind_byte}")))?;
            let (x, y, w, h) = (r.u8()?, r.u8()?, r.u8()?, r.u8()?);
            let feature = HaarFeature::new(kind, x, y, w, h).map_err(|e| DetectorError::Model(e.to_string()))?;
            let threshold = r.f64()?;
            let polarity = r.u8()? as i8;
            if polarity != 1 && polarity != -1 {
                return Err(DetectorError::Model(format!("invalid polarity {polarity}")));
            }
            let alpha = r.f64()?;
            stumps.push(Stump { feature, threshold, polarity, alpha });
        }
        stages.push(CascadeStage { stumps, threshold });
    }
    if r.pos != bytes.len() {
        return Err(DetectorError::Model(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let c = Cascade { base_window, stages, version };
    c.validate()?;
    Ok(c)
}

pub fn save_cascade(c: &Cascade, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_cascade(c))?;
    Ok(())
}

pub fn load_cascade(path: impl AsRef<Path>) -> Result<Cascade> {
    decode_cascade(&std::fs::read(path)?)
}

/// Human-readable listing of every stage and stump.
pub fn dump_cascade(c: &Cascade) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "cascade v{} window {} stages {}", c.version, c.base_window, c.stages.len());
    for (i, stage) in c.stages.iter().enumerate() {
        let _ = writeln!(s, "stage {i} threshold {:.6} stumps {}", stage.threshold, stage.stumps.len());
        for st in &stage.stumps {
            let _ = writeln!(
                s,
                "  {} thr {:+.6} pol {:+} alpha {:.6}",
                st.feature, st.threshold, st.polarity, st.alpha
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Cascade {
        let f = HaarFeature::new(FeatureKind::ThreeVertical, 2, 3, 4, 5).unwrap();
        let g = HaarFeature::new(FeatureKind::FourDiagonal, 0, 0, 12, 12).unwrap();
        Cascade::new(vec![
            CascadeStage {
                stumps: vec![Stump { feature: f, threshold: -0.25, polarity: 1, alpha: 1.5 }],
                threshold: 1.5,
            },
            CascadeStage {
                stumps: vec![
                    Stump { feature: g, threshold: 0.125, polarity: -1, alpha: 0.75 },
                    Stump { feature: f, threshold: 3.0, polarity: 1, alpha: 0.5 },
                ],
                threshold: 0.9,
            },
        ])
        .unwrap()
    }

    #[test]
    fn layout_is_exact() {
        let bytes = encode_cascade(&sample());
        assert_eq!(&bytes[..4], b"RELC");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &24u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[24..28], &1u32.to_le_bytes());
        assert_eq!(&bytes[28..33], &[3, 2, 3, 4, 5]);
        assert_eq!(&bytes[33..41], &(-0.25f64).to_le_bytes());
        assert_eq!(bytes[41], 1);
        assert_eq!(&bytes[42..50], &1.5f64.to_le_bytes());
        // header 16 + 2 stage headers of 12 + 3 stumps of 22
        assert_eq!(bytes.len(), 16 + 24 + 66);
        assert_eq!(decode_cascade(&bytes).unwrap(), sample());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode_cascade(&sample());
        assert!(decode_cascade(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_cascade(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode_cascade(&bad).is_err());
        let mut bad = bytes;
        bad[28] = 7;
        assert!(decode_cascade(&bad).is_err());
    }

    #[test]
    fn dump_lists_stumps() {
        let text = dump_cascade(&sample());
        assert!(text.starts_with("cascade v1 window 24 stages 2"));
        assert_eq!(text.lines().filter(|l| l.starts_with("  ")).count(), 3);
    }
}
