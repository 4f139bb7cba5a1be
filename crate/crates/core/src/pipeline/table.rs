//! Tab-separated observation lines:
//! `Rect(x1,y1-x2,y2)\t<tracking id or ->\t<yaw>\t<roll>\t<smile>\t<left eye>\t<right eye>`.

use std::fmt;

use crate::imagecore::Rect;

use super::{FaceObservation, Identity};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input where parsing failed.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { offset, message: message.into() })
}

fn format_angle(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

/// Shortest decimal that reads back as the same value, always with a
/// fractional part (`0.0`, `1.0`, `0.7311`).
pub fn format_probability(p: f64) -> String {
    format!("{:?}", if p == 0.0 { 0.0 } else { p })
}

pub fn format_observation(obs: &FaceObservation) -> String {
    let tid = obs.tracking_id.map_or_else(|| "-".to_string(), |t| t.to_string());
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        obs.rect,
        tid,
        format_angle(obs.euler_y),
        format_angle(obs.euler_z),
        format_probability(obs.smile_p),
        format_probability(obs.left_eye_open_p),
        format_probability(obs.right_eye_open_p)
    )
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn expect(&mut self, lit: &str) -> Result<(), ParseError> {
        if self.text[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            err(self.pos, format!("expected {lit:?}"))
        }
    }

    fn uint(&mut self) -> Result<u32, ParseError> {
        let start = self.pos;
        let digits = self.text[start..].bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return err(start, "expected an unsigned integer");
        }
        self.pos += digits;
        self.text[start..self.pos].parse().or_else(|_| err(start, "integer out of range"))
    }
}

/// Parses `Rect(x1,y1-x2,y2)`; swapped corners are put in canonical order.
pub fn parse_rect(text: &str) -> Result<Rect, ParseError> {
    let mut c = Cursor { text, pos: 0 };
    let r = rect_at(&mut c)?;
    if c.pos != text.len() {
        return err(c.pos, "trailing characters after rect");
    }
    Ok(r)
}

fn rect_at(c: &mut Cursor) -> Result<Rect, ParseError> {
    c.expect("Rect(")?;
    let x1 = c.uint()?;
    c.expect(",")?;
    let y1 = c.uint()?;
    c.expect("-")?;
    let x2 = c.uint()?;
    c.expect(",")?;
    let y2 = c.uint()?;
    c.expect(")")?;
    Ok(Rect::new(x1, y1, x2, y2))
}

/// Parses one observation line. Identity is not part of the line and comes
/// back as unidentified.
pub fn parse_observation(line: &str) -> Result<FaceObservation, ParseError> {
    let mut c = Cursor { text: line, pos: 0 };
    let rect = rect_at(&mut c)?;
    let mut fields = Vec::with_capacity(6);
    while c.pos < line.len() {
        c.expect("\t")?;
        let start = c.pos;
        let len = line[start..].find('\t').unwrap_or(line.len() - start);
        fields.push((start, &line[start..start + len]));
        c.pos += len;
    }
    if fields.len() != 6 {
        return err(line.len(), format!("expected 6 tab-separated fields after the rect, found {}", fields.len()));
    }
    let tracking_id = match fields[0] {
        (_, "-") => None,
        (off, s) => Some(s.parse::<u64>().or_else(|_| err(off, "bad tracking id"))?),
    };
    let num = |(off, s): (usize, &str), lo: f64, hi: f64, what: &str| -> Result<f64, ParseError> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && (lo..=hi).contains(&v) => Ok(v),
            Ok(_) => err(off, format!("{what} out of range [{lo}, {hi}]")),
            Err(_) => err(off, format!("bad {what}")),
        }
    };
    Ok(FaceObservation {
        rect,
        tracking_id,
        euler_y: num(fields[1], -90.0, 90.0, "angle")?,
        euler_z: num(fields[2], -90.0, 90.0, "angle")?,
        smile_p: num(fields[3], 0.0, 1.0, "probability")?,
        left_eye_open_p: num(fields[4], 0.0, 1.0, "probability")?,
        right_eye_open_p: num(fields[5], 0.0, 1.0, "probability")?,
        identity: Identity::Unidentified,
    })
}
