use crate::recognizer::{Descriptor, DESCRIPTOR_DIM};

const MAGIC: &[u8; 4] = b"RELD";
const VERSION: u32 = 1;
const HEADER: usize = 16;

/// Fields of a person's `meta.txt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Meta {
    pub id: u64,
    pub name: Option<String>,
    pub created_unix_seconds: u64,
    pub descriptor_count: usize,
    pub crop_count: usize,
}

pub fn render_meta(m: &Meta) -> String {
    let mut s = format!("id: {}\n", m.id);
    if let Some(name) = &m.name {
        s.push_str(&format!("name: {name}\n"));
    }
    s.push_str(&format!(
        "created_unix_seconds: {}\ndescriptor_count: {}\ncrop_count: {}\n",
        m.created_unix_seconds, m.descriptor_count, m.crop_count
    ));
    s
}

pub fn parse_meta(text: &str) -> Result<Meta, String> {
    let (mut id, mut name, mut created, mut descs, mut crops) = (None, None, None, None, None);
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once(": ").ok_or_else(|| format!("line {}: expected `key: value`", i + 1))?;
        let num = |v: &str| v.parse::<u64>().map_err(|_| format!("line {}: bad number {v:?}", i + 1));
        match key {
            "id" => id = Some(num(value)?),
            "name" => name = Some(value.to_string()),
            "created_unix_seconds" => created = Some(num(value)?),
            "descriptor_count" => descs = Some(num(value)? as usize),
            "crop_count" => crops = Some(num(value)? as usize),
            // unknown keys are kept forward compatible
            _ => {}
        }
    }
    Ok(Meta {
        id: id.ok_or("missing id")?,
        name,
        created_unix_seconds: created.ok_or("missing created_unix_seconds")?,
        descriptor_count: descs.ok_or("missing descriptor_count")?,
        crop_count: crops.unwrap_or(0),
    })
}

pub fn encode_descriptors(descriptors: &[Descriptor]) -> Result<Vec<u8>, String> {
    let dim = descriptors.first().map_or(DESCRIPTOR_DIM, |d| d.dim());
    if let Some(d) = descriptors.iter().find(|d| d.dim() != dim) {
        return Err(format!("mixed descriptor dimensions {dim} and {}", d.dim()));
    }
    let mut out = Vec::with_capacity(HEADER + 4 * dim * descriptors.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(descriptors.len() as u32).to_le_bytes());
    for d in descriptors {
        for v in &d.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_descriptors(bytes: &[u8]) -> Result<Vec<Descriptor>, String> {
    if bytes.len() < HEADER + 4 || &bytes[..4] != MAGIC {
        return Err("not a descriptor file".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let (dim, count) = (u32_at(8) as usize, u32_at(12) as usize);
    let body = dim.checked_mul(count).and_then(|n| n.checked_mul(4)).ok_or("size overflow")?;
    if bytes.len() != HEADER + body + 4 {
        return Err(format!("length {} does not match {count} descriptors of dimension {dim}", bytes.len()));
    }
    let stored = u32_at(HEADER + body);
    if crc32fast::hash(&bytes[..HEADER + body]) != stored {
        return Err("checksum mismatch".into());
    }
    Ok(bytes[HEADER..HEADER + body]
        .chunks_exact(4 * dim.max(1))
        .take(count)
        .map(|chunk| {
            let values: Vec<f32> = chunk.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
            let degenerate = values.iter().all(|&v| v == 0.0);
            Descriptor { values, degenerate }
        })
        .collect())
}
