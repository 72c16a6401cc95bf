//! Ensemble snapshots.
//!
//! CSV: header `x1,x2,x3,v1,v2,v3,w`, one particle per row, values printed
//! in shortest round-trip form.
//!
//! Binary, all little-endian:
//!
//! | offset | size      | content                                   |
//! |--------|-----------|-------------------------------------------|
//! | 0      | 8         | magic `MSSNAP01`                          |
//! | 8      | 4         | u32 format version (1)                    |
//! | 12     | 4         | u32 reserved, zero                        |
//! | 16     | 8         | f64 simulation time                       |
//! | 24     | 8         | u64 particle count `n`                    |
//! | 32     | 7 * 8 * n | columns x1, x2, x3, v1, v2, v3, w, each `n` f64 |

use std::io::{Read, Write};

use thiserror::Error;

use crate::sampling::Particle;
use crate::Vec3;

pub const MAGIC: &[u8; 8] = b"MSSNAP01";
pub const VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 7] = ["x1", "x2", "x3", "v1", "v2", "v3", "w"];
const HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed snapshot: {0}")]
    Malformed(String),
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, SnapshotError> {
    Err(SnapshotError::Malformed(msg.into()))
}

fn row(p: &Particle) -> [f64; 7] {
    [
        p.position[0],
        p.position[1],
        p.position[2],
        p.velocity[0],
        p.velocity[1],
        p.velocity[2],
        p.weight,
    ]
}

pub fn write_csv<W: Write>(out: W, particles: &[Particle]) -> Result<(), SnapshotError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for p in particles {
        w.write_record(row(p).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<Particle>, SnapshotError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return malformed(format!("expected header {}", CSV_HEADER.join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 7 {
            return malformed(format!("row {} has {} fields", i + 1, rec.len()));
        }
        let mut v = [0.0; 7];
        for (k, field) in rec.iter().enumerate() {
            v[k] = field
                .trim()
                .parse()
                .or_else(|_| malformed(format!("row {}: `{field}` is not a number", i + 1)))?;
        }
        out.push(Particle::new(
            Vec3::new(v[0], v[1], v[2]),
            Vec3::new(v[3], v[4], v[5]),
            v[6],
        ));
    }
    Ok(out)
}

pub fn write_binary<W: Write>(mut out: W, time: f64, particles: &[Particle]) -> Result<(), SnapshotError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 56 * particles.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    buf.extend_from_slice(&(particles.len() as u64).to_le_bytes());
    for col in 0..7 {
        for p in particles {
            buf.extend_from_slice(&row(p)[col].to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Decodes a binary snapshot held in memory; returns `(time, particles)`.
pub fn decode_binary(bytes: &[u8]) -> Result<(f64, Vec<Particle>), SnapshotError> {
    if bytes.len() < HEADER_LEN {
        return malformed("truncated header");
    }
    if &bytes[..8] != MAGIC {
        return malformed("bad magic");
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return malformed(format!("unsupported version {version}"));
    }
    if u32_at(12) != 0 {
        return malformed("reserved field is not zero");
    }
    let time = f64::from_bits(u64_at(16));
    let count = u64_at(24);
    let body = bytes.len() - HEADER_LEN;
    if count.checked_mul(56) != Some(body as u64) {
        return malformed(format!("{count} particles need {} bytes, found {body}", count.saturating_mul(56)));
    }
    let n = count as usize;
    let col = |c: usize, i: usize| {
        let o = HEADER_LEN + 8 * (c * n + i);
        f64::from_bits(u64_at(o))
    };
    let particles = (0..n)
        .map(|i| {
            Particle::new(
                Vec3::new(col(0, i), col(1, i), col(2, i)),
                Vec3::new(col(3, i), col(4, i), col(5, i)),
                col(6, i),
            )
        })
        .collect();
    Ok((time, particles))
}

pub fn read_binary<R: Read>(mut input: R) -> Result<(f64, Vec<Particle>), SnapshotError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}
