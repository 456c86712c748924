//! Binary checkpoints: little-endian, versioned header, section table with
//! a SHA-256 per section.
//!
//! Layout:
//! magic "VMBCKPT\0" | version u32 | endianness tag u32 (0x01020304) |
//! section count u32 | entries (name [16], offset u64, length u64, sha256 [32]) |
//! section payloads.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::collision::CollisionSpec;
use crate::error::{Result, VmbError};
use crate::fluid::FluidState;
use crate::kinetic::KineticState;
use crate::spectral::{Grid, SpecField, C64};
use crate::velocity::QuadSpec;

pub const MAGIC: &[u8; 8] = b"VMBCKPT\0";
pub const FORMAT_VERSION: u32 = 1;
pub const ENDIAN_TAG: u32 = 0x0102_0304;
const ENTRY_LEN: usize = 16 + 8 + 8 + 32;
const PREAMBLE_LEN: usize = 8 + 4 + 4 + 4;

/// What a checkpoint must agree with before it is loaded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub dim: usize,
    pub modes: usize,
    pub order: usize,
    pub basis_hash: [u8; 32],
    pub collision_hash: [u8; 32],
}

impl CheckpointMeta {
    pub fn new(grid: &Grid, order: usize, quad: QuadSpec, coll: CollisionSpec) -> CheckpointMeta {
        let basis_hash = basis_hash(order, quad);
        let collision_hash = collision_hash(&basis_hash, coll);
        CheckpointMeta { dim: grid.dim, modes: grid.n, order, basis_hash, collision_hash }
    }
}

pub fn basis_hash(order: usize, quad: QuadSpec) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(format!("basis;order={order};nodes_per_axis={}", quad.nodes_per_axis).as_bytes());
    h.finalize().into()
}

pub fn collision_hash(basis: &[u8; 32], spec: CollisionSpec) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(basis);
    h.update(format!("collision;sphere_points={}", spec.sphere_points).as_bytes());
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Kinetic(KineticState),
    Fluid(FluidState),
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        match self {
            Snapshot::Kinetic(s) => s.t,
            Snapshot::Fluid(s) => s.t,
        }
    }
}

struct Writer {
    sections: Vec<(String, Vec<u8>)>,
}

impl Writer {
    fn section(&mut self, name: &str, data: Vec<u8>) {
        self.sections.push((name.to_string(), data));
    }

    fn finish(self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&ENDIAN_TAG.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        let mut offset = (PREAMBLE_LEN + ENTRY_LEN * self.sections.len()) as u64;
        for (name, data) in &self.sections {
            let mut nb = [0u8; 16];
            nb[..name.len()].copy_from_slice(name.as_bytes());
            out.extend_from_slice(&nb);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(data.len() as u64).to_le_bytes());
            let digest: [u8; 32] = Sha256::digest(data).into();
            out.extend_from_slice(&digest);
            offset += data.len() as u64;
        }
        for (_, data) in &self.sections {
            out.extend_from_slice(data);
        }
        out
    }
}

fn complex_bytes(f: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 * f.len());
    for z in f {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn fields_bytes(fields: &[&SpecField]) -> Vec<u8> {
    fields.iter().flat_map(|f| complex_bytes(f)).collect()
}

/// Serialize a snapshot. Kinetic snapshots carry the basis order in meta.
pub fn encode(snapshot: &Snapshot, meta: &CheckpointMeta) -> Vec<u8> {
    let mut w = Writer { sections: Vec::new() };
    let mut header = Vec::new();
    let (kind, t, eps, nv) = match snapshot {
        Snapshot::Kinetic(s) => (0u32, s.t, s.eps, s.nv as u64),
        Snapshot::Fluid(s) => (1u32, s.t, 0.0, 0),
    };
    header.extend_from_slice(&kind.to_le_bytes());
    header.extend_from_slice(&(meta.dim as u32).to_le_bytes());
    header.extend_from_slice(&(meta.modes as u32).to_le_bytes());
    header.extend_from_slice(&(meta.order as u32).to_le_bytes());
    header.extend_from_slice(&nv.to_le_bytes());
    header.extend_from_slice(&t.to_le_bytes());
    header.extend_from_slice(&eps.to_le_bytes());
    header.extend_from_slice(&meta.basis_hash);
    header.extend_from_slice(&meta.collision_hash);
    w.section("header", header);
    match snapshot {
        Snapshot::Kinetic(s) => {
            w.section("g", complex_bytes(&s.g));
            w.section("e", fields_bytes(&[&s.e[0], &s.e[1], &s.e[2]]));
            w.section("b", fields_bytes(&[&s.b[0], &s.b[1], &s.b[2]]));
        }
        Snapshot::Fluid(s) => {
            w.section("u", fields_bytes(&[&s.u[0], &s.u[1], &s.u[2]]));
            w.section("theta", complex_bytes(&s.theta));
            w.section("n", complex_bytes(&s.n));
            w.section("e", fields_bytes(&[&s.e[0], &s.e[1], &s.e[2]]));
            w.section("b", fields_bytes(&[&s.b[0], &s.b[1], &s.b[2]]));
        }
    }
    w.finish()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(VmbError::Checkpoint(format!("truncated file: needed {} bytes at offset {}", n, self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_complex(data: &[u8], count: usize, what: &str) -> Result<Vec<C64>> {
    if data.len() != 16 * count {
        return Err(VmbError::Checkpoint(format!("section '{what}' has {} bytes, expected {}", data.len(), 16 * count)));
    }
    Ok(data
        .chunks_exact(16)
        .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect())
}

fn read_vec(data: &[u8], npts: usize, what: &str) -> Result<[SpecField; 3]> {
    let all = read_complex(data, 3 * npts, what)?;
    Ok([all[..npts].to_vec(), all[npts..2 * npts].to_vec(), all[2 * npts..].to_vec()])
}

/// Parse and verify a checkpoint against the expected run metadata.
pub fn decode(bytes: &[u8], expected: &CheckpointMeta) -> Result<Snapshot> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(VmbError::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(VmbError::Checkpoint(format!("format version {version} not supported (expected {FORMAT_VERSION})")));
    }
    let tag = r.u32()?;
    if tag != ENDIAN_TAG {
        return Err(VmbError::Checkpoint(format!("endianness tag {tag:#010x} not recognized")));
    }
    let count = r.u32()? as usize;
    if count > 16 {
        return Err(VmbError::Checkpoint(format!("implausible section count {count}")));
    }
    let mut sections: Vec<(String, &[u8])> = Vec::with_capacity(count);
    let mut table = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.take(16)?;
        let name = String::from_utf8_lossy(name).trim_end_matches('\0').to_string();
        let off = r.u64()? as usize;
        let len = r.u64()? as usize;
        let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        table.push((name, off, len, digest));
    }
    for (name, off, len, digest) in table {
        let end = off.checked_add(len).filter(|e| *e <= bytes.len());
        let Some(end) = end else {
            return Err(VmbError::Checkpoint(format!("truncated file: section '{name}' runs past the end")));
        };
        let data = &bytes[off..end];
        let got: [u8; 32] = Sha256::digest(data).into();
        if got != digest {
            return Err(VmbError::Checkpoint(format!("hash mismatch in section '{name}'")));
        }
        sections.push((name, data));
    }
    let get = |name: &str| -> Result<&[u8]> {
        sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| *d)
            .ok_or_else(|| VmbError::Checkpoint(format!("missing section '{name}'")))
    };
    let mut h = Reader { bytes: get("header")?, pos: 0 };
    let kind = h.u32()?;
    let dim = h.u32()? as usize;
    let modes = h.u32()? as usize;
    let order = h.u32()? as usize;
    let nv = h.u64()? as usize;
    let t = h.f64()?;
    let eps = h.f64()?;
    let bh: [u8; 32] = h.take(32)?.try_into().unwrap();
    let ch: [u8; 32] = h.take(32)?.try_into().unwrap();
    if dim != expected.dim || modes != expected.modes {
        return Err(VmbError::Checkpoint(format!(
            "grid mismatch: checkpoint {dim}D/{modes} modes, run {}D/{} modes",
            expected.dim, expected.modes
        )));
    }
    if kind == 0 {
        if order != expected.order || bh != expected.basis_hash {
            return Err(VmbError::Checkpoint(format!(
                "basis hash mismatch (checkpoint order {order}, run order {})",
                expected.order
            )));
        }
        if ch != expected.collision_hash {
            return Err(VmbError::Checkpoint("collision-tensor hash mismatch".into()));
        }
    }
    let npts = modes.pow(dim as u32);
    match kind {
        0 => {
            let g = read_complex(get("g")?, npts * nv, "g")?;
            let e = read_vec(get("e")?, npts, "e")?;
            let b = read_vec(get("b")?, npts, "b")?;
            Ok(Snapshot::Kinetic(KineticState { t, eps, nv, g, e, b }))
        }
        1 => {
            let u = read_vec(get("u")?, npts, "u")?;
            let theta = read_complex(get("theta")?, npts, "theta")?;
            let n = read_complex(get("n")?, npts, "n")?;
            let e = read_vec(get("e")?, npts, "e")?;
            let b = read_vec(get("b")?, npts, "b")?;
            Ok(Snapshot::Fluid(FluidState { t, u, theta, n, e, b }))
        }
        k => Err(VmbError::Checkpoint(format!("unknown snapshot kind {k}"))),
    }
}

pub fn save_checkpoint(path: &Path, snapshot: &Snapshot, meta: &CheckpointMeta) -> Result<()> {
    fs::write(path, encode(snapshot, meta))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected: &CheckpointMeta) -> Result<Snapshot> {
    decode(&fs::read(path)?, expected)
}
