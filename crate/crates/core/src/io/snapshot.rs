//! Binary snapshots of a simulation state plus the run bookkeeping needed to
//! resume it.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `NSVSNAP1` |
//! | 4 | format version (u32) |
//! | 1 | endianness tag `L` |
//! | 8 + 8 + 8 + 8 | `n_x` (u64), `L` (f64), `n_v` (u64), `v_max` (f64) |
//! | 8 | time stamp (f64) |
//! | 4 | field count (u32), then per field: 8-byte name, 1-byte element width, 8-byte element count (u64) |
//! | 8 + 8 + 16 | window index (u64), last Picard iterations (u64), last contraction factor, next snapshot time |
//! | 8 × 8 | reference scalars: `t₀`, mass, `‖f₀‖_∞`, `‖f₀‖_{L²}`, `M₆f₀`, momentum (2), momentum scale |
//! | 8 × 3 | energy ledger: initial energy, viscous and drag dissipation |
//! | 8 + n | config document length (u64) and UTF-8 text |
//! | ... | payload: `u₁`, `u₂` (`n_x²` each, row-major), `f` (`n_x² n_v²`, layout `[i₁][i₂][j₁][j₂]`) |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::coupling::SimState;
use crate::diagnostics::ReferenceScalars;
use crate::error::{NsvError, Result};
use crate::kinetic::{DistributionFunction, PhaseGrid};
use crate::spectral::{SpectralGrid, VectorField, VelocityField};

pub const MAGIC: &[u8; 8] = b"NSVSNAP1";
pub const VERSION: u32 = 1;

const FIELDS: [&[u8; 8]; 3] = [b"u1\0\0\0\0\0\0", b"u2\0\0\0\0\0\0", b"f\0\0\0\0\0\0\0"];

/// Run bookkeeping stored next to the state.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMeta {
    /// Accepted windows since `t = 0`.
    pub window_index: u64,
    pub last_iterations: u64,
    pub last_contraction: f64,
    /// Time of the next scheduled intermediate snapshot (infinite if none).
    pub next_snapshot: f64,
    pub reference: ReferenceScalars,
    pub initial_energy: f64,
    pub visc_dissipation: f64,
    pub drag_dissipation: f64,
    /// Rendered config document of the run.
    pub config: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub state: SimState,
    pub meta: RunMeta,
}

fn put_u32(buf: &mut Vec<u8>, x: u32) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, x: f64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_slice(buf: &mut Vec<u8>, xs: &[f64]) {
    buf.reserve(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serialises `snap` into the documented byte layout.
pub fn encode(snap: &Snapshot) -> Vec<u8> {
    let state = &snap.state;
    let phase = state.f().grid();
    let space = phase.space();
    let m = &snap.meta;
    let mut buf = Vec::with_capacity(256 + m.config.len() + 8 * (2 * space.len() + phase.len()));
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION);
    buf.push(b'L');
    put_u64(&mut buf, space.n() as u64);
    put_f64(&mut buf, space.length());
    put_u64(&mut buf, phase.n_v() as u64);
    put_f64(&mut buf, phase.v_max());
    put_f64(&mut buf, state.time());
    put_u32(&mut buf, FIELDS.len() as u32);
    for (name, count) in FIELDS.iter().zip([space.len(), space.len(), phase.len()]) {
        buf.extend_from_slice(&name[..]);
        buf.push(8);
        put_u64(&mut buf, count as u64);
    }
    put_u64(&mut buf, m.window_index);
    put_u64(&mut buf, m.last_iterations);
    put_f64(&mut buf, m.last_contraction);
    put_f64(&mut buf, m.next_snapshot);
    let r = &m.reference;
    for x in [
        r.t0,
        r.mass,
        r.linf,
        r.l2,
        r.m6,
        r.momentum[0],
        r.momentum[1],
        r.momentum_scale,
    ] {
        put_f64(&mut buf, x);
    }
    put_f64(&mut buf, m.initial_energy);
    put_f64(&mut buf, m.visc_dissipation);
    put_f64(&mut buf, m.drag_dissipation);
    put_u64(&mut buf, m.config.len() as u64);
    buf.extend_from_slice(m.config.as_bytes());
    put_slice(&mut buf, state.u().component(0));
    put_slice(&mut buf, state.u().component(1));
    put_slice(&mut buf, state.f().values());
    buf
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(NsvError::Snapshot(format!(
                "truncated file: {what} needs {n} bytes at offset {}, only {} remain",
                self.pos,
                self.data.len() - self.pos
            ))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| NsvError::Snapshot(format!("{what}: element count overflows")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn bad(msg: impl Into<String>) -> NsvError {
    NsvError::Snapshot(msg.into())
}

/// Parses bytes produced by [`encode`].
pub fn decode(data: &[u8]) -> Result<Snapshot> {
    let mut r = Reader { data, pos: 0 };
    let magic = r.take(8, "magic")?;
    if magic != MAGIC {
        return Err(bad(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(bad(format!(
            "unsupported version {version}, this build reads version {VERSION}"
        )));
    }
    let endian = r.u8("endianness")?;
    if endian != b'L' {
        return Err(bad(format!("unsupported endianness tag {endian:#04x}")));
    }
    let n = r.u64("n_x")? as usize;
    let length = r.f64("L")?;
    let n_v = r.u64("n_v")? as usize;
    let v_max = r.f64("v_max")?;
    let time = r.f64("time")?;
    let space = SpectralGrid::new(n, length).map_err(|e| bad(format!("header: {e}")))?;
    let phase = PhaseGrid::new(space.clone(), n_v, v_max).map_err(|e| bad(format!("header: {e}")))?;

    let count = r.u32("field count")? as usize;
    if count != FIELDS.len() {
        return Err(bad(format!("expected {} fields, found {count}", FIELDS.len())));
    }
    for (name, expect) in FIELDS.iter().zip([space.len(), space.len(), phase.len()]) {
        let got = r.take(8, "field name")?;
        let width = r.u8("element width")?;
        let len = r.u64("element count")? as usize;
        if got != &name[..] || width != 8 || len != expect {
            return Err(bad(format!(
                "field descriptor mismatch: got {:?} width {width} count {len}",
                String::from_utf8_lossy(got).trim_end_matches('\0')
            )));
        }
    }

    let window_index = r.u64("window index")?;
    let last_iterations = r.u64("last iterations")?;
    let last_contraction = r.f64("last contraction")?;
    let next_snapshot = r.f64("next snapshot")?;
    let mut s = [0.0; 8];
    for x in s.iter_mut() {
        *x = r.f64("reference scalars")?;
    }
    let reference = ReferenceScalars {
        t0: s[0],
        mass: s[1],
        linf: s[2],
        l2: s[3],
        m6: s[4],
        momentum: [s[5], s[6]],
        momentum_scale: s[7],
    };
    let initial_energy = r.f64("initial energy")?;
    let visc_dissipation = r.f64("viscous dissipation")?;
    let drag_dissipation = r.f64("drag dissipation")?;
    let cfg_len = r.u64("config length")? as usize;
    let config = String::from_utf8(r.take(cfg_len, "config text")?.to_vec())
        .map_err(|_| bad("config text is not UTF-8"))?;

    let u1 = r.f64s(space.len(), "payload u1")?;
    let u2 = r.f64s(space.len(), "payload u2")?;
    let fv = r.f64s(phase.len(), "payload f")?;
    if r.pos != data.len() {
        return Err(bad(format!("{} trailing bytes after payload", data.len() - r.pos)));
    }
    let u = VelocityField::from_field_unchecked(VectorField::new(&space, u1, u2)?);
    let f = DistributionFunction::new(&phase, fv, time)?;
    Ok(Snapshot {
        state: SimState::new(u, f)?,
        meta: RunMeta {
            window_index,
            last_iterations,
            last_contraction,
            next_snapshot,
            reference,
            initial_energy,
            visc_dissipation,
            drag_dissipation,
            config,
        },
    })
}

/// Writes through a temporary file in the same directory and renames it over
/// `path`.
pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let bytes = encode(snap);
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let data = fs::read(path)?;
    decode(&data)
}
