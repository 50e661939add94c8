//! `BSQ1` trajectory files.
//!
//! Little-endian throughout:
//!
//! | field | type |
//! |---|---|
//! | magic `"BSQ1"` | 4 bytes |
//! | `n_trunc` | u32 |
//! | step count | u64 |
//! | `dt` | f64 |
//! | `d` | u32 |
//! | seed | u64 |
//! | `ν1`, `ν2`, `g` | 3 × f64 |
//! | sentinel [`SENTINEL_BITS`] | f64 |
//! | forcing table, `d` records | (i32 `j1`, i32 `j2`, u32 parity, f64 α) |
//! | flags (bit 0: advection on) | u32 |
//! | `step count + 1` snapshots | `ω` block then `θ` block, each `2·modes` f64 |
//!
//! Each block lists cos then sin for every canonical mode in
//! [`crate::modes::lattice`] order.

use crate::dynamics::{Model, Trajectory};
use crate::error::{Error, Result};
use crate::modes::{lattice, ModeIndex};
use crate::params::{Forcing, PhysParams};
use crate::state::SpectralState;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"BSQ1";
/// Bit pattern of the sentinel; a byte-swapped reader sees a different value.
pub const SENTINEL_BITS: u64 = 0x0123_4567_89AB_CDEF;

pub fn write_trajectory<W: Write>(mut w: W, tr: &Trajectory) -> Result<()> {
    let p = tr.params();
    w.write_all(MAGIC)?;
    w.write_all(&(tr.model.n_trunc() as u32).to_le_bytes())?;
    w.write_all(&(tr.steps() as u64).to_le_bytes())?;
    w.write_all(&tr.dt.to_le_bytes())?;
    w.write_all(&(p.d() as u32).to_le_bytes())?;
    w.write_all(&tr.seed.to_le_bytes())?;
    for v in [p.nu1, p.nu2, p.g] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&SENTINEL_BITS.to_le_bytes())?;
    for f in &p.forcing {
        w.write_all(&f.index.j1.to_le_bytes())?;
        w.write_all(&f.index.j2.to_le_bytes())?;
        w.write_all(&(f.parity as u32).to_le_bytes())?;
        w.write_all(&f.alpha.to_le_bytes())?;
    }
    w.write_all(&(tr.model.advection as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * tr.states[0].dim());
    for s in &tr.states {
        buf.clear();
        for v in s.omega.iter().chain(&s.theta) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_bytes(tr: &Trajectory) -> Vec<u8> {
    let mut v = Vec::new();
    write_trajectory(&mut v, tr).expect("writing to memory");
    v
}

pub fn save_trajectory(path: impl AsRef<Path>, tr: &Trajectory) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_trajectory(std::io::BufWriter::new(f), tr)
}

struct Cursor<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.at + N;
        if end > self.data.len() {
            return Err(Error::Format(format!("truncated file while reading {what} at byte {}", self.at)));
        }
        let mut b = [0u8; N];
        b.copy_from_slice(&self.data[self.at..end]);
        self.at = end;
        Ok(b)
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }
    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(what)?))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(what)?))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }
}

pub fn from_bytes(data: &[u8]) -> Result<Trajectory> {
    let mut c = Cursor { data, at: 0 };
    if &c.take::<4>("magic")? != MAGIC {
        return Err(Error::Format("magic mismatch: not a BSQ1 file".into()));
    }
    let n_trunc = c.u32("n_trunc")? as usize;
    let steps = c.u64("step count")?;
    let dt = c.f64("dt")?;
    let d = c.u32("d")? as usize;
    let seed = c.u64("seed")?;
    let (nu1, nu2, g) = (c.f64("nu1")?, c.f64("nu2")?, c.f64("g")?);
    let sentinel = c.u64("sentinel")?;
    if sentinel != SENTINEL_BITS {
        return Err(Error::Format(format!(
            "sentinel mismatch ({sentinel:#018x}): wrong byte order or corrupted header"
        )));
    }
    if n_trunc == 0 || n_trunc > 4096 {
        return Err(Error::Format(format!("implausible n_trunc = {n_trunc}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Format(format!("invalid dt = {dt}")));
    }
    let mut forcing = Vec::with_capacity(d.min(1024));
    for _ in 0..d {
        let j1 = c.i32("forcing j1")?;
        let j2 = c.i32("forcing j2")?;
        let parity = c.u32("forcing parity")?;
        let alpha = c.f64("forcing alpha")?;
        if parity > 1 {
            return Err(Error::Format(format!("forcing parity {parity} is not 0 or 1")));
        }
        forcing.push(Forcing { index: ModeIndex::new(j1, j2), parity: parity as u8, alpha });
    }
    let flags = c.u32("flags")?;
    let half = 2 * lattice::mode_count(n_trunc);
    let payload = (data.len() - c.at) as u64;
    let expected = steps
        .checked_add(1)
        .and_then(|s| s.checked_mul(16 * half as u64))
        .ok_or_else(|| Error::Format("step count overflows".into()))?;
    if payload != expected {
        return Err(Error::Format(format!(
            "payload has {payload} bytes, header implies {expected}"
        )));
    }
    let mut states = Vec::with_capacity(steps as usize + 1);
    for _ in 0..=steps {
        let mut omega = Vec::with_capacity(half);
        let mut theta = Vec::with_capacity(half);
        for _ in 0..half {
            omega.push(c.f64("snapshot")?);
        }
        for _ in 0..half {
            theta.push(c.f64("snapshot")?);
        }
        states.push(SpectralState::from_parts(n_trunc, omega, theta)?);
    }
    let params = PhysParams::new(nu1, nu2, g).with_forcing(forcing);
    let mut model = Model::new(params, n_trunc);
    model.advection = flags & 1 == 1;
    Ok(Trajectory { model, dt, states, seed })
}

pub fn read_trajectory<R: Read>(mut r: R) -> Result<Trajectory> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    from_bytes(&data)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    from_bytes(&std::fs::read(path)?)
}
