//! Binary state snapshots.
//!
//! Layout, all little-endian: magic `VSFL`, format version (u32), N (u32),
//! t (f64), step (u64), then N² velocity and N² phase coefficients (f64),
//! modes ordered by `(λ, j, k)`.

use std::path::Path;

use vesicle_core::SystemState;

use crate::error::{io, Result, ShellError};

pub const MAGIC: [u8; 4] = *b"VSFL";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

/// `(j, k)` for `1 ≤ j, k ≤ n` sorted by `(j² + k², j, k)`.
pub fn mode_order(n: usize) -> Vec<(usize, usize)> {
    let mut modes: Vec<(usize, usize)> = (1..=n)
        .flat_map(|j| (1..=n).map(move |k| (j, k)))
        .collect();
    modes.sort_by_key(|&(j, k)| (j * j + k * k, j, k));
    modes
}

pub fn to_bytes(state: &SystemState) -> Vec<u8> {
    let n = state.n();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * n * n);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    out.extend_from_slice(&state.step.to_le_bytes());
    let order = mode_order(n);
    for coeffs in [&state.v, &state.phi] {
        for &(j, k) in &order {
            out.extend_from_slice(&coeffs[(j - 1) * n + (k - 1)].to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> std::result::Result<SystemState, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if bytes[..4] != MAGIC {
        return Err("bad magic, not a snapshot".into());
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(format!("format version {version}, this build reads {VERSION}"));
    }
    let n = u32_at(8) as usize;
    let t = f64::from_bits(u64_at(12));
    let step = u64_at(20);
    let expected = HEADER_LEN + 16 * n * n;
    if bytes.len() != expected {
        return Err(format!("{} bytes, expected {expected} for N = {n}", bytes.len()));
    }
    let order = mode_order(n);
    let mut v = vec![0.0; n * n];
    let mut phi = vec![0.0; n * n];
    let mut at = HEADER_LEN;
    for coeffs in [&mut v, &mut phi] {
        for &(j, k) in &order {
            coeffs[(j - 1) * n + (k - 1)] = f64::from_bits(u64_at(at));
            at += 8;
        }
    }
    Ok(SystemState { v, phi, t, step })
}

pub fn write(path: &Path, state: &SystemState) -> Result<()> {
    std::fs::write(path, to_bytes(state)).map_err(io(path))
}

pub fn read(path: &Path) -> Result<SystemState> {
    let bytes = std::fs::read(path).map_err(|e| ShellError::Snapshot {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    from_bytes(&bytes).map_err(|reason| ShellError::Snapshot {
        path: path.to_path_buf(),
        reason,
    })
}

/// Places a snapshot's modes into an `n`-mode state; higher modes start at
/// zero. Snapshots with more modes than `n` are rejected.
pub fn embed(state: &SystemState, n: usize) -> std::result::Result<SystemState, String> {
    let ns = state.n();
    if ns > n {
        return Err(format!("snapshot has N = {ns}, domain only {n}"));
    }
    let mut out = SystemState {
        v: vec![0.0; n * n],
        phi: vec![0.0; n * n],
        t: state.t,
        step: state.step,
    };
    for j in 1..=ns {
        for k in 1..=ns {
            out.v[(j - 1) * n + (k - 1)] = state.v[(j - 1) * ns + (k - 1)];
            out.phi[(j - 1) * n + (k - 1)] = state.phi[(j - 1) * ns + (k - 1)];
        }
    }
    Ok(out)
}
