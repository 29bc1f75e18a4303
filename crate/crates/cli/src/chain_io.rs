//! Self-describing binary container for chain records, plus CSV export.
//!
//! Layout: magic `AIES`, u32 version, six u64 header fields (L, n,
//! t_stored, thin, seed, iterations), a length-prefixed UTF-8 key=value
//! block (target spec, init parameters, free-form metadata), the position
//! array as row-major little-endian f64, and the per-move stretch log as
//! (f64 z, u8 accepted) pairs. Everything is written in a fixed order so
//! identical runs produce byte-identical files.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use aies_core::chain::ChainRecord;
use aies_core::ensemble::InitSpec;

use crate::error::{CliError, Result};

const MAGIC: &[u8; 4] = b"AIES";
const VERSION: u32 = 1;

/// Write `record` to `path`, attaching `extra` metadata key=value pairs.
pub fn write_chain(
    path: &Path,
    record: &ChainRecord,
    extra: &BTreeMap<String, String>,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [
        record.n_walkers as u64,
        record.dim as u64,
        record.t_stored() as u64,
        record.thin as u64,
        record.seed,
        record.iterations,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }

    let mut kv = String::new();
    kv.push_str(&format!("target={}\n", record.target_id));
    kv.push_str(&format!("init_mean={:?}\n", record.init.mean));
    kv.push_str(&format!("init_sd={:?}\n", record.init.sd));
    for (k, v) in extra {
        kv.push_str(&format!("{k}={v}\n"));
    }
    let kv_bytes = kv.as_bytes();
    w.write_all(&(kv_bytes.len() as u32).to_le_bytes())?;
    w.write_all(kv_bytes)?;

    for v in &record.positions {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(record.move_z.len() as u64).to_le_bytes())?;
    for (z, accepted) in record.move_z.iter().zip(&record.move_accepted) {
        w.write_all(&z.to_le_bytes())?;
        w.write_all(&[u8::from(*accepted)])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a chain file back, returning the record and its metadata block.
pub fn read_chain(path: &Path) -> Result<(ChainRecord, BTreeMap<String, String>)> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CliError::Config(format!(
            "{} is not a chain file",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CliError::Config(format!(
            "{}: unsupported chain file version {version}",
            path.display()
        )));
    }
    let n_walkers = read_u64(&mut r)? as usize;
    let dim = read_u64(&mut r)? as usize;
    let t_stored = read_u64(&mut r)? as usize;
    let thin = read_u64(&mut r)? as usize;
    let seed = read_u64(&mut r)?;
    let iterations = read_u64(&mut r)?;

    let kv_len = read_u32(&mut r)? as usize;
    let mut kv_bytes = vec![0u8; kv_len];
    r.read_exact(&mut kv_bytes)?;
    let kv_text = String::from_utf8(kv_bytes)
        .map_err(|_| CliError::Config(format!("{}: metadata is not UTF-8", path.display())))?;
    let mut meta = BTreeMap::new();
    for line in kv_text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            meta.insert(k.to_string(), v.to_string());
        }
    }

    let mut positions = vec![0.0f64; t_stored * n_walkers * dim];
    read_f64_slice(&mut r, &mut positions)?;

    let move_count = read_u64(&mut r)? as usize;
    let mut move_z = Vec::with_capacity(move_count);
    let mut move_accepted = Vec::with_capacity(move_count);
    let mut buf = [0u8; 9];
    for _ in 0..move_count {
        r.read_exact(&mut buf)?;
        move_z.push(f64::from_le_bytes(buf[..8].try_into().unwrap()));
        move_accepted.push(buf[8] != 0);
    }

    let init = InitSpec {
        mean: parse_meta_f64(&meta, "init_mean")?,
        sd: parse_meta_f64(&meta, "init_sd")?,
    };
    let record = ChainRecord {
        n_walkers,
        dim,
        thin,
        iterations,
        seed,
        target_id: meta.get("target").cloned().unwrap_or_default(),
        init,
        positions,
        move_z,
        move_accepted,
    };
    Ok((record, meta))
}

fn parse_meta_f64(meta: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    meta.get(key)
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| CliError::Config(format!("chain file metadata is missing {key}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64_slice<R: Read>(r: &mut R, out: &mut [f64]) -> Result<()> {
    let mut buf = vec![0u8; out.len() * 8];
    r.read_exact(&mut buf)?;
    for (i, chunk) in buf.chunks_exact(8).enumerate() {
        out[i] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(())
}

/// Export stored positions as CSV with columns
/// `run,walker,iter,coord_1..coord_n`.
pub fn export_csv(path: &Path, record: &ChainRecord, run_id: usize) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "run,walker,iter")?;
    for i in 1..=record.dim {
        write!(w, ",coord_{i}")?;
    }
    writeln!(w)?;
    for t in 0..record.t_stored() {
        let iter = t * record.thin;
        for j in 0..record.n_walkers {
            write!(w, "{run_id},{j},{iter}")?;
            for v in record.walker_at(t, j) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
