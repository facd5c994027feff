use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::modes::ModeSet;
use crate::error::{Error, Result};
use crate::C64;

/// Environment variable that overrides the cache location.
pub const CACHE_DIR_ENV: &str = "COLDSCATTER_CACHE_DIR";
/// Bumped whenever the binary layout or the mode conventions change.
pub const CACHE_FORMAT_VERSION: u32 = 1;

const MAGIC: &[u8; 8] = b"CSMODES\0";

/// On-disk store of per-configuration eigendecompositions.
///
/// Layout (little endian): magic, format version `u32`, dimension `u64`,
/// biorthogonality residual `f64`, eigenvalues as `(re, im)` pairs, then the
/// eigenvector matrix column by column.
#[derive(Debug, Clone)]
pub struct ModeCache {
    dir: PathBuf,
}

impl ModeCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ModeCache { dir: dir.into() }
    }

    /// `$COLDSCATTER_CACHE_DIR`, or `coldscatter-cache` under the system
    /// temporary directory.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => ModeCache::new(d),
            _ => ModeCache::new(std::env::temp_dir().join("coldscatter-cache")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, spec_digest: &str, config_index: u64, min_separation: f64) -> PathBuf {
        self.dir.join(format!(
            "modes-v{CACHE_FORMAT_VERSION}-{spec_digest}-{config_index}-{:016x}.bin",
            min_separation.to_bits()
        ))
    }

    /// Cached mode set, or `None` when absent or written by another format version.
    pub fn load(&self, spec_digest: &str, config_index: u64, min_separation: f64) -> Result<Option<ModeSet>> {
        let path = self.path(spec_digest, config_index, min_separation);
        let mut bytes = Vec::new();
        match fs::File::open(&path) {
            Ok(mut f) => f.read_to_end(&mut bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        decode(&bytes).map_err(|why| Error::Cache(format!("{}: {why}", path.display())))
    }

    pub fn store(&self, spec_digest: &str, config_index: u64, min_separation: f64, modes: &ModeSet) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(spec_digest, config_index, min_separation);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            f.write_all(&encode(modes))?;
            f.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn encode(modes: &ModeSet) -> Vec<u8> {
    let n = modes.dim();
    let mut out = Vec::with_capacity(28 + 16 * (n + n * n));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&modes.biorthogonality_residual().to_le_bytes());
    for z in modes.eigenvalues().iter().chain(modes.raw_vectors()) {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> std::result::Result<Option<ModeSet>, String> {
    if bytes.len() < 28 || &bytes[..8] != MAGIC {
        return Err("not a mode cache file".into());
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CACHE_FORMAT_VERSION {
        return Ok(None);
    }
    let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let residual = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let count = n
        .checked_mul(n)
        .and_then(|v| v.checked_add(n))
        .ok_or("dimension overflow")?;
    if bytes.len() != 28 + 16 * count {
        return Err(format!("truncated: {} bytes for dimension {n}", bytes.len()));
    }
    let values: Vec<C64> = bytes[28..]
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let (eig, vec) = values.split_at(n);
    Ok(Some(ModeSet::from_parts(eig.to_vec(), vec.to_vec(), residual)))
}
