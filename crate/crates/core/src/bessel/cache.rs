//! On-disk cache of `J1` zeros and normalisation constants.
//!
//! File layout (all little-endian): the 8-byte magic [`CACHE_MAGIC`], then
//! 64-bit floats `[version, n_modes, n_quad, x_1..x_N, c_1..c_N]`.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use super::{build_basis, EigenBasis};
use crate::error::{Result, ShmfError};
use crate::scalar::Real;

pub const CACHE_MAGIC: [u8; 8] = *b"SHMFBZ\x00\x01";
pub const CACHE_VERSION: u32 = 1;

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "SHMF_CACHE_DIR";

/// Cache handle rooted at a directory.
#[derive(Debug, Clone)]
pub struct BasisCache {
    dir: PathBuf,
}

impl BasisCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$SHMF_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV).map(Self::new)
    }

    pub fn path_for(&self, n_modes: usize, n_quad: usize) -> PathBuf {
        self.dir
            .join(format!("bessel_n{n_modes}_m{n_quad}_v{CACHE_VERSION}.bin"))
    }

    /// Reads cached zeros and normalisation constants, `None` when absent.
    pub fn read(&self, n_modes: usize, n_quad: usize) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let path = self.path_for(n_modes, n_quad);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ShmfError::Cache(format!("{}: {e}", path.display()))),
        };
        decode(&bytes, n_modes, n_quad)
            .map(Some)
            .map_err(|msg| ShmfError::Cache(format!("{}: {msg}", path.display())))
    }

    pub fn write(&self, n_modes: usize, n_quad: usize, zeros: &[f64], norms: &[f64]) -> Result<()> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| ShmfError::Cache(format!("{}: {e}", self.dir.display())))?;
        let path = self.path_for(n_modes, n_quad);
        fs::write(&path, encode(n_quad, zeros, norms))
            .map_err(|e| ShmfError::Cache(format!("{}: {e}", path.display())))
    }
}

pub(crate) fn encode(n_quad: usize, zeros: &[f64], norms: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * (3 + 2 * zeros.len()));
    out.extend_from_slice(&CACHE_MAGIC);
    let header = [f64::from(CACHE_VERSION), zeros.len() as f64, n_quad as f64];
    for v in header.iter().chain(zeros).chain(norms) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn decode(
    bytes: &[u8],
    n_modes: usize,
    n_quad: usize,
) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    if bytes.len() < 8 || bytes[..8] != CACHE_MAGIC {
        return Err("bad magic".into());
    }
    let body = &bytes[8..];
    if !body.len().is_multiple_of(8) {
        return Err("truncated float payload".into());
    }
    let floats: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if floats.len() != 3 + 2 * n_modes {
        return Err(format!("expected {} floats, found {}", 3 + 2 * n_modes, floats.len()));
    }
    if floats[0] != f64::from(CACHE_VERSION) || floats[1] != n_modes as f64 || floats[2] != n_quad as f64 {
        return Err("key mismatch".into());
    }
    let zeros = floats[3..3 + n_modes].to_vec();
    let norms = floats[3 + n_modes..].to_vec();
    Ok((zeros, norms))
}

/// Builds the basis, reusing cached zeros when a cache is available and
/// writing them back after a fresh computation.
pub fn load_or_build<T: Real>(
    n_modes: usize,
    n_quad: usize,
    cache: Option<&BasisCache>,
) -> Result<Arc<EigenBasis<T>>> {
    let Some(cache) = cache else {
        return build_basis(n_modes, n_quad);
    };
    if n_quad < 2 * n_modes {
        return build_basis(n_modes, n_quad);
    }
    if let Some((zeros, _norms)) = cache.read(n_modes, n_quad)? {
        let zeros: Vec<T> = zeros.into_iter().map(T::lit).collect();
        // normalisations are recomputed by the quadrature self-test anyway
        return EigenBasis::from_zeros(zeros, n_quad).map(Arc::new);
    }
    let basis = build_basis::<T>(n_modes, n_quad)?;
    let zeros: Vec<f64> = basis.zeros().iter().map(|x| x.to_f64_lossy()).collect();
    let norms: Vec<f64> = basis.norm_consts().iter().map(|x| x.to_f64_lossy()).collect();
    cache.write(n_modes, n_quad, &zeros, &norms)?;
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip_and_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BasisCache::new(dir.path());
        let fresh = load_or_build::<f64>(10, 64, Some(&cache)).unwrap();
        let path = cache.path_for(10, 64);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], &CACHE_MAGIC);
        assert_eq!(bytes.len(), 8 + 8 * (3 + 20));
        let cached = load_or_build::<f64>(10, 64, Some(&cache)).unwrap();
        assert_eq!(fresh.zeros(), cached.zeros());
        assert_eq!(fresh.norm_consts(), cached.norm_consts());
    }

    #[test]
    fn corrupt_cache_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BasisCache::new(dir.path());
        fs::write(cache.path_for(4, 64), b"not a cache").unwrap();
        assert!(matches!(cache.read(4, 64), Err(ShmfError::Cache(_))));
        let (z, c) = decode(&encode(64, &[1.0, 2.0], &[3.0, 4.0]), 2, 64).unwrap();
        assert_eq!((z, c), (vec![1.0, 2.0], vec![3.0, 4.0]));
        assert!(decode(&encode(64, &[1.0, 2.0], &[3.0, 4.0]), 2, 128).is_err());
    }
}
