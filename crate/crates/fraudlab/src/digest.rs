//! SHA-256 digests of files, parameter sets and prediction logs.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use fraudlab_core::experts::SequenceExpert;
use fraudlab_core::moe::ExpertSet;
use fraudlab_core::numerics::Tensor;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = BufReader::new(File::open(path).map_err(Error::io(path))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(Error::io(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn absorb(h: &mut Sha256, name: &str, t: &Tensor) {
    h.update(name.as_bytes());
    h.update([0]);
    for d in t.shape() {
        h.update((*d as u64).to_le_bytes());
    }
    for v in t.data() {
        h.update(v.to_le_bytes());
    }
}

/// Digest over every expert parameter, the autoencoder threshold and its
/// column view. Missing experts hash as a marker.
pub fn experts_digest(experts: &ExpertSet) -> String {
    let mut h = Sha256::new();
    match &experts.lstm {
        Some(e) => e.named_params().into_iter().for_each(|(n, t)| absorb(&mut h, n, t)),
        None => h.update(b"lstm:none"),
    }
    match &experts.transformer {
        Some(e) => e.named_params().into_iter().for_each(|(n, t)| absorb(&mut h, n, t)),
        None => h.update(b"transformer:none"),
    }
    match &experts.autoencoder {
        Some(e) => {
            e.named_params().into_iter().for_each(|(n, t)| absorb(&mut h, n, t));
            h.update(e.threshold().unwrap_or(f64::NAN).to_le_bytes());
            for c in e.view().unwrap_or(&[]) {
                h.update((*c as u64).to_le_bytes());
            }
        }
        None => h.update(b"autoencoder:none"),
    }
    hex::encode(h.finalize())
}
