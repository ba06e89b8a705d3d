//! Versioned JSON dump of a vectorized MPO.

use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::mpo::VectorizedMpo;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "ddxy-mpo";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDump {
    shape: [usize; 3],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpoDump {
    format: String,
    version: u32,
    /// Pauli-basis ordering of the physical index.
    basis: String,
    n_sites: usize,
    center: usize,
    time: f64,
    discarded_weight: f64,
    tensors: Vec<TensorDump>,
}

const BASIS: &str = "I,X,Y,Z/sqrt2";

pub fn to_json(mpo: &VectorizedMpo) -> Result<String> {
    let dump = MpoDump {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        basis: BASIS.into(),
        n_sites: mpo.n_sites(),
        center: mpo.center(),
        time: mpo.time(),
        discarded_weight: mpo.discarded_weight(),
        tensors: mpo
            .chain()
            .tensors()
            .iter()
            .map(|t| {
                let (l, d, r) = t.dim();
                TensorDump { shape: [l, d, r], data: t.iter().copied().collect() }
            })
            .collect(),
    };
    serde_json::to_string(&dump).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn from_json(text: &str) -> Result<VectorizedMpo> {
    let dump: MpoDump = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if dump.format != CHECKPOINT_FORMAT || dump.version != CHECKPOINT_VERSION || dump.basis != BASIS {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{} ({})",
            dump.format, dump.version, dump.basis
        )));
    }
    if dump.tensors.len() != dump.n_sites || dump.n_sites == 0 || dump.center >= dump.n_sites {
        return Err(Error::Checkpoint("site count or center inconsistent".into()));
    }
    let tensors = dump
        .tensors
        .into_iter()
        .map(|t| {
            let [l, d, r] = t.shape;
            Array3::from_shape_vec((l, d, r), t.data).map_err(|e| Error::Checkpoint(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    VectorizedMpo::from_parts(tensors, dump.center, dump.discarded_weight, dump.time)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(mpo: &VectorizedMpo, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(mpo)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<VectorizedMpo> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::ProductState;
    use crate::tensor::product_mpo;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mpo = product_mpo(&ProductState::random_pure(4, &mut rng));
        let back = from_json(&to_json(&mpo).unwrap()).unwrap();
        assert_eq!(back, mpo);
    }

    #[test]
    fn rejects_other_versions() {
        let mpo = product_mpo(&ProductState::all_down(2));
        let text = to_json(&mpo).unwrap().replace("\"version\":1", "\"version\":2");
        assert!(matches!(from_json(&text), Err(Error::Checkpoint(_))));
        assert!(from_json("{}").is_err());
    }
}
