use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::Adam;
use crate::error::{Error, Result};
use crate::model::checkpoint::{model_archive, model_from_archive, TensorArchive};
use crate::model::Model;

#[derive(Clone, Debug, PartialEq)]
pub struct BestCheckpoint {
    pub epoch: usize,
    pub psnr: f64,
    pub model: Model<f32>,
}

/// Everything needed to continue a run bit-exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: Model<f32>,
    pub adam: Adam,
    pub epochs_done: usize,
    /// Shuffling is keyed by `(seed, epoch)`, so this is the whole RNG state.
    pub seed: u64,
    pub best: Option<BestCheckpoint>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    epochs_done: usize,
    seed: u64,
    adam_step: u64,
    adam_beta1: f64,
    adam_beta2: f64,
    adam_eps: f64,
    best_epoch: Option<usize>,
    best_psnr_bits: Option<u64>,
}

const M: &str = "adam.m/";
const V: &str = "adam.v/";
const BEST: &str = "best/";

impl TrainState {
    pub fn new(model: Model<f32>, seed: u64) -> Self {
        Self {
            adam: Adam::new(&model),
            model,
            epochs_done: 0,
            seed,
            best: None,
        }
    }

    pub(crate) fn offer_best(&mut self, epoch: usize, psnr: f64) {
        if self.best.as_ref().is_none_or(|b| psnr > b.psnr) {
            self.best = Some(BestCheckpoint {
                epoch,
                psnr,
                model: self.model.clone(),
            });
        }
    }

    pub fn to_archive(&self) -> Result<TensorArchive> {
        let mut ar = model_archive(&self.model);
        let put = |ar: &mut TensorArchive, prefix: &str, m: &Model<f32>| {
            for (name, t) in m.params() {
                ar.tensors.insert(format!("{prefix}{name}"), t.clone());
            }
        };
        put(&mut ar, M, &self.adam.m);
        put(&mut ar, V, &self.adam.v);
        if let Some(b) = &self.best {
            put(&mut ar, BEST, &b.model);
        }
        let meta = Meta {
            epochs_done: self.epochs_done,
            seed: self.seed,
            adam_step: self.adam.step,
            adam_beta1: self.adam.beta1,
            adam_beta2: self.adam.beta2,
            adam_eps: self.adam.eps,
            best_epoch: self.best.as_ref().map(|b| b.epoch),
            best_psnr_bits: self.best.as_ref().map(|b| b.psnr.to_bits()),
        };
        ar.meta
            .as_object_mut()
            .ok_or_else(|| Error::Malformed("archive meta is not an object".into()))?
            .insert("train".into(), serde_json::to_value(meta)?);
        Ok(ar)
    }

    pub fn from_archive(ar: &TensorArchive) -> Result<Self> {
        let model = model_from_archive(ar)?;
        let meta: Meta = serde_json::from_value(
            ar.meta
                .get("train")
                .cloned()
                .ok_or_else(|| Error::Malformed("checkpoint has no training state".into()))?,
        )?;
        let sub = |prefix: &str| -> Result<Model<f32>> {
            let named = ar
                .tensors
                .iter()
                .filter_map(|(k, t)| k.strip_prefix(prefix).map(|n| (n.to_string(), t.clone())))
                .collect();
            Model::from_params(model.config(), named)
        };
        let adam = Adam {
            m: sub(M)?,
            v: sub(V)?,
            step: meta.adam_step,
            beta1: meta.adam_beta1,
            beta2: meta.adam_beta2,
            eps: meta.adam_eps,
        };
        let best = match (meta.best_epoch, meta.best_psnr_bits) {
            (Some(epoch), Some(bits)) => Some(BestCheckpoint {
                epoch,
                psnr: f64::from_bits(bits),
                model: sub(BEST)?,
            }),
            (None, None) => None,
            _ => return Err(Error::Malformed("incomplete best-checkpoint record".into())),
        };
        Ok(Self {
            model,
            adam,
            epochs_done: meta.epochs_done,
            seed: meta.seed,
            best,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&TensorArchive::load(path)?)
    }
}
