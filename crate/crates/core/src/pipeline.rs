//! One configuration driving a whole run, and the train → QAT → stream
//! pipeline built on it.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec::{encode_model, Bitstream, StreamHeader, VideoDims};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::objectives::LossWeights;
use crate::training::{
    initial_state, model_geometry, qat_finetune, train, Ablation, EpochLog, TrainConfig, TrainOutcome, TrainingSet,
};
use crate::video_io::VideoTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSize {
    pub height: usize,
    pub width: usize,
}

impl Default for PatchSize {
    fn default() -> Self {
        Self { height: 32, width: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Frame and patch geometry are filled in from the video.
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Defaults to [`LossWeights::default_for`] the model's stage count.
    pub loss: Option<LossWeights>,
    pub patch: PatchSize,
    pub bits: u32,
    pub ablation: Option<Ablation>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            loss: None,
            patch: PatchSize::default(),
            bits: 8,
            ablation: None,
        }
    }
}

impl RunConfig {
    /// Parse from a JSON value, applying `key=value` overrides with dotted
    /// keys first. Values are read as JSON literals, falling back to plain
    /// strings.
    pub fn from_value(mut value: Value, overrides: &[(String, String)]) -> Result<Self> {
        for (k, v) in overrides {
            set_dotted(&mut value, k, parse_literal(v))?;
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Training settings after applying the ablation, if any.
    pub fn effective_train(&self) -> TrainConfig {
        match self.ablation {
            Some(a) => a.apply(&self.train),
            None => self.train.clone(),
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        self.loss
            .clone()
            .unwrap_or_else(|| LossWeights::default_for(self.model.num_stages))
    }
}

fn parse_literal(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

/// Set `a.b.c` inside a JSON object tree, creating objects along the way.
pub fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("key has at least one part")
}

/// Everything derived from the video before training starts.
pub struct Prepared {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub weights: LossWeights,
    pub set: TrainingSet,
}

pub fn prepare(video: &VideoTensor, cfg: &RunConfig) -> Result<Prepared> {
    let train = cfg.effective_train();
    let model = train.apply_model(&model_geometry(&cfg.model, video, cfg.patch.height, cfg.patch.width)?);
    let set = TrainingSet::new(video, &model)?;
    Ok(Prepared {
        model,
        train,
        weights: cfg.loss_weights(),
        set,
    })
}

/// Train from scratch and return the full run.
pub fn represent(video: &VideoTensor, cfg: &RunConfig, on_epoch: &mut dyn FnMut(&EpochLog)) -> Result<(Prepared, TrainOutcome)> {
    let p = prepare(video, cfg)?;
    let state = initial_state(&p.model, &p.train)?;
    let out = train(state, &p.set, &p.weights, &p.train, on_epoch)?;
    Ok((p, out))
}

pub struct EncodeOutcome {
    pub prepared: Prepared,
    pub train: TrainOutcome,
    /// Weights that were quantized into the stream.
    pub encoded_model: Model<f32>,
    pub qat_log: Vec<EpochLog>,
    pub ptq_psnr: Option<f64>,
    pub stream: Bitstream,
    pub bytes: Vec<u8>,
}

pub fn stream_header(p: &Prepared) -> StreamHeader {
    let d = p.set.dims();
    StreamHeader {
        model: p.model.clone(),
        video: VideoDims {
            frames: d.frames,
            height: d.height,
            width: d.width,
        },
        patch: p.set.spec,
    }
}

/// Train, fine-tune with fake quantization, quantize and entropy-code.
pub fn encode(video: &VideoTensor, cfg: &RunConfig, on_epoch: &mut dyn FnMut(&EpochLog)) -> Result<EncodeOutcome> {
    let (prepared, trained) = represent(video, cfg, on_epoch)?;
    let start = trained.best_model().clone();
    let (encoded_model, qat_log, ptq_psnr) = if prepared.train.qat_epochs > 0 {
        let q = qat_finetune(&start, &prepared.set, &prepared.weights, &prepared.train, cfg.bits, on_epoch)?;
        (q.model, q.log, Some(q.ptq_psnr))
    } else {
        (start, Vec::new(), None)
    };
    let stream = encode_model(&encoded_model, stream_header(&prepared), cfg.bits)?;
    let bytes = stream.to_bytes()?;
    Ok(EncodeOutcome {
        prepared,
        train: trained,
        encoded_model,
        qat_log,
        ptq_psnr,
        stream,
        bytes,
    })
}
