use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{ParamId, ParamStore, Tensor};

use super::config::ModelConfig;
use super::PolicyError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"INSPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const INIT_STD: f32 = 0.02;

#[derive(Debug, Clone, Copy)]
pub struct LayerParams {
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub w_qkv: ParamId,
    pub b_qkv: ParamId,
    pub w_o: ParamId,
    pub b_o: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
    pub w_in: ParamId,
    pub b_in: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

/// Parameters of a pre-norm causal decoder with learned positions and an
/// untied output head. Tensors live in `store` in the checkpoint order:
/// token embedding, positions, each layer's twelve tensors, final norm, head.
#[derive(Debug, Clone)]
pub struct TransformerWeights {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub tok_emb: ParamId,
    pub pos_emb: ParamId,
    pub layers: Vec<LayerParams>,
    pub ln_f_gain: ParamId,
    pub ln_f_bias: ParamId,
    pub head: ParamId,
    pub head_bias: ParamId,
}

/// Shapes in storage order, with a fill rule per tensor.
fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>, Fill)> {
    let (v, d) = (c.vocab_size, c.d_model);
    let mut out = vec![
        ("tok_emb".to_string(), vec![v, d], Fill::Normal),
        ("pos_emb".to_string(), vec![c.context_len, d], Fill::Normal),
    ];
    for l in 0..c.layers {
        let p = |s: &str| format!("layer{l}.{s}");
        out.extend([
            (p("ln1_gain"), vec![d], Fill::One),
            (p("ln1_bias"), vec![d], Fill::Zero),
            (p("w_qkv"), vec![d, 3 * d], Fill::Normal),
            (p("b_qkv"), vec![3 * d], Fill::Zero),
            (p("w_o"), vec![d, d], Fill::Normal),
            (p("b_o"), vec![d], Fill::Zero),
            (p("ln2_gain"), vec![d], Fill::One),
            (p("ln2_bias"), vec![d], Fill::Zero),
            (p("w_in"), vec![d, 4 * d], Fill::Normal),
            (p("b_in"), vec![4 * d], Fill::Zero),
            (p("w_out"), vec![4 * d, d], Fill::Normal),
            (p("b_out"), vec![d], Fill::Zero),
        ]);
    }
    out.extend([
        ("ln_f_gain".to_string(), vec![d], Fill::One),
        ("ln_f_bias".to_string(), vec![d], Fill::Zero),
        ("head".to_string(), vec![d, v], Fill::Normal),
        ("head_bias".to_string(), vec![v], Fill::Zero),
    ]);
    out
}

#[derive(Clone, Copy)]
enum Fill {
    Zero,
    One,
    Normal,
}

impl TransformerWeights {
    pub fn init(config: ModelConfig) -> Result<Self, PolicyError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0f32, INIT_STD).expect("valid std");
        let tensors = layout(&config)
            .into_iter()
            .map(|(name, shape, fill)| {
                let n: usize = shape.iter().product();
                let data = match fill {
                    Fill::Zero => vec![0.0; n],
                    Fill::One => vec![1.0; n],
                    Fill::Normal => (0..n).map(|_| normal.sample(&mut rng)).collect(),
                };
                (name, Tensor::new(shape, data).expect("layout shapes match data"))
            })
            .collect();
        Ok(Self::assemble(config, tensors))
    }

    fn assemble(config: ModelConfig, tensors: Vec<(String, Tensor)>) -> Self {
        let mut store = ParamStore::new();
        let mut ids = tensors.into_iter().map(|(name, t)| store.add(name, t)).collect::<Vec<_>>().into_iter();
        let mut next = || ids.next().expect("layout length");
        let tok_emb = next();
        let pos_emb = next();
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                ln1_gain: next(),
                ln1_bias: next(),
                w_qkv: next(),
                b_qkv: next(),
                w_o: next(),
                b_o: next(),
                ln2_gain: next(),
                ln2_bias: next(),
                w_in: next(),
                b_in: next(),
                w_out: next(),
                b_out: next(),
            })
            .collect();
        let (ln_f_gain, ln_f_bias, head, head_bias) = (next(), next(), next(), next());
        Self { config, store, tok_emb, pos_emb, layers, ln_f_gain, ln_f_bias, head, head_bias }
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn is_finite(&self) -> bool {
        self.store.values().iter().all(Tensor::is_finite)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(64 + 4 * self.num_parameters());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for field in [c.layers, c.heads, c.d_model, c.context_len, c.vocab_size] {
            out.extend_from_slice(&(field as u32).to_le_bytes());
        }
        out.extend_from_slice(&c.seed.to_le_bytes());
        for t in self.store.values() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PolicyError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| PolicyError::Checkpoint("truncated header".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(PolicyError::Checkpoint("bad magic".into()));
        }
        let mut u32_field = || -> Result<u32, PolicyError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| PolicyError::Checkpoint("truncated header".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = u32_field()?;
        if version != CHECKPOINT_VERSION {
            return Err(PolicyError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut f = [0usize; 5];
        for x in &mut f {
            *x = u32_field()? as usize;
        }
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(|_| PolicyError::Checkpoint("truncated header".into()))?;
        let config = ModelConfig {
            layers: f[0],
            heads: f[1],
            d_model: f[2],
            context_len: f[3],
            vocab_size: f[4],
            seed: u64::from_le_bytes(b),
        };
        config.validate()?;
        let shapes = layout(&config);
        let expected: usize = shapes.iter().map(|(_, s, _)| s.iter().product::<usize>()).sum();
        if r.len() != 4 * expected {
            return Err(PolicyError::Checkpoint(format!(
                "config implies {expected} parameters, file holds {} bytes of tensor data",
                r.len()
            )));
        }
        let mut floats = r.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let tensors = shapes
            .into_iter()
            .map(|(name, shape, _)| {
                let n = shape.iter().product();
                let data: Vec<f32> = floats.by_ref().take(n).collect();
                (name, Tensor::new(shape, data).expect("length checked above"))
            })
            .collect();
        let w = Self::assemble(config, tensors);
        if !w.is_finite() {
            return Err(PolicyError::Checkpoint("non-finite parameter".into()));
        }
        Ok(w)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        crate::io::write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

