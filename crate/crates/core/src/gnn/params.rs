use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::hetgraph::{NodeType, Relation};
use crate::tensor::Matrix;

pub const NUM_LAYERS: usize = 2;

/// A message-passing relation: a canonical edge type traversed forward
/// (source sends to destination) or in reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MsgRel {
    pub rel: Relation,
    pub reverse: bool,
}

pub const NUM_MSG_RELS: usize = 10;

impl MsgRel {
    pub const ALL: [MsgRel; NUM_MSG_RELS] = {
        let mut out = [MsgRel {
            rel: Relation::Views,
            reverse: false,
        }; NUM_MSG_RELS];
        let mut i = 0;
        while i < 5 {
            out[2 * i].rel = Relation::ALL[i];
            out[2 * i + 1].rel = Relation::ALL[i];
            out[2 * i + 1].reverse = true;
            i += 1;
        }
        out
    };

    #[inline]
    pub fn index(self) -> usize {
        self.rel.index() * 2 + self.reverse as usize
    }

    /// Node type whose embeddings are aggregated.
    pub fn sender(self) -> NodeType {
        if self.reverse {
            self.rel.dst_type()
        } else {
            self.rel.src_type()
        }
    }

    /// Node type that receives the aggregate.
    pub fn receiver(self) -> NodeType {
        if self.reverse {
            self.rel.src_type()
        } else {
            self.rel.dst_type()
        }
    }

    pub fn name(self) -> String {
        if self.reverse {
            format!("{}_rev", self.rel.name())
        } else {
            self.rel.name().to_string()
        }
    }
}

/// Message relations received by each node type, in [`MsgRel::ALL`] order.
pub fn msg_into(t: NodeType) -> &'static [MsgRel] {
    use Relation::*;
    const USER: [MsgRel; 4] = [
        MsgRel {
            rel: Views,
            reverse: true,
        },
        MsgRel {
            rel: Saves,
            reverse: true,
        },
        MsgRel {
            rel: Tours,
            reverse: true,
        },
        MsgRel {
            rel: SearchedIn,
            reverse: true,
        },
    ];
    const LISTING: [MsgRel; 4] = [
        MsgRel {
            rel: Views,
            reverse: false,
        },
        MsgRel {
            rel: Saves,
            reverse: false,
        },
        MsgRel {
            rel: Tours,
            reverse: false,
        },
        MsgRel {
            rel: Contains,
            reverse: false,
        },
    ];
    const CITY: [MsgRel; 2] = [
        MsgRel {
            rel: SearchedIn,
            reverse: false,
        },
        MsgRel {
            rel: Contains,
            reverse: true,
        },
    ];
    match t {
        NodeType::User => &USER,
        NodeType::Listing => &LISTING,
        NodeType::City => &CITY,
    }
}

/// Input width per node type. Users have no raw attributes and are fed as
/// one-hot rows, so their projection is a learned embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDims {
    pub user: usize,
    pub listing: usize,
    pub city: usize,
}

impl FeatureDims {
    pub fn get(&self, t: NodeType) -> usize {
        match t {
            NodeType::User => self.user,
            NodeType::Listing => self.listing,
            NodeType::City => self.city,
        }
    }
}

/// Every learnable tensor of the model. Also used to hold gradients and
/// optimizer moments, which share the exact layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `[d_t x d]` per node type.
    pub proj: [Matrix; 3],
    /// `[1 x d]` per node type.
    pub bias: [Matrix; 3],
    /// `[layer][msg rel]`, each `[d x d]`.
    pub relation: Vec<Vec<Matrix>>,
    /// `[layer][node type]`, each `[d x d]`.
    pub self_loop: Vec<[Matrix; 3]>,
    /// Bilinear scorer `[d x d]`.
    pub scorer: Matrix,
}

impl Weights {
    pub fn zeros(dims: FeatureDims, d: usize) -> Self {
        let sq = || Matrix::zeros(d, d);
        Self {
            proj: NodeType::ALL.map(|t| Matrix::zeros(dims.get(t), d)),
            bias: NodeType::ALL.map(|_| Matrix::zeros(1, d)),
            relation: (0..NUM_LAYERS)
                .map(|_| (0..NUM_MSG_RELS).map(|_| sq()).collect())
                .collect(),
            self_loop: (0..NUM_LAYERS)
                .map(|_| NodeType::ALL.map(|_| sq()))
                .collect(),
            scorer: sq(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.feature_dims(), self.dim())
    }

    pub fn dim(&self) -> usize {
        self.scorer.rows()
    }

    pub fn feature_dims(&self) -> FeatureDims {
        FeatureDims {
            user: self.proj[0].rows(),
            listing: self.proj[1].rows(),
            city: self.proj[2].rows(),
        }
    }

    /// Tensor names in canonical order (matches [`Weights::tensors`]).
    pub fn names() -> Vec<String> {
        let mut names = Vec::new();
        for t in NodeType::ALL {
            names.push(format!("proj.{}.weight", t.name()));
        }
        for t in NodeType::ALL {
            names.push(format!("proj.{}.bias", t.name()));
        }
        for l in 0..NUM_LAYERS {
            for m in MsgRel::ALL {
                names.push(format!("layer{}.rel.{}", l + 1, m.name()));
            }
        }
        for l in 0..NUM_LAYERS {
            for t in NodeType::ALL {
                names.push(format!("layer{}.self.{}", l + 1, t.name()));
            }
        }
        names.push("scorer".to_string());
        names
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = Vec::new();
        v.extend(self.proj.iter());
        v.extend(self.bias.iter());
        for layer in &self.relation {
            v.extend(layer.iter());
        }
        for layer in &self.self_loop {
            v.extend(layer.iter());
        }
        v.push(&self.scorer);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = Vec::new();
        v.extend(self.proj.iter_mut());
        v.extend(self.bias.iter_mut());
        for layer in &mut self.relation {
            v.extend(layer.iter_mut());
        }
        for layer in &mut self.self_loop {
            v.extend(layer.iter_mut());
        }
        v.push(&mut self.scorer);
        v
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|m| m.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }

    /// Largest absolute entry across all tensors.
    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|m| m.data().iter())
            .fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub margin: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            margin: 1.0,
            learning_rate: 1e-2,
            weight_decay: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Weights,
    pub hyper: Hyper,
    /// Optimizer steps taken; zero means untrained.
    pub steps: u64,
}

impl ModelParams {
    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn feature_dims(&self) -> FeatureDims {
        self.weights.feature_dims()
    }
}

/// Glorot/Xavier uniform bound.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Xavier-uniform weights, zero biases and an identity scorer, drawn in
/// canonical tensor order from a seeded ChaCha stream.
pub fn init_params(
    dims: FeatureDims,
    d: usize,
    hyper: Hyper,
    seed: u64,
) -> Result<ModelParams, ModelError> {
    if d == 0 {
        return Err(ModelError::InvalidDim);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Weights::zeros(dims, d);
    for (i, t) in NodeType::ALL.iter().enumerate() {
        let fan_in = dims.get(*t);
        w.proj[i] = Matrix::uniform(fan_in, d, xavier_bound(fan_in, d), &mut rng);
    }
    let bound = xavier_bound(d, d);
    for layer in &mut w.relation {
        for m in layer.iter_mut() {
            *m = Matrix::uniform(d, d, bound, &mut rng);
        }
    }
    for layer in &mut w.self_loop {
        for m in layer.iter_mut() {
            *m = Matrix::uniform(d, d, bound, &mut rng);
        }
    }
    w.scorer = Matrix::identity(d);
    Ok(ModelParams {
        weights: w,
        hyper,
        steps: 0,
    })
}
