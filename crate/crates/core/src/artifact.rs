//! Versioned binary serialization of fitted models and statistics.
//!
//! Every artifact starts with a 4-byte magic and a little-endian `u16`
//! format version; the body layout is described in `docs/artifact-format.md`.

use thiserror::Error;

use crate::bilstm::{BiLstmEncoder, LayerParams, LstmParams, Pooling, Standardizer};
use crate::features::{NeighborStats, PositionStats};
use crate::gbdt::{BinMapper, GbdtConfig, GbdtModel, Node, Tree};
use crate::imbalance::{ClassWeights, ThresholdSet};

pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ArtifactError {
    #[error("expected magic {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("unsupported artifact format version {0}")]
    UnsupportedVersion(u16),
    #[error("artifact truncated")]
    Truncated,
    #[error("invalid artifact content: {0}")]
    Invalid(String),
    #[error("{0} trailing bytes after artifact")]
    TrailingBytes(usize),
}

/// Little-endian output buffer.
#[derive(Debug, Default)]
pub struct Encoder {
    pub buf: Vec<u8>,
}

impl Encoder {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bool(&mut self, v: bool) {
        self.u8(u8::from(v));
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.len(v.len());
        v.iter().for_each(|x| self.f64(*x));
    }

    pub fn str(&mut self, s: &str) {
        self.len(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
}

/// Little-endian input cursor.
#[derive(Debug)]
pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Decoder { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        let end = self.pos.checked_add(n).ok_or(ArtifactError::Truncated)?;
        let s = self.data.get(self.pos..end).ok_or(ArtifactError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn u8(&mut self) -> Result<u8, ArtifactError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ArtifactError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, ArtifactError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A length prefix, checked against the bytes left so corrupt input
    /// cannot trigger huge allocations.
    pub fn len(&mut self, min_item_bytes: usize) -> Result<usize, ArtifactError> {
        let n = usize::try_from(self.u64()?).map_err(|_| ArtifactError::Truncated)?;
        if n.saturating_mul(min_item_bytes.max(1)) > self.remaining() && min_item_bytes > 0 {
            return Err(ArtifactError::Truncated);
        }
        Ok(n)
    }

    pub fn f64(&mut self) -> Result<f64, ArtifactError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bool(&mut self) -> Result<bool, ArtifactError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(ArtifactError::Invalid(format!("bool byte {b}"))),
        }
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, ArtifactError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn str(&mut self) -> Result<String, ArtifactError> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| ArtifactError::Invalid(e.to_string()))
    }
}

/// A value with a self-describing binary form.
pub trait Artifact: Sized {
    const MAGIC: [u8; 4];

    fn encode_body(&self, e: &mut Encoder);
    fn decode_body(d: &mut Decoder<'_>) -> Result<Self, ArtifactError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::default();
        e.buf.extend_from_slice(&Self::MAGIC);
        e.u16(FORMAT_VERSION);
        self.encode_body(&mut e);
        e.buf
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let mut d = Decoder::new(bytes);
        let magic = d.take(4).map_err(|_| ArtifactError::BadMagic {
            expected: Self::MAGIC,
            found: bytes.to_vec(),
        })?;
        if magic != Self::MAGIC {
            return Err(ArtifactError::BadMagic {
                expected: Self::MAGIC,
                found: magic.to_vec(),
            });
        }
        let version = d.u16()?;
        if version != FORMAT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(version));
        }
        let v = Self::decode_body(&mut d)?;
        match d.remaining() {
            0 => Ok(v),
            n => Err(ArtifactError::TrailingBytes(n)),
        }
    }
}

impl Artifact for ThresholdSet {
    const MAGIC: [u8; 4] = *b"LITH";

    fn encode_body(&self, e: &mut Encoder) {
        e.f64(self.left);
        e.f64(self.right);
    }

    fn decode_body(d: &mut Decoder<'_>) -> Result<Self, ArtifactError> {
        Ok(ThresholdSet {
            left: d.f64()?,
            right: d.f64()?,
        })
    }
}

impl Artifact for NeighborStats {
    const MAGIC: [u8; 4] = *b"LINS";

    fn encode_body(&self, e: &mut Encoder) {
        for p in &self.positions {
            match p {
                None => e.bool(false),
                Some(p) => {
                    e.bool(true);
                    e.len(p.count);
                    e.f64(p.mu);
                    e.f64(p.sigma);
                    e.f64(p.time_mu);
                    e.f64(p.time_sigma);
                }
            }
        }
    }

    fn decode_body(d: &mut Decoder<'_>) -> Result<Self, ArtifactError> {
        let mut s = NeighborStats::default();
        for slot in &mut s.positions {
            if d.bool()? {
                *slot = Some(PositionStats {
                    count: d.len(0)?,
                    mu: d.f64()?,
                    sigma: d.f64()?,
                    time_mu: d.f64()?,
                    time_sigma: d.f64()?,
                });
            }
        }
        Ok(s)
    }
}

fn encode_config(c: &GbdtConfig, e: &mut Encoder) {
    e.len(c.max_bins);
    e.len(c.max_leaves);
    e.len(c.max_depth);
    e.len(c.min_samples_leaf);
    e.f64(c.lambda);
    e.f64(c.gamma);
    e.f64(c.learning_rate);
    e.len(c.n_rounds);
    e.bool(c.goss);
    e.f64(c.goss_a);
    e.f64(c.goss_b);
    e.u64(c.seed);
}

fn decode_config(d: &mut Decoder<'_>) -> Result<GbdtConfig, ArtifactError> {
    Ok(GbdtConfig {
        max_bins: d.len(0)?,
        max_leaves: d.len(0)?,
        max_depth: d.len(0)?,
        min_samples_leaf: d.len(0)?,
        lambda: d.f64()?,
        gamma: d.f64()?,
        learning_rate: d.f64()?,
        n_rounds: d.len(0)?,
        goss: d.bool()?,
        goss_a: d.f64()?,
        goss_b: d.f64()?,
        seed: d.u64()?,
    })
}

fn encode_tree(t: &Tree, e: &mut Encoder) {
    e.len(t.nodes.len());
    for n in &t.nodes {
        match n {
            Node::Leaf { value } => {
                e.u8(0);
                e.f64(*value);
            }
            Node::Split {
                feature,
                bin,
                threshold,
                missing_left,
                left,
                right,
            } => {
                e.u8(1);
                e.u32(*feature as u32);
                e.u32(*bin as u32);
                e.f64(*threshold);
                e.bool(*missing_left);
                e.u32(*left as u32);
                e.u32(*right as u32);
            }
        }
    }
    e.f64s(&t.gains);
}

fn decode_tree(d: &mut Decoder<'_>, n_features: usize) -> Result<Tree, ArtifactError> {
    let n = d.len(9)?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        nodes.push(match d.u8()? {
            0 => Node::Leaf { value: d.f64()? },
            1 => Node::Split {
                feature: d.u32()? as usize,
                bin: d.u32()? as usize,
                threshold: d.f64()?,
                missing_left: d.bool()?,
                left: d.u32()? as usize,
                right: d.u32()? as usize,
            },
            t => return Err(ArtifactError::Invalid(format!("node tag {t}"))),
        });
    }
    for (i, node) in nodes.iter().enumerate() {
        if let Node::Split { feature, left, right, .. } = node {
            if *feature >= n_features || *left <= i || *right <= i || *left >= n || *right >= n {
                return Err(ArtifactError::Invalid(format!("malformed split at node {i}")));
            }
        }
    }
    if nodes.is_empty() {
        return Err(ArtifactError::Invalid("empty tree".into()));
    }
    Ok(Tree {
        nodes,
        gains: d.f64s()?,
    })
}

impl Artifact for GbdtModel {
    const MAGIC: [u8; 4] = *b"LIGB";

    fn encode_body(&self, e: &mut Encoder) {
        encode_config(&self.config, e);
        e.len(self.mapper.boundaries.len());
        for b in &self.mapper.boundaries {
            e.f64s(b);
        }
        self.base_scores.iter().for_each(|v| e.f64(*v));
        self.class_weights.0.iter().for_each(|v| e.f64(*v));
        e.len(self.trees.len());
        for round in &self.trees {
            e.len(round.len());
            round.iter().for_each(|t| encode_tree(t, e));
        }
        e.f64s(&self.loss_history);
    }

    fn decode_body(d: &mut Decoder<'_>) -> Result<Self, ArtifactError> {
        let config = decode_config(d)?;
        let nf = d.len(8)?;
        let boundaries = (0..nf).map(|_| d.f64s()).collect::<Result<Vec<_>, _>>()?;
        let mut base_scores = [0.0; 3];
        for v in &mut base_scores {
            *v = d.f64()?;
        }
        let mut w = [0.0; 3];
        for v in &mut w {
            *v = d.f64()?;
        }
        let rounds = d.len(8)?;
        let mut trees = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let k = d.len(8)?;
            if k != 3 {
                return Err(ArtifactError::Invalid(format!("{k} trees in a round")));
            }
            trees.push((0..k).map(|_| decode_tree(d, nf)).collect::<Result<Vec<_>, _>>()?);
        }
        Ok(GbdtModel {
            config,
            mapper: BinMapper { boundaries },
            base_scores,
            trees,
            class_weights: ClassWeights(w),
            loss_history: d.f64s()?,
        })
    }
}

fn encode_direction(p: &LstmParams, e: &mut Encoder) {
    e.f64s(&p.w);
    e.f64s(&p.u);
    e.f64s(&p.b);
}

fn decode_direction(d: &mut Decoder<'_>, d_in: usize, hidden: usize) -> Result<LstmParams, ArtifactError> {
    let p = LstmParams {
        d_in,
        hidden,
        w: d.f64s()?,
        u: d.f64s()?,
        b: d.f64s()?,
    };
    if p.w.len() != 4 * hidden * d_in || p.u.len() != 4 * hidden * hidden || p.b.len() != 4 * hidden {
        return Err(ArtifactError::Invalid("LSTM tensor shape".into()));
    }
    Ok(p)
}

impl Artifact for BiLstmEncoder {
    const MAGIC: [u8; 4] = *b"LIEN";

    fn encode_body(&self, e: &mut Encoder) {
        e.len(self.d_in);
        e.len(self.hidden);
        e.str(self.pooling.as_str());
        for layer in [&self.layer1, &self.layer2] {
            encode_direction(&layer.forward, e);
            encode_direction(&layer.backward, e);
        }
        e.f64s(&self.head_w);
        e.f64s(&self.head_b);
        e.f64s(&self.standardizer.mean);
        e.f64s(&self.standardizer.std);
    }

    fn decode_body(d: &mut Decoder<'_>) -> Result<Self, ArtifactError> {
        let d_in = d.len(0)?;
        let hidden = d.len(0)?;
        let pooling = d.str()?;
        let pooling =
            Pooling::parse(&pooling).ok_or_else(|| ArtifactError::Invalid(format!("pooling `{pooling}`")))?;
        let layer = |d: &mut Decoder<'_>, n_in| -> Result<LayerParams, ArtifactError> {
            Ok(LayerParams {
                forward: decode_direction(d, n_in, hidden)?,
                backward: decode_direction(d, n_in, hidden)?,
            })
        };
        let layer1 = layer(d, d_in)?;
        let layer2 = layer(d, 2 * hidden)?;
        let enc = BiLstmEncoder {
            d_in,
            hidden,
            layer1,
            layer2,
            pooling,
            head_w: d.f64s()?,
            head_b: d.f64s()?,
            standardizer: Standardizer {
                mean: d.f64s()?,
                std: d.f64s()?,
            },
        };
        if enc.head_w.len() != 6 * hidden
            || enc.head_b.len() != 3
            || enc.standardizer.mean.len() != d_in
            || enc.standardizer.std.len() != d_in
        {
            return Err(ArtifactError::Invalid("encoder head or standardizer shape".into()));
        }
        Ok(enc)
    }
}
