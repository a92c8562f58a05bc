//! Random boolean systems with known wiring.
//!
//! A system is a bipartite wiring: `m_src` source nodes firing independently
//! at fixed densities, and `m_dst` destination nodes, each a boolean function
//! of a small random subset of sources. The wiring is the ground truth that
//! the pairwise scores are later judged against.
//!
//! Generation is reproducible from `(master_seed, ordinal)` alone. One
//! counter-based generator seeded by the master seed runs on stream
//! `ordinal` to draw the structure; its first output becomes the system's own
//! sampling seed, from which source node `j` draws its trace on stream `j`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bitseries::BitSeries;
use crate::error::{Error, Result};

/// Upper bound on nodes per side; sizes are drawn uniformly from 1..=this.
pub const MAX_NODES_PER_SIDE: u32 = 50;

/// Binary boolean connective used inside destination functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
    Xor,
}

impl BoolOp {
    pub const ALL: [BoolOp; 3] = [BoolOp::And, BoolOp::Or, BoolOp::Xor];

    pub fn name(self) -> &'static str {
        match self {
            BoolOp::And => "and",
            BoolOp::Or => "or",
            BoolOp::Xor => "xor",
        }
    }

    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            BoolOp::And => a && b,
            BoolOp::Or => a || b,
            BoolOp::Xor => a != b,
        }
    }

    fn apply_words(self, a: u64, b: u64) -> u64 {
        match self {
            BoolOp::And => a & b,
            BoolOp::Or => a | b,
            BoolOp::Xor => a ^ b,
        }
    }
}

impl FromStr for BoolOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(BoolOp::And),
            "or" => Ok(BoolOp::Or),
            "xor" => Ok(BoolOp::Xor),
            _ => Err(Error::InvalidSystem(format!(
                "unknown operator {s:?}; expected and, or or xor"
            ))),
        }
    }
}

/// The five system families. Ordinal `i` gets family `i % 5`, in this order,
/// so any contiguous block of ordinals is balanced across families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemType {
    /// Every multi-input destination is a pure conjunction.
    And,
    /// Every multi-input destination is a pure disjunction.
    Or,
    /// Every multi-input destination is a parity of its inputs.
    Xor,
    /// Each destination picks one connective at random and folds with it.
    Mix,
    /// Each destination is a left-associated chain with an independently
    /// random connective at every step.
    Lha,
}

impl SystemType {
    pub const ALL: [SystemType; 5] = [
        SystemType::And,
        SystemType::Or,
        SystemType::Xor,
        SystemType::Mix,
        SystemType::Lha,
    ];

    pub fn from_ordinal(ordinal: u64) -> Self {
        Self::ALL[(ordinal % 5) as usize]
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemType::And => "AND",
            SystemType::Or => "OR",
            SystemType::Xor => "XOR",
            SystemType::Mix => "MIX",
            SystemType::Lha => "LHA",
        }
    }
}

impl fmt::Display for SystemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AND" => Ok(SystemType::And),
            "OR" => Ok(SystemType::Or),
            "XOR" => Ok(SystemType::Xor),
            "MIX" => Ok(SystemType::Mix),
            "LHA" => Ok(SystemType::Lha),
            _ => Err(Error::InvalidSystem(format!(
                "unknown system type {s:?}; expected AND, OR, XOR, MIX or LHA"
            ))),
        }
    }
}

/// How a destination combines its inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeOps {
    /// Single input, passed through unchanged.
    Identity,
    /// One connective folded across all inputs.
    Fold(BoolOp),
    /// One connective per step, applied left to right:
    /// `((x1 op1 x2) op2 x3) ...`. Holds exactly `inputs - 1` connectives.
    Chain(Vec<BoolOp>),
}

/// One destination node: which sources feed it and how they combine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeFunction {
    /// Distinct source indices, stored ascending.
    pub inputs: Vec<u32>,
    pub ops: NodeOps,
}

impl NodeFunction {
    /// Evaluate at one sample, given the bits of every source node.
    pub fn eval(&self, src_bits: &[bool]) -> bool {
        let mut acc = src_bits[self.inputs[0] as usize];
        match &self.ops {
            NodeOps::Identity => {}
            NodeOps::Fold(op) => {
                for &i in &self.inputs[1..] {
                    acc = op.apply(acc, src_bits[i as usize]);
                }
            }
            NodeOps::Chain(ops) => {
                for (op, &i) in ops.iter().zip(&self.inputs[1..]) {
                    acc = op.apply(acc, src_bits[i as usize]);
                }
            }
        }
        acc
    }

    /// Evaluate across the whole trace, 64 samples per word operation.
    /// Source pad bits are zero and every connective maps (0,0) to 0, so the
    /// result's pad bits stay zero.
    fn eval_words(&self, src: &[BitSeries], n: usize) -> BitSeries {
        let mut words = src[self.inputs[0] as usize].words().to_vec();
        match &self.ops {
            NodeOps::Identity => {}
            NodeOps::Fold(op) => {
                for &i in &self.inputs[1..] {
                    for (acc, &w) in words.iter_mut().zip(src[i as usize].words()) {
                        *acc = op.apply_words(*acc, w);
                    }
                }
            }
            NodeOps::Chain(ops) => {
                for (op, &i) in ops.iter().zip(&self.inputs[1..]) {
                    for (acc, &w) in words.iter_mut().zip(src[i as usize].words()) {
                        *acc = op.apply_words(*acc, w);
                    }
                }
            }
        }
        BitSeries::from_words(words, n)
    }
}

/// Complete description of one generated system. Everything needed to
/// regenerate its traces and its ground-truth wiring.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    /// Position in the experiment's sequence; also selects the family.
    pub ordinal: u64,
    pub system_type: SystemType,
    pub m_src: u32,
    pub m_dst: u32,
    /// Firing probability of each source node, in the open interval (0,1).
    pub densities: Vec<f64>,
    pub dsts: Vec<NodeFunction>,
    /// Seed of the sampling generator; source node `j` uses stream `j`.
    pub seed: u64,
}

impl SystemSpec {
    /// Total node count, sources then destinations.
    pub fn node_count(&self) -> usize {
        self.m_src as usize + self.m_dst as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSystem(msg));
        if self.m_src < 1 || self.m_src > MAX_NODES_PER_SIDE {
            return fail(format!("m_src = {} outside 1..={MAX_NODES_PER_SIDE}", self.m_src));
        }
        if self.m_dst < 1 || self.m_dst > MAX_NODES_PER_SIDE {
            return fail(format!("m_dst = {} outside 1..={MAX_NODES_PER_SIDE}", self.m_dst));
        }
        if self.densities.len() != self.m_src as usize {
            return fail(format!(
                "{} densities for {} source nodes",
                self.densities.len(),
                self.m_src
            ));
        }
        for (j, &d) in self.densities.iter().enumerate() {
            if !(d > 0.0 && d < 1.0) {
                return fail(format!("density[{j}] = {d} outside the open interval (0,1)"));
            }
        }
        if self.dsts.len() != self.m_dst as usize {
            return fail(format!(
                "{} destination functions for m_dst = {}",
                self.dsts.len(),
                self.m_dst
            ));
        }
        for (d, dst) in self.dsts.iter().enumerate() {
            if dst.inputs.is_empty() {
                return fail(format!("dst {d} has no inputs"));
            }
            if !dst.inputs.windows(2).all(|w| w[0] < w[1]) {
                return fail(format!("dst {d} inputs must be strictly ascending"));
            }
            if *dst.inputs.last().unwrap() >= self.m_src {
                return fail(format!("dst {d} references a source beyond m_src"));
            }
            match (&dst.ops, dst.inputs.len()) {
                (NodeOps::Identity, 1) => {}
                (NodeOps::Identity, _) => {
                    return fail(format!("dst {d} has several inputs but no operator"))
                }
                (_, 1) => {
                    return fail(format!("dst {d} has one input and must be an identity"))
                }
                (NodeOps::Fold(_), _) => {}
                (NodeOps::Chain(ops), k) => {
                    if ops.len() != k - 1 {
                        return fail(format!(
                            "dst {d} chain has {} operators for {k} inputs",
                            ops.len()
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One draw from the arcsine density on (0,1), the stationary density of
/// logistic-style dynamics that piles mass near both ends. Inverse CDF
/// transform of a uniform draw; redraws the rare endpoint hits so the result
/// is strictly interior.
pub fn arcsine_draw(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        let x = (std::f64::consts::FRAC_PI_2 * u).sin().powi(2);
        if x > 0.0 && x < 1.0 {
            return x;
        }
    }
}

/// Raw standard lognormal draw, `exp(z)` with `z ~ N(0,1)`.
pub fn lognormal_raw(rng: &mut impl Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z.exp()
}

/// Fan-in from a raw lognormal value: round to the nearest integer, then
/// clamp into `[1, m_src]`.
pub fn fanin_from_raw(raw: f64, m_src: u32) -> u32 {
    (raw.round() as i64).clamp(1, m_src as i64) as u32
}

fn random_op(rng: &mut impl Rng) -> BoolOp {
    BoolOp::ALL[rng.random_range(0..BoolOp::ALL.len())]
}

/// Draw the complete structure of system `ordinal` under `master_seed`.
pub fn draw_system(master_seed: u64, ordinal: u64) -> SystemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(ordinal);
    let seed = rng.next_u64();
    let m_src = rng.random_range(1..=MAX_NODES_PER_SIDE);
    let m_dst = rng.random_range(1..=MAX_NODES_PER_SIDE);
    let densities: Vec<f64> = (0..m_src).map(|_| arcsine_draw(&mut rng)).collect();
    let system_type = SystemType::from_ordinal(ordinal);
    let dsts: Vec<NodeFunction> = (0..m_dst)
        .map(|_| {
            let k = fanin_from_raw(lognormal_raw(&mut rng), m_src);
            let mut inputs: Vec<u32> = rand::seq::index::sample(&mut rng, m_src as usize, k as usize)
                .iter()
                .map(|i| i as u32)
                .collect();
            inputs.sort_unstable();
            let ops = if k == 1 {
                NodeOps::Identity
            } else {
                match system_type {
                    SystemType::And => NodeOps::Fold(BoolOp::And),
                    SystemType::Or => NodeOps::Fold(BoolOp::Or),
                    SystemType::Xor => NodeOps::Fold(BoolOp::Xor),
                    SystemType::Mix => NodeOps::Fold(random_op(&mut rng)),
                    SystemType::Lha => {
                        NodeOps::Chain((1..k).map(|_| random_op(&mut rng)).collect())
                    }
                }
            };
            NodeFunction { inputs, ops }
        })
        .collect();
    SystemSpec {
        ordinal,
        system_type,
        m_src,
        m_dst,
        densities,
        dsts,
        seed,
    }
}

/// Sample `n` time steps of every node. Returns `m_src + m_dst` traces,
/// sources first, all of length `n`, fully determined by `spec.seed`.
pub fn sample_traces(spec: &SystemSpec, n: usize) -> Result<Vec<BitSeries>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::NoSamples);
    }
    let mut src = Vec::with_capacity(spec.m_src as usize);
    for j in 0..spec.m_src {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(j as u64);
        let d = spec.densities[j as usize];
        src.push(BitSeries::from_fn(n, |_| rng.random_bool(d)));
    }
    let mut traces = src;
    for dst in &spec.dsts {
        traces.push(dst.eval_words(&traces[..spec.m_src as usize], n));
    }
    Ok(traces)
}

/// Ground-truth wiring as a symmetric boolean relation over all nodes.
/// `get(i, j)` is true exactly when one of the pair is a source feeding the
/// other destination; source-source and destination-destination pairs are
/// never linked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownAdjacency {
    dim: usize,
    linked: Vec<bool>,
}

impl KnownAdjacency {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i != j, "the diagonal is excluded from the adjacency");
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.linked[i * self.dim + j]
    }
}

pub fn known_adjacency(spec: &SystemSpec) -> KnownAdjacency {
    let dim = spec.node_count();
    let mut linked = vec![false; dim * dim];
    for (d, dst) in spec.dsts.iter().enumerate() {
        let di = spec.m_src as usize + d;
        for &s in &dst.inputs {
            linked[s as usize * dim + di] = true;
            linked[di * dim + s as usize] = true;
        }
    }
    KnownAdjacency { dim, linked }
}

// ---------------------------------------------------------------------------
// Spec files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    ordinal: u64,
    #[serde(rename = "type")]
    system_type: String,
    seed: u64,
    m_src: u32,
    m_dst: u32,
    densities: Vec<f64>,
    #[serde(rename = "dst", default)]
    dsts: Vec<DstDoc>,
}

#[derive(Serialize, Deserialize)]
struct DstDoc {
    inputs: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ops: Option<Vec<String>>,
}

impl From<&SystemSpec> for SpecDoc {
    fn from(spec: &SystemSpec) -> Self {
        SpecDoc {
            ordinal: spec.ordinal,
            system_type: spec.system_type.name().to_string(),
            seed: spec.seed,
            m_src: spec.m_src,
            m_dst: spec.m_dst,
            densities: spec.densities.clone(),
            dsts: spec
                .dsts
                .iter()
                .map(|d| match &d.ops {
                    NodeOps::Identity => DstDoc {
                        inputs: d.inputs.clone(),
                        op: None,
                        ops: None,
                    },
                    NodeOps::Fold(op) => DstDoc {
                        inputs: d.inputs.clone(),
                        op: Some(op.name().to_string()),
                        ops: None,
                    },
                    NodeOps::Chain(ops) => DstDoc {
                        inputs: d.inputs.clone(),
                        op: None,
                        ops: Some(ops.iter().map(|o| o.name().to_string()).collect()),
                    },
                })
                .collect(),
        }
    }
}

impl TryFrom<SpecDoc> for SystemSpec {
    type Error = Error;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        let mut dsts = Vec::with_capacity(doc.dsts.len());
        for (d, dst) in doc.dsts.into_iter().enumerate() {
            let ops = match (dst.op, dst.ops) {
                (None, None) => NodeOps::Identity,
                (Some(op), None) => NodeOps::Fold(op.parse()?),
                (None, Some(ops)) => NodeOps::Chain(
                    ops.iter()
                        .map(|o| o.parse())
                        .collect::<Result<Vec<BoolOp>>>()?,
                ),
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidSystem(format!(
                        "dst {d} sets both op and ops"
                    )))
                }
            };
            dsts.push(NodeFunction {
                inputs: dst.inputs,
                ops,
            });
        }
        let spec = SystemSpec {
            ordinal: doc.ordinal,
            system_type: doc.system_type.parse()?,
            m_src: doc.m_src,
            m_dst: doc.m_dst,
            densities: doc.densities,
            dsts,
            seed: doc.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Write a system description as TOML.
pub fn write_spec(path: &Path, spec: &SystemSpec) -> Result<()> {
    spec.validate()?;
    let doc = SpecDoc::from(spec);
    let text = toml::to_string_pretty(&doc).expect("system document serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read and validate a system description written by [`write_spec`].
pub fn read_spec(path: &Path) -> Result<SystemSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SpecDoc =
        toml::from_str(&text).map_err(|e| Error::parse_file(path, e.to_string()))?;
    SystemSpec::try_from(doc)
}
