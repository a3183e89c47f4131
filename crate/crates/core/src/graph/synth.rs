use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Edge, Graph, Masks};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

/// Stochastic block model parameters. Features are the one-hot block id
/// plus `N(0, noise²)` per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
    pub noise: f64,
}

impl SbmSpec {
    pub fn new(sizes: Vec<usize>, p_in: f64, p_out: f64, seed: u64) -> Self {
        Self {
            sizes,
            p_in,
            p_out,
            seed,
            noise: 0.5,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthSpec {
    /// Cycle on `n >= 3` nodes.
    Ring(usize),
    /// Two `k`-cliques joined by one bridge edge.
    Barbell(usize),
    Sbm(SbmSpec),
}

pub fn synth_graph(spec: &SynthSpec) -> Result<Graph> {
    match spec {
        SynthSpec::Ring(n) => ring(*n),
        SynthSpec::Barbell(k) => barbell(*k),
        SynthSpec::Sbm(s) => sbm(s),
    }
}

fn ring(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::invalid(format!("ring needs at least 3 nodes, got {n}")));
    }
    let edges = (0..n).map(|i| Edge::new(i, (i + 1) % n)).collect();
    Graph::new(Matrix::identity(n), edges, None, Masks::default())
}

fn barbell(k: usize) -> Result<Graph> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "barbell cliques need at least 2 nodes, got {k}"
        )));
    }
    let mut edges = Vec::new();
    for offset in [0, k] {
        for i in 0..k {
            for j in (i + 1)..k {
                edges.push(Edge::new(offset + i, offset + j));
            }
        }
    }
    edges.push(Edge::new(k - 1, k));
    let labels = (0..2 * k).map(|i| usize::from(i >= k)).collect();
    Graph::new(Matrix::identity(2 * k), edges, Some(labels), Masks::default())
}

fn sbm(spec: &SbmSpec) -> Result<Graph> {
    if spec.sizes.is_empty() || spec.sizes.contains(&0) {
        return Err(Error::invalid("sbm needs at least one non-empty block"));
    }
    for (name, p) in [("p_in", spec.p_in), ("p_out", spec.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("{name} = {p} is not a probability")));
        }
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::invalid(format!(
            "noise = {} must be finite and >= 0",
            spec.noise
        )));
    }
    let k = spec.sizes.len();
    let labels: Vec<usize> = spec
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut rng = rng_from_seed(spec.seed);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push(Edge::new(i, j));
            }
        }
    }

    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut features = Matrix::zeros(n, k);
    for i in 0..n {
        for c in 0..k {
            let base = if labels[i] == c { 1.0 } else { 0.0 };
            features[(i, c)] = base + normal.sample(&mut rng);
        }
    }

    Graph::new(features, edges, Some(labels.clone()), block_masks(&spec.sizes))
}

/// Per block, in index order: 40% train, 20% val, the rest test, with at
/// least one train node per block.
fn block_masks(sizes: &[usize]) -> Masks {
    let mut masks = Masks::default();
    let mut start = 0;
    for &s in sizes {
        let n_train = ((s as f64 * 0.4).round() as usize).clamp(1, s);
        let n_val = ((s as f64 * 0.2).round() as usize).min(s - n_train);
        masks.train.extend(start..start + n_train);
        masks.val.extend(start + n_train..start + n_train + n_val);
        masks.test.extend(start + n_train + n_val..start + s);
        start += s;
    }
    masks
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthSpec::Ring(n) => write!(f, "ring:{n}"),
            SynthSpec::Barbell(k) => write!(f, "barbell:{k}"),
            SynthSpec::Sbm(s) => {
                let sizes: Vec<String> = s.sizes.iter().map(ToString::to_string).collect();
                write!(
                    f,
                    "sbm:{}:{}:{}:{}:{}",
                    sizes.join(","),
                    s.p_in,
                    s.p_out,
                    s.seed,
                    s.noise
                )
            }
        }
    }
}

/// `ring:N`, `barbell:K`, or `sbm:SIZES:P_IN:P_OUT:SEED[:NOISE]` where
/// `SIZES` is comma-separated (`10,10`) or `BxS` (`2x10`).
impl FromStr for SynthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::invalid(format!("cannot parse synthetic graph spec {s:?}"));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let real = |t: &str| t.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["ring", n] => Ok(SynthSpec::Ring(num(n)?)),
            ["barbell", k] => Ok(SynthSpec::Barbell(num(k)?)),
            ["sbm", sizes, p_in, p_out, seed, rest @ ..] if rest.len() <= 1 => {
                let sizes = if let Some((b, sz)) = sizes.split_once('x') {
                    vec![num(sz)?; num(b)?]
                } else {
                    sizes.split(',').map(num).collect::<Result<_>>()?
                };
                let seed = seed.parse::<u64>().map_err(|_| bad())?;
                let mut spec = SbmSpec::new(sizes, real(p_in)?, real(p_out)?, seed);
                if let [noise] = rest {
                    spec.noise = real(noise)?;
                }
                Ok(SynthSpec::Sbm(spec))
            }
            _ => Err(bad()),
        }
    }
}
