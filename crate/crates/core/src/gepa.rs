//! General edge-perturbing attack.
//!
//! A trainable matrix `H` (initialized to the clean adjacency `A`) is pushed
//! through a frozen copy of a semi-GCN. Target rows and columns are pinned to
//! `A`, so a target's own edges never change; the attack works through the
//! rest of the graph.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edges_from_adjacency, Graph};
use crate::matrix::Matrix;
use crate::model::{Propagation, SemiGcnModel};
use crate::nn::{one_hot, Optimizer, Tape, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    #[default]
    Single,
    Multi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub targets: Vec<usize>,
    pub desired_labels: Vec<usize>,
    pub mode: AttackMode,
    /// Weight of the direct target-row penalty (multi mode only).
    pub theta: f64,
    pub reg_weight: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Recorded with the result; the optimizer itself draws no randomness.
    pub seed: u64,
    /// Propagation used by the surrogate. `None` copies the target model's.
    pub surrogate_propagation: Option<Propagation>,
    /// Feed the hard 0/1 matrix forward during training (straight-through
    /// gradient) instead of the relaxed one.
    pub binarize_in_loop: bool,
    /// Maximum number of edge flips the greedy repair may add.
    pub flip_budget: usize,
    /// Number of candidate pairs the greedy repair considers.
    pub candidate_pool: usize,
}

impl AttackSpec {
    pub fn single(target: usize, desired: usize) -> Self {
        Self {
            targets: vec![target],
            desired_labels: vec![desired],
            mode: AttackMode::Single,
            theta: 1.0,
            reg_weight: 0.05,
            epochs: 300,
            lr: 0.01,
            seed: 0,
            surrogate_propagation: None,
            binarize_in_loop: false,
            flip_budget: 20,
            candidate_pool: 256,
        }
    }

    pub fn multi(targets: Vec<usize>, desired_labels: Vec<usize>) -> Self {
        Self {
            targets,
            desired_labels,
            mode: AttackMode::Multi,
            ..Self::single(0, 0)
        }
    }

    fn validate(&self, n: usize, n_classes: usize) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::invalid("attack needs at least one target"));
        }
        if self.targets.len() != self.desired_labels.len() {
            return Err(Error::invalid(format!(
                "{} targets but {} desired labels",
                self.targets.len(),
                self.desired_labels.len()
            )));
        }
        if self.mode == AttackMode::Single && self.targets.len() != 1 {
            return Err(Error::invalid("single mode takes exactly one target"));
        }
        let mut seen = BTreeSet::new();
        for &t in &self.targets {
            if t >= n {
                return Err(Error::OutOfRange { index: t, len: n });
            }
            if !seen.insert(t) {
                return Err(Error::invalid(format!("target {t} listed twice")));
            }
        }
        if let Some(&c) = self.desired_labels.iter().find(|&&c| c >= n_classes) {
            return Err(Error::OutOfRange {
                index: c,
                len: n_classes,
            });
        }
        if !(self.theta >= 0.0 && self.reg_weight >= 0.0) {
            return Err(Error::invalid("theta and reg_weight must be non-negative"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        Ok(())
    }
}

/// `H + Hᵀ`.
pub fn symmetrize(h: &Matrix) -> Result<Matrix> {
    if h.rows() != h.cols() {
        return Err(Error::Shape {
            op: "symmetrize",
            left: h.shape(),
            right: (h.cols(), h.rows()),
        });
    }
    h.add(&h.transpose())
}

/// Replaces each target row of `h_prime` with the matching row of `a`.
pub fn freeze_target_rows(h_prime: &Matrix, a: &Matrix, targets: &[usize]) -> Result<Matrix> {
    if h_prime.shape() != a.shape() {
        return Err(Error::Shape {
            op: "freeze_target_rows",
            left: h_prime.shape(),
            right: a.shape(),
        });
    }
    let mut out = h_prime.clone();
    for &k in targets {
        if k >= a.rows() {
            return Err(Error::OutOfRange {
                index: k,
                len: a.rows(),
            });
        }
        out.row_mut(k).copy_from_slice(a.row(k));
    }
    Ok(out)
}

/// `Sum(A - H'_κ ⊙ Ā)`.
pub fn concealment_reg(a: &Matrix, h_frozen: &Matrix, complete: &Matrix) -> Result<f64> {
    Ok(a.sub(&h_frozen.hadamard(complete)?)?.sum())
}

/// `Sum(A - H'_κ ⊙ Ā) + ϑ Σ_κ Sum(h_κ)`, where `h_κ` are rows of the
/// unsymmetrized `H`.
pub fn multi_target_reg(
    a: &Matrix,
    h: &Matrix,
    h_frozen: &Matrix,
    complete: &Matrix,
    targets: &[usize],
    theta: f64,
) -> Result<f64> {
    let base = concealment_reg(a, h_frozen, complete)?;
    let mut direct = 0.0;
    for &k in targets {
        if k >= h.rows() {
            return Err(Error::OutOfRange {
                index: k,
                len: h.rows(),
            });
        }
        direct += h.row(k).iter().sum::<f64>();
    }
    Ok(base + theta * direct)
}

/// `1` where `A < O`, `0` where `A >= O`.
pub fn binarize(o: &Matrix, a: &Matrix) -> Result<Matrix> {
    o.zip_map(a, "binarize", |o, a| if a < o { 1.0 } else { 0.0 })
}

/// [`binarize`] on a tape with an identity backward pass.
pub fn binarize_on_tape(tape: &mut Tape, o: Var, a: &Matrix) -> Result<Var> {
    let hard = binarize(tape.value(o), a)?;
    tape.straight_through(o, hard)
}

/// Initial perturbation matrix and its trainable entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub h: Matrix,
    /// `1` for trainable entries.
    pub trainable: Matrix,
    /// Single mode: shapes of the four trainable blocks around the target
    /// (upper-left, upper-right, lower-left, lower-right).
    pub blocks: Option<[(usize, usize); 4]>,
}

impl Perturbation {
    pub fn trainable_count(&self) -> usize {
        self.trainable.as_slice().iter().filter(|&&m| m != 0.0).count()
    }
}

pub fn init_perturbation(a: &Matrix, mode: AttackMode, target: Option<usize>) -> Result<Perturbation> {
    let n = a.rows();
    match mode {
        AttackMode::Multi => Ok(Perturbation {
            h: a.clone(),
            trainable: Matrix::ones(n, n),
            blocks: None,
        }),
        AttackMode::Single => {
            let k = target.ok_or_else(|| Error::invalid("single mode needs a target"))?;
            if k >= n {
                return Err(Error::OutOfRange { index: k, len: n });
            }
            let mut trainable = Matrix::ones(n, n);
            for i in 0..n {
                trainable[(k, i)] = 0.0;
                trainable[(i, k)] = 0.0;
            }
            let rest = n - k - 1;
            Ok(Perturbation {
                h: a.clone(),
                trainable,
                blocks: Some([(k, k), (k, rest), (rest, k), (rest, rest)]),
            })
        }
    }
}

/// Everything the attack objective needs, fixed for one run.
#[derive(Clone, Debug)]
pub struct AttackProblem {
    a: Arc<Matrix>,
    features: Arc<Matrix>,
    w1: Arc<Matrix>,
    w2: Arc<Matrix>,
    propagation: Propagation,
    target_propagation: Propagation,
    /// `1` where `H` is optimized; everything else is pinned to `A`.
    trainable: Matrix,
    /// `1` on target rows, target columns and the diagonal of `H'`.
    pinned: Matrix,
    targets: Vec<usize>,
    desired: Vec<usize>,
    others: Vec<usize>,
    target_onehot: Matrix,
    other_onehot: Matrix,
    clean_pred: Vec<usize>,
    mode: AttackMode,
    theta: f64,
    reg_weight: f64,
    binarize_in_loop: bool,
}

impl AttackProblem {
    pub fn new(model: &SemiGcnModel, g: &Graph, spec: &AttackSpec) -> Result<Self> {
        let n = g.n_nodes();
        spec.validate(n, model.n_classes())?;
        let a = g.adjacency();
        let features = g.features().clone();
        let clean_pred = model.predict(&a, &features)?;
        for (&t, &d) in spec.targets.iter().zip(&spec.desired_labels) {
            if clean_pred[t] == d {
                return Err(Error::precondition(format!(
                    "node {t} is already predicted as class {d}"
                )));
            }
        }

        let pert = init_perturbation(&a, spec.mode, spec.targets.first().copied())?;
        let mut trainable = pert.trainable;
        let mut pinned = Matrix::zeros(n, n);
        for i in 0..n {
            trainable[(i, i)] = 0.0;
            pinned[(i, i)] = 1.0;
        }
        for &k in &spec.targets {
            for i in 0..n {
                trainable[(k, i)] = 0.0;
                trainable[(i, k)] = 0.0;
                pinned[(k, i)] = 1.0;
                pinned[(i, k)] = 1.0;
            }
        }
        if trainable.as_slice().iter().all(|&m| m == 0.0) {
            return Err(Error::precondition("perturbation has no trainable entries"));
        }

        let target_set: BTreeSet<usize> = spec.targets.iter().copied().collect();
        let others: Vec<usize> = (0..n).filter(|i| !target_set.contains(i)).collect();
        let ic = model.n_classes();
        Ok(Self {
            target_onehot: one_hot(&spec.desired_labels, ic)?,
            other_onehot: one_hot(&others.iter().map(|&i| clean_pred[i]).collect::<Vec<_>>(), ic)?,
            a: Arc::new(a),
            features: Arc::new(features),
            w1: Arc::new(model.w1.clone()),
            w2: Arc::new(model.w2.clone()),
            propagation: spec.surrogate_propagation.unwrap_or(model.propagation),
            target_propagation: model.propagation,
            trainable,
            pinned,
            targets: spec.targets.clone(),
            desired: spec.desired_labels.clone(),
            others,
            clean_pred,
            mode: spec.mode,
            theta: spec.theta,
            reg_weight: spec.reg_weight,
            binarize_in_loop: spec.binarize_in_loop,
        })
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.a
    }

    pub fn clean_predictions(&self) -> &[usize] {
        &self.clean_pred
    }

    pub fn trainable(&self) -> &Matrix {
        &self.trainable
    }

    /// The relaxed matrix fed to the surrogate: `½(H + Hᵀ)` with target rows,
    /// target columns and the diagonal taken from `A`.
    pub fn relaxed(&self, h: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let hv = tape.constant(h.clone())?;
        let hp = self.relaxed_on_tape(&mut tape, hv)?;
        Ok(tape.value(hp).clone())
    }

    fn relaxed_on_tape(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let fixed = self.trainable.map(|m| if m == 0.0 { 1.0 } else { 0.0 });
        let h = tape.overwrite(h, &fixed, &self.a)?;
        let ht = tape.transpose(h)?;
        let s = tape.add(h, ht)?;
        let s = tape.scale(s, 0.5)?;
        tape.overwrite(s, &self.pinned, &self.a)
    }

    /// Total attack loss for `H`. Returns `(loss, surrogate probabilities)`.
    ///
    /// Loss = mean CE of targets against their desired labels + mean CE of the
    /// other nodes against their clean predictions + `reg_weight · Σ|A - H'|`,
    /// plus `ϑ Σ_κ Σ_j |H_κj - A_κj|` in multi mode.
    pub fn objective_on_tape(&self, tape: &mut Tape, h: Var) -> Result<(Var, Var)> {
        let mut hp = self.relaxed_on_tape(tape, h)?;
        if self.binarize_in_loop {
            let o = tape.value(hp).map(|x| x - 0.5).add(&self.a)?;
            let hard = binarize(&o, &self.a)?;
            hp = tape.straight_through(hp, hard)?;
        }
        let p = self.propagation.on_tape(tape, hp)?;
        let f = tape.constant_shared(self.features.clone())?;
        let w1 = tape.constant_shared(self.w1.clone())?;
        let w2 = tape.constant_shared(self.w2.clone())?;
        let probs = SemiGcnModel::forward_on_tape(tape, p, f, w1, w2)?;

        let tp = tape.select_rows(probs, &self.targets)?;
        let ce_t = tape.cross_entropy(tp, &self.target_onehot)?;
        let mut loss = tape.scale(ce_t, 1.0 / self.targets.len() as f64)?;
        if !self.others.is_empty() {
            let op = tape.select_rows(probs, &self.others)?;
            let ce_o = tape.cross_entropy(op, &self.other_onehot)?;
            let ce_o = tape.scale(ce_o, 1.0 / self.others.len() as f64)?;
            loss = tape.add(loss, ce_o)?;
        }

        let a = tape.constant_shared(self.a.clone())?;
        let dev = tape.sub(a, hp)?;
        let dev = tape.abs(dev)?;
        let dev = tape.sum(dev)?;
        let reg = tape.scale(dev, self.reg_weight)?;
        loss = tape.add(loss, reg)?;

        if self.mode == AttackMode::Multi && self.theta > 0.0 {
            let hk = tape.select_rows(h, &self.targets)?;
            let ak = tape.constant(self.a.select_rows(&self.targets))?;
            let d = tape.sub(hk, ak)?;
            let d = tape.abs(d)?;
            let d = tape.sum(d)?;
            let d = tape.scale(d, self.theta)?;
            loss = tape.add(loss, d)?;
        }
        Ok((loss, probs))
    }

    pub fn objective(&self, h: &Matrix) -> Result<f64> {
        let mut tape = Tape::new();
        let hv = tape.param(h.clone())?;
        let (loss, _) = self.objective_on_tape(&mut tape, hv)?;
        Ok(tape.scalar(loss))
    }

    /// Class probabilities of the target model on a binary adjacency.
    pub fn probabilities(&self, a_hat: &Matrix) -> Result<Matrix> {
        let p = self.target_propagation.apply(a_hat)?;
        let model = SemiGcnModel {
            w1: (*self.w1).clone(),
            w2: (*self.w2).clone(),
            propagation: self.target_propagation,
        };
        model.forward(&p, &self.features)
    }

    fn outcome(&self, a_hat: &Matrix) -> Result<(Vec<bool>, f64)> {
        let probs = self.probabilities(a_hat)?;
        let success = self
            .targets
            .iter()
            .zip(&self.desired)
            .map(|(&t, &d)| {
                let row = probs.row(t);
                row.iter().enumerate().all(|(c, &p)| c == d || row[d] > p)
            })
            .collect();
        let margin = self
            .targets
            .iter()
            .zip(&self.desired)
            .map(|(&t, &d)| {
                let row = probs.row(t);
                let best_other = row
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| *c != d)
                    .fold(f64::NEG_INFINITY, |m, (_, &p)| m.max(p));
                row[d] - best_other
            })
            .fold(f64::INFINITY, f64::min);
        Ok((success, margin))
    }

    fn retention(&self, a_hat: &Matrix) -> Result<f64> {
        if self.others.is_empty() {
            return Ok(1.0);
        }
        let pred = self.probabilities(a_hat)?.argmax_rows();
        let kept = self.others.iter().filter(|&&i| pred[i] == self.clean_pred[i]).count();
        Ok(kept as f64 / self.others.len() as f64)
    }

    /// Upper-triangle pairs that may be flipped.
    fn flippable_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.a.rows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.pinned[(i, j)] == 0.0 && (self.trainable[(i, j)] != 0.0 || self.trainable[(j, i)] != 0.0) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// How the emitted adjacency was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decode {
    /// Thresholding the relaxed matrix succeeded.
    Threshold,
    /// Greedy flips on top of the thresholded matrix.
    Greedy,
}

#[derive(Clone, Debug)]
pub struct AttackResult {
    pub h: Matrix,
    pub h_prime: Matrix,
    pub a_hat: Matrix,
    pub targets: Vec<usize>,
    pub desired_labels: Vec<usize>,
    pub edits_added: Vec<(usize, usize)>,
    pub edits_removed: Vec<(usize, usize)>,
    pub success: Vec<bool>,
    pub perturbation_count: usize,
    /// Fraction of non-target nodes whose prediction under `Â` matches the clean one.
    pub retention: f64,
    pub decode: Decode,
    /// Attack loss before each optimizer step.
    pub loss_trace: Vec<f64>,
}

/// Serializable summary of an attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub targets: Vec<usize>,
    pub desired_labels: Vec<usize>,
    pub success: Vec<bool>,
    pub perturbation_count: usize,
    pub edits_added: Vec<(usize, usize)>,
    pub edits_removed: Vec<(usize, usize)>,
    pub retention: f64,
    pub decode: Decode,
}

impl AttackResult {
    pub fn all_succeeded(&self) -> bool {
        self.success.iter().all(|&s| s)
    }

    pub fn report(&self) -> AttackReport {
        AttackReport {
            targets: self.targets.clone(),
            desired_labels: self.desired_labels.clone(),
            success: self.success.clone(),
            perturbation_count: self.perturbation_count,
            edits_added: self.edits_added.clone(),
            edits_removed: self.edits_removed.clone(),
            retention: self.retention,
            decode: self.decode,
        }
    }
}

type EdgeList = Vec<(usize, usize)>;

fn diff_edges(a: &Matrix, a_hat: &Matrix) -> (EdgeList, EdgeList) {
    let (mut added, mut removed) = (Vec::new(), Vec::new());
    for i in 0..a.rows() {
        for j in (i + 1)..a.cols() {
            let (before, after) = (a[(i, j)] != 0.0, a_hat[(i, j)] != 0.0);
            match (before, after) {
                (false, true) => added.push((i, j)),
                (true, false) => removed.push((i, j)),
                _ => {}
            }
        }
    }
    (added, removed)
}

fn flip(m: &mut Matrix, (i, j): (usize, usize)) {
    let v = if m[(i, j)] != 0.0 { 0.0 } else { 1.0 };
    m[(i, j)] = v;
    m[(j, i)] = v;
}

/// Runs the attack against a frozen target model.
pub fn run_attack(model: &SemiGcnModel, g: &Graph, spec: &AttackSpec) -> Result<AttackResult> {
    let problem = AttackProblem::new(model, g, spec)?;
    let a = problem.adjacency().clone();
    let binary = a.as_slice().iter().all(|&x| x == 0.0 || x == 1.0);
    if !binary {
        return Err(Error::precondition("attack expects an unweighted adjacency"));
    }

    let mut h = a.clone();
    let mut opt = Optimizer::new(crate::nn::Algorithm::Adam, spec.lr);
    let mut loss_trace = Vec::with_capacity(spec.epochs);
    for _ in 0..spec.epochs {
        let mut tape = Tape::new();
        let hv = tape.param(h.clone())?;
        let (loss, _) = problem.objective_on_tape(&mut tape, hv)?;
        tape.backward(loss)?;
        loss_trace.push(tape.scalar(loss));
        let grad = tape.grad_or_zeros(hv).hadamard(problem.trainable())?;
        opt.step(&mut [&mut h], &[&grad])?;
        for x in h.as_mut_slice() {
            *x = x.clamp(0.0, 1.0);
        }
    }

    let h_prime = problem.relaxed(&h)?;
    let o = h_prime.add(&a)?.map(|x| x - 0.5);
    let mut a_hat = binarize(&o, &a)?;
    let (mut success, _) = problem.outcome(&a_hat)?;
    let mut decode = Decode::Threshold;

    if !success.iter().all(|&s| s) {
        decode = Decode::Greedy;
        // Flip the pairs the relaxation moved furthest, one at a time, always
        // taking the largest target margin.
        let mut pool = problem.flippable_pairs();
        pool.sort_by(|&(i, j), &(k, l)| {
            let di = (h_prime[(i, j)] - a[(i, j)]).abs();
            let dk = (h_prime[(k, l)] - a[(k, l)]).abs();
            dk.total_cmp(&di)
        });
        pool.truncate(spec.candidate_pool);
        let mut used = vec![false; pool.len()];
        for _ in 0..spec.flip_budget {
            let mut best: Option<(usize, f64)> = None;
            for (c, &pair) in pool.iter().enumerate() {
                if used[c] {
                    continue;
                }
                flip(&mut a_hat, pair);
                let (_, margin) = problem.outcome(&a_hat)?;
                flip(&mut a_hat, pair);
                if best.is_none_or(|(_, m)| margin > m) {
                    best = Some((c, margin));
                }
            }
            let Some((c, _)) = best else { break };
            used[c] = true;
            flip(&mut a_hat, pool[c]);
            success = problem.outcome(&a_hat)?.0;
            if success.iter().all(|&s| s) {
                break;
            }
        }
    }

    if success.iter().all(|&s| s) {
        prune(&problem, &a, &h_prime, &mut a_hat)?;
        success = problem.outcome(&a_hat)?.0;
    }

    let (edits_added, edits_removed) = diff_edges(&a, &a_hat);
    Ok(AttackResult {
        retention: problem.retention(&a_hat)?,
        perturbation_count: edits_added.len() + edits_removed.len(),
        h,
        h_prime,
        a_hat,
        targets: spec.targets.clone(),
        desired_labels: spec.desired_labels.clone(),
        edits_added,
        edits_removed,
        success,
        decode,
        loss_trace,
    })
}

/// Reverts edits that are not needed for success, weakest first.
fn prune(problem: &AttackProblem, a: &Matrix, h_prime: &Matrix, a_hat: &mut Matrix) -> Result<()> {
    const MAX_PRUNE: usize = 512;
    let (added, removed) = diff_edges(a, a_hat);
    let mut edits: Vec<(usize, usize)> = added.into_iter().chain(removed).collect();
    if edits.len() > MAX_PRUNE {
        return Ok(());
    }
    edits.sort_by(|&(i, j), &(k, l)| {
        let di = (h_prime[(i, j)] - a[(i, j)]).abs();
        let dk = (h_prime[(k, l)] - a[(k, l)]).abs();
        di.total_cmp(&dk)
    });
    for pair in edits {
        flip(a_hat, pair);
        if !problem.outcome(a_hat)?.0.iter().all(|&s| s) {
            flip(a_hat, pair);
        }
    }
    Ok(())
}

/// The victim graph: clean features and labels with the attacked edge set.
pub fn extract_victim_graph(result: &AttackResult, g: &Graph) -> Result<Graph> {
    if result.a_hat.rows() != g.n_nodes() {
        return Err(Error::Shape {
            op: "extract_victim_graph",
            left: result.a_hat.shape(),
            right: (g.n_nodes(), g.n_nodes()),
        });
    }
    g.with_edges(edges_from_adjacency(&result.a_hat))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    /// `clean[d]` = number of nodes with degree `d` in the clean graph.
    pub clean: Vec<usize>,
    pub victim: Vec<usize>,
    /// `Σ_d |clean[d] - victim[d]|`.
    pub l1_distance: usize,
    /// `max_d |clean[d] - victim[d]|`.
    pub max_deviation: usize,
}

pub fn degree_distribution_report(clean: &Graph, victim: &Graph) -> Result<DegreeReport> {
    if clean.n_nodes() != victim.n_nodes() {
        return Err(Error::invalid(format!(
            "node counts differ: {} vs {}",
            clean.n_nodes(),
            victim.n_nodes()
        )));
    }
    let hist = |g: &Graph| {
        let deg: Vec<usize> = g.neighbors().iter().map(Vec::len).collect();
        let mut h = vec![0usize; deg.iter().max().map_or(1, |m| m + 1)];
        for d in deg {
            h[d] += 1;
        }
        h
    };
    let (mut c, mut v) = (hist(clean), hist(victim));
    let len = c.len().max(v.len());
    c.resize(len, 0);
    v.resize(len, 0);
    let diffs: Vec<usize> = c.iter().zip(&v).map(|(a, b)| a.abs_diff(*b)).collect();
    Ok(DegreeReport {
        l1_distance: diffs.iter().sum(),
        max_deviation: diffs.iter().copied().max().unwrap_or(0),
        clean: c,
        victim: v,
    })
}
