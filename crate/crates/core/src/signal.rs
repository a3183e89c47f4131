//! Node features over training epochs treated as signals, their DFT model,
//! and the two localization experiments (perturbing `u(·)` rows and deleting
//! a node).

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{eigendecompose, laplacian_from_adjacency, Graph, LaplacianKind, SpectralBasis};
use crate::matrix::Matrix;
use crate::model::{train_spectral_observed, SpectralModel, TrainConfig};

/// Scalar value of one node at every epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTrajectory {
    pub node: usize,
    pub values: Vec<f64>,
}

impl NodeTrajectory {
    pub fn new(node: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("trajectory needs at least one epoch"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(Self { node, values })
    }

    pub fn epochs(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.arg()).collect()
    }
}

fn twiddle(e: usize, nu: usize, t: usize, sign: f64) -> Complex64 {
    // Reduce the exponent before scaling so large E·t keeps full precision.
    let k = (nu * t) % e;
    Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / e as f64)
}

/// `f̂[ν] = Σ_t f[t] e^{-2πiνt/E}`.
pub fn dft(values: &[f64]) -> Spectrum {
    let e = values.len();
    let coeffs = (0..e)
        .map(|nu| {
            values
                .iter()
                .enumerate()
                .map(|(t, &x)| x * twiddle(e, nu, t, -1.0))
                .sum()
        })
        .collect();
    Spectrum { coeffs }
}

/// Inverse transform in three forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Real part of `(1/E) Σ_ν f̂[ν] e^{2πiνt/E}`.
    pub standard: Vec<f64>,
    /// Conjugate-pair form: `(1/E) f̂[0] + Σ_{0<ν<E/2} (2/E)|f̂[ν]| cos(2πνt/E + arg f̂[ν])`,
    /// plus `(1/E) f̂[E/2] cos(πt)` when `E` is even.
    pub paired: Vec<f64>,
    /// The amplitude-phase sum taken literally over every `ν` with the extra
    /// `e^{2πitν/E}` factor.
    pub literal: Vec<Complex64>,
    /// `max_t |paired[t] - standard[t]|`.
    pub paired_discrepancy: f64,
    /// `max_t |literal[t] - standard[t]|`.
    pub literal_discrepancy: f64,
}

fn amplitude_phase_term(e: usize, c: Complex64, nu: usize, t: usize) -> f64 {
    let k = (nu * t) % e;
    (2.0 / e as f64) * c.norm() * (2.0 * PI * k as f64 / e as f64 + c.arg()).cos()
}

pub fn reconstruct(spec: &Spectrum) -> Reconstruction {
    let e = spec.len();
    if e == 0 {
        return Reconstruction {
            standard: Vec::new(),
            paired: Vec::new(),
            literal: Vec::new(),
            paired_discrepancy: 0.0,
            literal_discrepancy: 0.0,
        };
    }
    let ef = e as f64;
    let standard: Vec<f64> = (0..e)
        .map(|t| {
            let s: Complex64 = spec
                .coeffs
                .iter()
                .enumerate()
                .map(|(nu, c)| c * twiddle(e, nu, t, 1.0))
                .sum();
            s.re / ef
        })
        .collect();
    let paired: Vec<f64> = (0..e)
        .map(|t| {
            let mut s = spec.coeffs[0].re / ef;
            for nu in 1..e.div_ceil(2) {
                s += amplitude_phase_term(e, spec.coeffs[nu], nu, t);
            }
            if e.is_multiple_of(2) {
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                s += spec.coeffs[e / 2].re / ef * sign;
            }
            s
        })
        .collect();
    let literal: Vec<Complex64> = (0..e)
        .map(|t| {
            (0..e)
                .map(|nu| amplitude_phase_term(e, spec.coeffs[nu], nu, t) * twiddle(e, nu, t, 1.0))
                .sum()
        })
        .collect();
    let max_diff = |xs: &mut dyn Iterator<Item = f64>| xs.fold(0.0_f64, f64::max);
    Reconstruction {
        paired_discrepancy: max_diff(&mut paired.iter().zip(&standard).map(|(a, b)| (a - b).abs())),
        literal_discrepancy: max_diff(&mut literal.iter().zip(&standard).map(|(a, b)| (a - b).norm())),
        standard,
        paired,
        literal,
    }
}

/// `2 θ̄_0 Σ_l u_l(α)`.
pub fn initial_signal(theta0: f64, u_row: &[f64]) -> f64 {
    2.0 * theta0 * u_row.iter().sum::<f64>()
}

/// Inputs of the analytic node-signal model `f_α[t] = Σ_i c̄_i e^{λ_i t} u_i(α)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalModelParams {
    pub c_bar: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `u(α)`, the node's row of the eigenvector matrix.
    pub u_row: Vec<f64>,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalEval {
    pub trajectory: Vec<f64>,
    pub spectrum: Spectrum,
    /// Standard inverse transform at `t`.
    pub standard: f64,
    /// Amplitude-phase form taken literally at `t`.
    pub literal: Complex64,
}

pub fn eval_signal_model(p: &SignalModelParams, t: usize) -> Result<SignalEval> {
    let n = p.u_row.len();
    if p.c_bar.len() != n || p.eigenvalues.len() != n {
        return Err(Error::invalid(format!(
            "signal model lengths differ: c̄ {}, λ {}, u {}",
            p.c_bar.len(),
            p.eigenvalues.len(),
            n
        )));
    }
    if p.epochs == 0 {
        return Err(Error::invalid("signal model needs at least one epoch"));
    }
    if t >= p.epochs {
        return Err(Error::OutOfRange {
            index: t,
            len: p.epochs,
        });
    }
    let trajectory: Vec<f64> = (0..p.epochs)
        .map(|s| {
            (0..n)
                .map(|i| p.c_bar[i] * (p.eigenvalues[i] * s as f64).exp() * p.u_row[i])
                .sum()
        })
        .collect();
    if trajectory.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eval_signal_model"));
    }
    let spectrum = dft(&trajectory);
    let rec = reconstruct(&spectrum);
    Ok(SignalEval {
        standard: rec.standard[t],
        literal: rec.literal[t],
        trajectory,
        spectrum,
    })
}

/// Scalar read from each node's embedding row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Coordinate(usize),
    Mean,
}

impl Default for Projection {
    fn default() -> Self {
        Projection::Coordinate(0)
    }
}

impl Projection {
    fn apply(self, row: &[f64]) -> Result<f64> {
        match self {
            Projection::Coordinate(k) => row.get(k).copied().ok_or(Error::OutOfRange {
                index: k,
                len: row.len(),
            }),
            Projection::Mean => Ok(row.iter().sum::<f64>() / row.len().max(1) as f64),
        }
    }
}

/// Trains `model` and records each node's projected embedding after every epoch.
pub fn capture_trajectories(
    model: &mut SpectralModel,
    g: &Graph,
    cfg: &TrainConfig,
    projection: Projection,
) -> Result<Vec<NodeTrajectory>> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("trajectories need at least one epoch"));
    }
    let n = g.n_nodes();
    let all: Vec<usize> = (0..n).collect();
    let mut values = vec![Vec::with_capacity(cfg.epochs); n];
    train_spectral_observed(model, g, cfg, |m, proj| {
        let emb = m.embed_rows(proj, &all)?;
        for (i, v) in values.iter_mut().enumerate() {
            v.push(projection.apply(emb.row(i))?);
        }
        Ok(())
    })?;
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| NodeTrajectory::new(i, v))
        .collect()
}

/// `δ = 1 - k/100` for `k = 1..=50`.
pub fn default_deltas() -> Vec<f64> {
    (1..=50).map(|k| 1.0 - k as f64 / 100.0).collect()
}

pub const DEFAULT_CV: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationTable {
    pub node: usize,
    /// Acting targets: the node itself, then its neighbors in index order.
    pub targets: Vec<usize>,
    pub deltas: Vec<f64>,
    /// `deviation[target][delta]`.
    pub deviation: Vec<Vec<f64>>,
}

impl DeviationTable {
    pub fn deviation_at(&self, target: usize, delta: f64) -> Option<f64> {
        let ti = self.targets.iter().position(|&t| t == target)?;
        let di = self.deltas.iter().position(|&d| (d - delta).abs() < 1e-12)?;
        Some(self.deviation[ti][di])
    }

    /// Long form: `target,delta,deviation`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "target,delta,deviation")?;
        for (t, row) in self.targets.iter().zip(&self.deviation) {
            for (d, v) in self.deltas.iter().zip(row) {
                writeln!(out, "{t},{d},{v}")?;
            }
        }
        Ok(())
    }

    /// Wide form: one row per target, one column per δ.
    pub fn write_wide_csv(&self, mut out: impl Write) -> Result<()> {
        write!(out, "target")?;
        for d in &self.deltas {
            write!(out, ",d_{d}")?;
        }
        writeln!(out)?;
        for (t, row) in self.targets.iter().zip(&self.deviation) {
            write!(out, "{t}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Scales one row of `U` by `δ` at a time (the node `v` itself, then up to
/// `c_v` neighbors) and measures how far `v`'s embedding
/// `Û diag(θ) Ûᵀ f` moves.
pub fn perturb_u_experiment(
    basis: &SpectralBasis,
    filter: &[f64],
    f: &Matrix,
    neighbors: &[usize],
    v: usize,
    c_v: usize,
    deltas: &[f64],
) -> Result<DeviationTable> {
    let n = basis.n();
    if v >= n {
        return Err(Error::OutOfRange { index: v, len: n });
    }
    if filter.len() != n || f.rows() != n {
        return Err(Error::invalid(format!(
            "filter length {} and feature rows {} must equal {n}",
            filter.len(),
            f.rows()
        )));
    }
    if neighbors.is_empty() {
        return Err(Error::precondition(format!("node {v} is isolated")));
    }
    if c_v > neighbors.len() {
        return Err(Error::precondition(format!(
            "c_v = {c_v} exceeds the {} neighbors of node {v}",
            neighbors.len()
        )));
    }
    if let Some(&bad) = neighbors.iter().find(|&&i| i >= n || i == v) {
        return Err(Error::invalid(format!("bad neighbor {bad} of node {v}")));
    }

    let u = basis.vectors();
    let proj = u.tr_matmul(f)?;
    // Row v of the embedding for a given row u(v) and projection Uᵀf.
    let embed_v = |uv: &[f64], proj: &Matrix| -> Vec<f64> {
        let mut out = vec![0.0; f.cols()];
        for l in 0..n {
            let w = uv[l] * filter[l];
            if w != 0.0 {
                for (o, p) in out.iter_mut().zip(proj.row(l)) {
                    *o += w * p;
                }
            }
        }
        out
    };
    let clean = embed_v(u.row(v), &proj);

    let mut targets = vec![v];
    targets.extend_from_slice(&neighbors[..c_v]);
    let mut deviation = Vec::with_capacity(targets.len());
    for &i in &targets {
        let ui = u.row(i);
        let fi = f.row(i);
        let mut row = Vec::with_capacity(deltas.len());
        for &delta in deltas {
            // Ûᵀf differs from Uᵀf only through row i: Δ = (δ - 1) u(i)ᵀ f(i).
            let mut p = proj.clone();
            for (l, &ul) in ui.iter().enumerate() {
                let c = (delta - 1.0) * ul;
                for (x, fk) in p.row_mut(l).iter_mut().zip(fi) {
                    *x += c * fk;
                }
            }
            let uv: Vec<f64> = if i == v {
                u.row(v).iter().map(|x| delta * x).collect()
            } else {
                u.row(v).to_vec()
            };
            let moved = embed_v(&uv, &p);
            let d = moved
                .iter()
                .zip(&clean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            row.push(d);
        }
        deviation.push(row);
    }
    Ok(DeviationTable {
        node: v,
        targets,
        deltas: deltas.to_vec(),
        deviation,
    })
}

/// Removes `tau` and reconnects its neighbors: `ω_ij` gains
/// `(ω_τi + ω_τj) / 2` when both `i` and `j` were adjacent to `tau`.
/// Returns the `(N-1)`-node weighted adjacency and the kept node ids.
pub fn delete_and_reconnect(a: &Matrix, tau: usize) -> Result<(Matrix, Vec<usize>)> {
    let n = a.rows();
    if tau >= n {
        return Err(Error::OutOfRange { index: tau, len: n });
    }
    let kept: Vec<usize> = (0..n).filter(|&i| i != tau).collect();
    let mut out = Matrix::zeros(n - 1, n - 1);
    for (x, &i) in kept.iter().enumerate() {
        for (y, &j) in kept.iter().enumerate() {
            if x == y {
                continue;
            }
            let (wi, wj) = (a[(tau, i)], a[(tau, j)]);
            out[(x, y)] = if wi == 0.0 || wj == 0.0 {
                a[(i, j)]
            } else {
                a[(i, j)] + (wi + wj) / 2.0
            };
        }
    }
    Ok((out, kept))
}

fn connected(a: &Matrix) -> bool {
    let n = a.rows();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if a[(u, v)] != 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub const LOG_FLOOR: f64 = 1e-12;

/// `Σ_i [log|u_i|² - log|u^{(d)}_i|²]` over the shorter length, with `|u|`
/// floored at [`LOG_FLOOR`].
pub fn change_metric(u: &[f64], u_deleted: &[f64]) -> f64 {
    let sq_log = |x: f64| {
        let a = x.abs().max(LOG_FLOOR);
        (a * a).ln()
    };
    u.iter().zip(u_deleted).map(|(a, b)| sq_log(*a) - sq_log(*b)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub tau: usize,
    pub order: usize,
    pub node: usize,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeleteNodeReport {
    pub orders: Vec<usize>,
    pub records: Vec<ChangeRecord>,
}

impl DeleteNodeReport {
    /// Mean `|C|` per requested order (`None` when an order has no nodes).
    pub fn mean_abs_c(&self) -> Vec<Option<f64>> {
        self.orders
            .iter()
            .map(|&o| {
                let cs: Vec<f64> = self
                    .records
                    .iter()
                    .filter(|r| r.order == o)
                    .map(|r| r.c.abs())
                    .collect();
                (!cs.is_empty()).then(|| cs.iter().sum::<f64>() / cs.len() as f64)
            })
            .collect()
    }

    /// Long form: `tau,order,node,C`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "tau,order,node,C")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.tau, r.order, r.node, r.c)?;
        }
        Ok(())
    }

    /// One row with the mean `|C|` of each order.
    pub fn write_summary_csv(&self, mut out: impl Write) -> Result<()> {
        let header: Vec<String> = self.orders.iter().map(|o| format!("mean_abs_c_{o}")).collect();
        writeln!(out, "{}", header.join(","))?;
        let row: Vec<String> = self
            .mean_abs_c()
            .into_iter()
            .map(|m| m.map_or_else(String::new, |v| v.to_string()))
            .collect();
        writeln!(out, "{}", row.join(","))?;
        Ok(())
    }
}

/// Deletes each node of `taus` in turn and records `C` for its neighbors of
/// every order in `orders`. Clean rows are truncated to their first `N-1`
/// entries (ascending eigenvalue) to match the deleted basis.
pub fn delete_node_experiment(
    g: &Graph,
    taus: &[usize],
    orders: &[usize],
    kind: LaplacianKind,
) -> Result<DeleteNodeReport> {
    let a = g.adjacency();
    let n = a.rows();
    if n < 2 {
        return Err(Error::precondition("graph needs at least two nodes"));
    }
    if !g.is_connected() {
        return Err(Error::precondition("graph is not connected"));
    }
    let clean = eigendecompose(&laplacian_from_adjacency(&a, kind))?;
    let mut records = Vec::new();
    for &tau in taus {
        let (ad, kept) = delete_and_reconnect(&a, tau)?;
        if !connected(&ad) {
            return Err(Error::precondition(format!(
                "deleting node {tau} disconnects the graph even after reconnection"
            )));
        }
        let deleted = eigendecompose(&laplacian_from_adjacency(&ad, kind))?;
        let hops = g.hop_distances(tau);
        for &order in orders {
            for (x, &node) in kept.iter().enumerate() {
                if hops[node] == Some(order) {
                    let c = change_metric(&clean.vectors().row(node)[..n - 1], deleted.vectors().row(x));
                    records.push(ChangeRecord { tau, order, node, c });
                }
            }
        }
    }
    Ok(DeleteNodeReport {
        orders: orders.to_vec(),
        records,
    })
}

/// The `k` highest-degree nodes, ties broken by lower index.
pub fn top_degree_nodes(g: &Graph, k: usize) -> Vec<usize> {
    let deg: Vec<usize> = g.neighbors().iter().map(Vec::len).collect();
    let mut idx: Vec<usize> = (0..g.n_nodes()).collect();
    idx.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
