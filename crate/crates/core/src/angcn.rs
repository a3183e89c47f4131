//! Anonymous GCN defense.
//!
//! A generator maps node-indexed noise drawn from a staggered Gaussian to a
//! synthetic positional row `u^G(v)` standing in for the eigenvector row
//! `u(v)`. A spectral discriminator learns to classify real rows correctly and
//! generated rows into decoy classes; the generator learns to fool it. After
//! training, inference uses generated rows only, so it never touches edges.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LaplacianKind, SpectralBasis};
use crate::matrix::Matrix;
use crate::model::{Activation, FilterInit};
use crate::nn::checkpoint::{params_from_value, params_to_json, take_param, ParamMap};
use crate::nn::{glorot, one_hot, sigmoid_bce, Optimizer, Tape, Var};
use crate::rng::{substream, Rng};

/// `N` Gaussians `Norm(μ_n, σ²)` whose `ε`-density boundaries touch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaggeredNoiseSpec {
    pub n: usize,
    pub sigma: f64,
    pub epsilon: f64,
    /// Distance from `μ_n` to the point where the density falls to `ε`.
    pub r: f64,
    pub means: Vec<f64>,
}

/// `e^{-1/2} / √(2π)`, which gives `r = σ` at `σ = 1`.
pub fn default_epsilon() -> f64 {
    (-0.5_f64).exp() / (2.0 * PI).sqrt()
}

/// Builds the staggered spec: `r = σ √(-2 ln(√(2π) σ ε))`, `μ_n = (2n - N - 1) r`.
pub fn staggered_spec(n: usize, sigma: f64, epsilon: f64) -> Result<StaggeredNoiseSpec> {
    if n == 0 {
        return Err(Error::invalid("staggered noise needs at least one node"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let peak = 1.0 / ((2.0 * PI).sqrt() * sigma);
    if !(epsilon > 0.0 && epsilon < peak) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, {peak}) for sigma {sigma}, got {epsilon}"
        )));
    }
    let r = sigma * (-2.0 * ((2.0 * PI).sqrt() * sigma * epsilon).ln()).sqrt();
    let means = (1..=n).map(|k| (2.0 * k as f64 - n as f64 - 1.0) * r).collect();
    Ok(StaggeredNoiseSpec {
        n,
        sigma,
        epsilon,
        r,
        means,
    })
}

impl StaggeredNoiseSpec {
    /// Density of node `v`'s Gaussian (1-based `v`) at `x`.
    pub fn pdf(&self, x: f64, v: usize) -> Result<f64> {
        let mu = self.mean(v)?;
        let z = (x - mu) / self.sigma;
        Ok((-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * self.sigma))
    }

    /// `μ_v` for 1-based `v`.
    pub fn mean(&self, v: usize) -> Result<f64> {
        if v == 0 || v > self.n {
            return Err(Error::OutOfRange { index: v, len: self.n });
        }
        Ok(self.means[v - 1])
    }
}

/// `k` draws from `Norm(μ_v, σ²)`; `v` is 1-based.
pub fn sample_noise(spec: &StaggeredNoiseSpec, v: usize, k: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let mu = spec.mean(v)?;
    let normal = Normal::new(mu, spec.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..k).map(|_| normal.sample(rng)).collect())
}

/// Two-layer MLP `k -> hidden -> N` with ReLU on the hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    /// Fixed factor applied to the noise before the first layer, keeping
    /// inputs near unit scale however large `N r` is.
    pub input_scale: f64,
    pub output: GeneratorOutput,
}

/// Nonlinearity on the generator's last layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorOutput {
    #[default]
    Linear,
    /// Keeps generated rows in `(-1, 1)`, the range of an orthonormal row.
    Tanh,
}

impl GeneratorOutput {
    fn apply(self, x: f64) -> f64 {
        match self {
            GeneratorOutput::Linear => x,
            GeneratorOutput::Tanh => x.tanh(),
        }
    }
}

impl Generator {
    pub fn new(k: usize, hidden: usize, n: usize, input_scale: f64, rng: &mut Rng) -> Self {
        Self {
            w1: glorot(k, hidden, rng),
            b1: Matrix::zeros(1, hidden),
            w2: glorot(hidden, n, rng),
            b2: Matrix::zeros(1, n),
            input_scale,
            output: GeneratorOutput::default(),
        }
    }

    pub fn with_output(mut self, output: GeneratorOutput) -> Self {
        self.output = output;
        self
    }

    pub fn noise_width(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_width(&self) -> usize {
        self.w2.cols()
    }

    /// `u^G = G(z)` for each row of `z`.
    pub fn forward_batch(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.noise_width() {
            return Err(Error::Shape {
                op: "generator",
                left: z.shape(),
                right: self.w1.shape(),
            });
        }
        let mut h = z.scale(self.input_scale).matmul(&self.w1)?;
        for i in 0..h.rows() {
            for (x, b) in h.row_mut(i).iter_mut().zip(self.b1.row(0)) {
                *x = (*x + b).max(0.0);
            }
        }
        let mut out = h.matmul(&self.w2)?;
        for i in 0..out.rows() {
            for (x, b) in out.row_mut(i).iter_mut().zip(self.b2.row(0)) {
                *x = self.output.apply(*x + b);
            }
        }
        Ok(out)
    }

    pub fn generate_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(&Matrix::row_vector(z))?.into_vec())
    }

    /// `G(z)` recorded on a tape with the four parameter blocks as variables.
    pub fn on_tape(tape: &mut Tape, z: Var, scale: f64, output: GeneratorOutput, w: [Var; 4]) -> Result<Var> {
        let [w1, b1, w2, b2] = w;
        let z = tape.scale(z, scale)?;
        let h = tape.matmul(z, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.relu(h)?;
        let o = tape.matmul(h, w2)?;
        let o = tape.add_row(o, b2)?;
        match output {
            GeneratorOutput::Linear => Ok(o),
            GeneratorOutput::Tanh => tape.tanh(o),
        }
    }

    fn blocks(&self) -> [&Matrix; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn blocks_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Spectral discriminator: `σ(u D_enc P) D_dec` for a positional row `u` and
/// a projected feature matrix `P` (`Uᵀ f` or `U^D f`).
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    /// Diagonal of `D_enc`, stored as a `1 x N` row.
    pub enc: Matrix,
    /// `d x ι`.
    pub dec: Matrix,
    pub activation: Activation,
}

impl Discriminator {
    pub fn new(eigenvalues: &[f64], d: usize, n_classes: usize, init: FilterInit, rng: &mut Rng) -> Self {
        Self {
            enc: init.build(eigenvalues),
            dec: glorot(d, n_classes, rng),
            activation: Activation::Relu,
        }
    }

    /// Logits for each row of `rows` against the projection `proj`.
    pub fn logits(&self, rows: &Matrix, proj: &Matrix) -> Result<Matrix> {
        let mut scaled = rows.clone();
        let enc = self.enc.row(0);
        if rows.cols() != enc.len() {
            return Err(Error::Shape {
                op: "discriminator",
                left: rows.shape(),
                right: self.enc.shape(),
            });
        }
        for i in 0..scaled.rows() {
            for (x, e) in scaled.row_mut(i).iter_mut().zip(enc) {
                *x *= e;
            }
        }
        let act = self.activation;
        scaled.matmul(proj)?.map(|x| act.apply(x)).matmul(&self.dec)
    }

    pub fn on_tape(tape: &mut Tape, activation: Activation, row: Var, proj: Var, enc: Var, dec: Var) -> Result<Var> {
        let s = tape.diag_scale(row, enc)?;
        let e = tape.matmul(s, proj)?;
        let e = activation.on_tape(tape, e)?;
        tape.matmul(e, dec)
    }
}

/// Which side of the discriminator loss a sample belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Real,
    Fake,
}

/// A class other than `label`, uniformly at random.
pub fn decoy_label(label: usize, n_classes: usize, rng: &mut Rng) -> Result<usize> {
    if n_classes < 2 || label >= n_classes {
        return Err(Error::invalid(format!(
            "decoy needs label < classes and at least two classes (label {label}, {n_classes} classes)"
        )));
    }
    let pick = rng.random_range(0..n_classes - 1);
    Ok(if pick >= label { pick + 1 } else { pick })
}

/// Cross-entropy of `sigmoid(y)` against the one-hot row of `class`, over
/// every class: `-Σ_c [t_c ln σ(y_c) + (1 - t_c) ln σ(-y_c)]`.
pub fn sigmoid_ce(y: &[f64], class: usize) -> Result<f64> {
    let target = one_hot(&[class], y.len())?;
    Ok(sigmoid_bce(&Matrix::row_vector(y), &target))
}

/// Discriminator loss of one sample: the true class for real rows, a decoy
/// class for fake rows. Returns the loss and the class used.
pub fn loss_discriminator(y: &[f64], kind: SampleKind, label: Option<usize>, rng: &mut Rng) -> Result<(f64, usize)> {
    let label = label.ok_or_else(|| Error::precondition("discriminator loss needs a label"))?;
    let class = match kind {
        SampleKind::Real => label,
        SampleKind::Fake => decoy_label(label, y.len(), rng)?,
    };
    Ok((sigmoid_ce(y, class)?, class))
}

fn sigmoid_ce_on_tape(tape: &mut Tape, y: Var, class: usize) -> Result<Var> {
    let (_, c) = tape.shape(y);
    tape.sigmoid_bce(y, &one_hot(&[class], c)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleScope {
    /// Sample `v` from every node. Nodes outside the train mask use the
    /// discriminator's real-position prediction as the generator target and
    /// skip the discriminator update.
    #[default]
    All,
    /// Sample `v` from the train mask only.
    Labeled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnGcnConfig {
    pub noise_width: usize,
    pub hidden: usize,
    pub q: f64,
    pub lr_d: f64,
    pub lr_g: f64,
    pub inner_epochs: usize,
    pub outer_epochs: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Evaluate `acc_D`/`acc_G` every this many outer epochs (and after the last).
    pub eval_every: usize,
    pub laplacian: LaplacianKind,
    pub enc_init: FilterInit,
    pub scope: SampleScope,
    pub generator_output: GeneratorOutput,
    pub disc_activation: Activation,
}

impl Default for AnGcnConfig {
    fn default() -> Self {
        Self {
            noise_width: 32,
            hidden: 64,
            q: 0.1,
            lr_d: 0.01,
            lr_g: 0.001,
            inner_epochs: 5,
            outer_epochs: 1500,
            sigma: 1.0,
            epsilon: default_epsilon(),
            seed: 0,
            eval_every: 1,
            laplacian: LaplacianKind::SymmetricNormalized,
            enc_init: FilterInit::default(),
            scope: SampleScope::All,
            generator_output: GeneratorOutput::default(),
            disc_activation: Activation::Relu,
        }
    }
}

/// Training-time state: the clean basis, `U^D` and the cached products.
#[derive(Clone, Debug)]
pub struct AnGcnState {
    basis: Arc<SpectralBasis>,
    features: Arc<Matrix>,
    /// `Uᵀ f`.
    proj: Arc<Matrix>,
    /// `U^D`, initialized to `Uᵀ` so column `l` holds `u(l)ᵀ`.
    ud: Matrix,
    /// `U^D f`, kept in sync with `ud`.
    ud_proj: Matrix,
    pub q: f64,
}

impl AnGcnState {
    pub fn new(basis: Arc<SpectralBasis>, features: &Matrix, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("q must lie in [0, 1], got {q}")));
        }
        if features.rows() != basis.n() {
            return Err(Error::Shape {
                op: "angcn_state",
                left: features.shape(),
                right: (basis.n(), features.cols()),
            });
        }
        let ud = basis.vectors().transpose();
        let proj = basis.vectors().tr_matmul(features)?;
        Ok(Self {
            ud_proj: proj.clone(),
            proj: Arc::new(proj),
            ud,
            features: Arc::new(features.clone()),
            basis,
            q,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn ud(&self) -> &Matrix {
        &self.ud
    }

    pub fn ud_proj(&self) -> &Matrix {
        &self.ud_proj
    }

    pub fn proj(&self) -> &Matrix {
        &self.proj
    }

    /// `u^D_l <- u^D_l + q (u^G(l) - u^D_l)`, with `U^D f` updated by the
    /// matching rank-one correction.
    pub fn update_ud(&mut self, l: usize, generated: &[f64]) -> Result<()> {
        let n = self.n();
        if l >= n {
            return Err(Error::OutOfRange { index: l, len: n });
        }
        if generated.len() != n {
            return Err(Error::invalid(format!(
                "generated row has length {}, expected {n}",
                generated.len()
            )));
        }
        let fl = self.features.row(l).to_vec();
        for (i, g) in generated.iter().enumerate() {
            let old = self.ud[(i, l)];
            // Convex form: exact at q = 0 and q = 1.
            let new = (1.0 - self.q) * old + self.q * g;
            self.ud[(i, l)] = new;
            let step = new - old;
            if step != 0.0 {
                for (p, f) in self.ud_proj.row_mut(i).iter_mut().zip(&fl) {
                    *p += step * f;
                }
            }
        }
        Ok(())
    }

    /// `(y_fake, y_real)` for node `v`: `σ(u^G D_enc U^D f) D_dec` and
    /// `σ(u(v) D_enc Uᵀ f) D_dec`.
    pub fn fake_and_real(&self, d: &Discriminator, generated: &[f64], v: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let real_row = Matrix::row_vector(self.basis.row_of(v)?);
        let fake = d.logits(&Matrix::row_vector(generated), &self.ud_proj)?.into_vec();
        let real = d.logits(&real_row, &self.proj)?.into_vec();
        Ok((fake, real))
    }
}

/// One optimizer step on the discriminator from a real/fake pair. The
/// generator is not an input, so it cannot change.
pub fn discriminator_step(
    state: &AnGcnState,
    d: &mut Discriminator,
    generated: &[f64],
    v: usize,
    label: usize,
    decoy: usize,
    opt: &mut Optimizer,
) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, enc, dec) = discriminator_loss_on_tape(&mut tape, state, d, generated, v, label, decoy)?;
    tape.backward(loss)?;
    let (ge, gd) = (tape.grad_or_zeros(enc), tape.grad_or_zeros(dec));
    opt.step(&mut [&mut d.enc, &mut d.dec], &[&ge, &gd])?;
    Ok(tape.scalar(loss))
}

/// `Loss_D(y_real) + Loss_D(y_fake)` with `D_enc`, `D_dec` as parameters.
pub fn discriminator_loss_on_tape(
    tape: &mut Tape,
    state: &AnGcnState,
    d: &Discriminator,
    generated: &[f64],
    v: usize,
    label: usize,
    decoy: usize,
) -> Result<(Var, Var, Var)> {
    let enc = tape.param(d.enc.clone())?;
    let dec = tape.param(d.dec.clone())?;
    let real_row = tape.constant(Matrix::row_vector(state.basis.row_of(v)?))?;
    let fake_row = tape.constant(Matrix::row_vector(generated))?;
    let proj = tape.constant_shared(state.proj.clone())?;
    let ud_proj = tape.constant(state.ud_proj.clone())?;
    let y_real = Discriminator::on_tape(tape, d.activation, real_row, proj, enc, dec)?;
    let y_fake = Discriminator::on_tape(tape, d.activation, fake_row, ud_proj, enc, dec)?;
    let l_real = sigmoid_ce_on_tape(tape, y_real, label)?;
    let l_fake = sigmoid_ce_on_tape(tape, y_fake, decoy)?;
    Ok((tape.add(l_real, l_fake)?, enc, dec))
}

/// Fool loss `-ln σ(y_fool)_label` with the generator blocks as parameters.
pub fn generator_loss_on_tape(
    tape: &mut Tape,
    state: &AnGcnState,
    g: &Generator,
    d: &Discriminator,
    z: &[f64],
    label: usize,
) -> Result<(Var, [Var; 4])> {
    let w = [
        tape.param(g.w1.clone())?,
        tape.param(g.b1.clone())?,
        tape.param(g.w2.clone())?,
        tape.param(g.b2.clone())?,
    ];
    let zv = tape.constant(Matrix::row_vector(z))?;
    let row = Generator::on_tape(tape, zv, g.input_scale, g.output, w)?;
    let enc = tape.constant(d.enc.clone())?;
    let dec = tape.constant(d.dec.clone())?;
    let ud_proj = tape.constant(state.ud_proj.clone())?;
    let y = Discriminator::on_tape(tape, d.activation, row, ud_proj, enc, dec)?;
    Ok((sigmoid_ce_on_tape(tape, y, label)?, w))
}

/// `inner_epochs` generator steps, each on fresh noise for node `v`
/// (0-based). The discriminator is borrowed immutably. Returns the mean loss.
#[allow(clippy::too_many_arguments)]
pub fn generator_step(
    state: &AnGcnState,
    g: &mut Generator,
    d: &Discriminator,
    spec: &StaggeredNoiseSpec,
    v: usize,
    label: usize,
    opt: &mut Optimizer,
    inner_epochs: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..inner_epochs {
        let z = sample_noise(spec, v + 1, g.noise_width(), rng)?;
        let mut tape = Tape::new();
        let (loss, w) = generator_loss_on_tape(&mut tape, state, g, d, &z, label)?;
        tape.backward(loss)?;
        total += tape.scalar(loss);
        let grads: Vec<Matrix> = w.iter().map(|&x| tape.grad_or_zeros(x)).collect();
        let [w1, b1, w2, b2] = g.blocks_mut();
        opt.step(&mut [w1, b1, w2, b2], &[&grads[0], &grads[1], &grads[2], &grads[3]])?;
    }
    Ok(total / inner_epochs.max(1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnGcnRecord {
    pub epoch: usize,
    #[serde(rename = "acc_D")]
    pub acc_d: Option<f64>,
    #[serde(rename = "acc_G")]
    pub acc_g: Option<f64>,
    #[serde(rename = "loss_D")]
    pub loss_d: Option<f64>,
    #[serde(rename = "loss_G")]
    pub loss_g: f64,
}

/// Trained parameters plus what inference needs to rebuild the noise.
#[derive(Clone, Debug)]
pub struct AnGcn {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub noise: StaggeredNoiseSpec,
    pub q: f64,
    pub seed: u64,
}

pub struct TrainedAnGcn {
    /// Parameters at the epoch with the highest `acc_G`.
    pub best: AnGcn,
    pub best_epoch: usize,
    pub best_acc_g: Option<f64>,
    /// State after the last epoch.
    pub last: AnGcn,
    pub state: AnGcnState,
    pub trace: Vec<AnGcnRecord>,
}

fn evaluate(
    state: &AnGcnState,
    g: &Generator,
    d: &Discriminator,
    spec: &StaggeredNoiseSpec,
    labels: &[usize],
    idx: &[usize],
    rng: &mut Rng,
) -> Result<(Option<f64>, Option<f64>)> {
    if idx.is_empty() {
        return Ok((None, None));
    }
    let real = d
        .logits(&state.basis.vectors().select_rows(idx), &state.proj)?
        .argmax_rows();
    let z = noise_matrix(spec, idx, g.noise_width(), rng)?;
    let fake = d.logits(&g.forward_batch(&z)?, &state.ud_proj)?.argmax_rows();
    let hit =
        |pred: &[usize]| pred.iter().zip(idx).filter(|(p, &i)| **p == labels[i]).count() as f64 / idx.len() as f64;
    Ok((Some(hit(&real)), Some(hit(&fake))))
}

fn noise_matrix(spec: &StaggeredNoiseSpec, idx: &[usize], k: usize, rng: &mut Rng) -> Result<Matrix> {
    let mut data = Vec::with_capacity(idx.len() * k);
    for &i in idx {
        if i >= spec.n {
            return Err(Error::OutOfRange { index: i, len: spec.n });
        }
        data.extend(sample_noise(spec, i + 1, k, rng)?);
    }
    Matrix::from_vec(idx.len(), k, data)
}

/// Adversarial training of generator and discriminator.
pub fn train_angcn(g: &Graph, cfg: &AnGcnConfig) -> Result<TrainedAnGcn> {
    let labels = g.require_labels()?;
    let n_classes = g.n_classes().unwrap_or(0);
    if n_classes < 2 {
        return Err(Error::precondition("training needs at least two classes"));
    }
    let train = &g.masks().train;
    if train.is_empty() {
        return Err(Error::precondition("train mask is empty"));
    }
    if cfg.eval_every == 0 {
        return Err(Error::invalid("eval_every must be positive"));
    }
    let n = g.n_nodes();
    let spec = staggered_spec(n, cfg.sigma, cfg.epsilon)?;
    let basis = Arc::new(SpectralBasis::of_graph(g, cfg.laplacian)?);
    let mut state = AnGcnState::new(basis.clone(), g.features(), cfg.q)?;

    let mut init_rng = substream(cfg.seed, "angcn-init");
    let input_scale = 1.0 / (n as f64 * spec.r);
    let mut gen =
        Generator::new(cfg.noise_width, cfg.hidden, n, input_scale, &mut init_rng).with_output(cfg.generator_output);
    let mut disc = Discriminator::new(
        basis.eigenvalues(),
        g.n_features(),
        n_classes,
        cfg.enc_init,
        &mut init_rng,
    );
    disc.activation = cfg.disc_activation;

    let mut pick_rng = substream(cfg.seed, "angcn-sample");
    let mut noise_rng = substream(cfg.seed, "noise");
    let mut decoy_rng = substream(cfg.seed, "decoy");
    let mut opt_d = Optimizer::adam(cfg.lr_d);
    let mut opt_g = Optimizer::adam(cfg.lr_g);

    let mut is_train = vec![false; n];
    for &i in train {
        is_train[i] = true;
    }
    let pool: Vec<usize> = match cfg.scope {
        SampleScope::All => (0..n).collect(),
        SampleScope::Labeled => train.clone(),
    };
    let test = &g.masks().test;

    let snapshot = |gen: &Generator, disc: &Discriminator| AnGcn {
        generator: gen.clone(),
        discriminator: disc.clone(),
        noise: spec.clone(),
        q: cfg.q,
        seed: cfg.seed,
    };
    let mut best = snapshot(&gen, &disc);
    let mut best_epoch = 0;
    let mut best_acc_g: Option<f64> = None;
    let mut trace = Vec::new();

    for epoch in 1..=cfg.outer_epochs {
        let v = pool[pick_rng.random_range(0..pool.len())];
        let z = sample_noise(&spec, v + 1, cfg.noise_width, &mut noise_rng)?;
        let generated = gen.generate_row(&z)?;
        state.update_ud(v, &generated)?;

        let (loss_d, target) = if is_train[v] {
            let decoy = decoy_label(labels[v], n_classes, &mut decoy_rng)?;
            let l = discriminator_step(&state, &mut disc, &generated, v, labels[v], decoy, &mut opt_d)?;
            (Some(l), labels[v])
        } else {
            let (_, real) = state.fake_and_real(&disc, &generated, v)?;
            let pseudo = Matrix::row_vector(&real).argmax_rows()[0];
            (None, pseudo)
        };
        let loss_g = generator_step(
            &state,
            &mut gen,
            &disc,
            &spec,
            v,
            target,
            &mut opt_g,
            cfg.inner_epochs,
            &mut noise_rng,
        )?;

        let (acc_d, acc_g) = if epoch % cfg.eval_every == 0 || epoch == cfg.outer_epochs {
            let mut eval_rng = substream(cfg.seed ^ epoch as u64, "eval");
            evaluate(&state, &gen, &disc, &spec, labels, test, &mut eval_rng)?
        } else {
            (None, None)
        };
        if let Some(a) = acc_g {
            if best_acc_g.is_none_or(|b| a > b) {
                best_acc_g = Some(a);
                best_epoch = epoch;
                best = snapshot(&gen, &disc);
            }
        }
        trace.push(AnGcnRecord {
            epoch,
            acc_d,
            acc_g,
            loss_d,
            loss_g,
        });
    }

    Ok(TrainedAnGcn {
        last: snapshot(&gen, &disc),
        best,
        best_epoch,
        best_acc_g,
        state,
        trace,
    })
}

/// Edge-free inference: both positional matrices come from the generator.
/// `Y = σ(G D_enc Gᵀ f) D_dec` with `G` the stacked generated rows of all
/// nodes; returns the argmax class of each requested node.
pub fn infer_anonymous(model: &AnGcn, features: &Matrix, indices: &[usize], seed: u64) -> Result<Vec<usize>> {
    let n = model.noise.n;
    if features.rows() != n {
        return Err(Error::Shape {
            op: "infer_anonymous",
            left: features.shape(),
            right: (n, model.discriminator.dec.rows()),
        });
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::OutOfRange { index: bad, len: n });
    }
    let mut rng = substream(seed, "noise");
    let all: Vec<usize> = (0..n).collect();
    let z = noise_matrix(&model.noise, &all, model.generator.noise_width(), &mut rng)?;
    let rows = model.generator.forward_batch(&z)?;
    let proj = rows.tr_matmul(features)?;
    let logits = model.discriminator.logits(&rows.select_rows(indices), &proj)?;
    Ok(logits.argmax_rows())
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    #[serde(rename = "N")]
    n: usize,
    sigma: f64,
    epsilon: f64,
    q: f64,
    seed: u64,
    input_scale: f64,
    generator_output: GeneratorOutput,
    activation: Activation,
    params: serde_json::Value,
}

impl AnGcn {
    pub fn params(&self) -> ParamMap {
        let g = &self.generator;
        let names = ["generator.w1", "generator.b1", "generator.w2", "generator.b2"];
        let mut p: ParamMap = names
            .iter()
            .zip(g.blocks())
            .map(|(k, m)| (k.to_string(), m.clone()))
            .collect();
        p.insert("discriminator.enc".into(), self.discriminator.enc.clone());
        p.insert("discriminator.dec".into(), self.discriminator.dec.clone());
        p
    }

    pub fn to_json(&self) -> Result<String> {
        let params: serde_json::Value = serde_json::from_str(&params_to_json(&self.params())?)?;
        let file = CheckpointFile {
            n: self.noise.n,
            sigma: self.noise.sigma,
            epsilon: self.noise.epsilon,
            q: self.q,
            seed: self.seed,
            input_scale: self.generator.input_scale,
            generator_output: self.generator.output,
            activation: self.discriminator.activation,
            params,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        let mut p = params_from_value(file.params)?;
        let generator = Generator {
            w1: take_param(&mut p, "generator.w1")?,
            b1: take_param(&mut p, "generator.b1")?,
            w2: take_param(&mut p, "generator.w2")?,
            b2: take_param(&mut p, "generator.b2")?,
            input_scale: file.input_scale,
            output: file.generator_output,
        };
        let discriminator = Discriminator {
            enc: take_param(&mut p, "discriminator.enc")?,
            dec: take_param(&mut p, "discriminator.dec")?,
            activation: file.activation,
        };
        if generator.output_width() != file.n || discriminator.enc.cols() != file.n {
            return Err(Error::Checkpoint(format!(
                "parameter widths do not match N = {}",
                file.n
            )));
        }
        Ok(Self {
            generator,
            discriminator,
            noise: staggered_spec(file.n, file.sigma, file.epsilon)?,
            q: file.q,
            seed: file.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
