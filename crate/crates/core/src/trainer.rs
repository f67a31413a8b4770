//! Classic and fractional-order steepest-descent training.
//!
//! The fractional update replaces each first-order partial with the truncated
//! series
//!
//! ```text
//! D^ν F ≈ d^(−ν)/Γ(1−ν) · F + Σ_{n=1}^{n_max} C(ν,n) · d^(n−ν)/Γ(n−ν+1) · ρ_n · β^n
//! ```
//!
//! where `d` is the distance from the parameter to its lower bound, `ρ_n` the
//! owning neuron's n-order sensitivity and `β` the upstream activation (1 for
//! biases). At ν = 1 this is exactly the classic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{frac_binomial, power_term, recip_gamma, FractionalOrder};
use crate::network::{squared_error, Dataset, ForwardTrace, Mlp, ParamId, Sample};
use crate::params::ParamSet;
use crate::sensitivity::{sensitivities, SensitivityStack};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Classic,
    Fsdm,
}

/// How samples are reduced into one update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// One update per iteration from quantities averaged over all samples.
    FullBatch,
    /// One update per sample, in dataset order; an iteration is one pass.
    PerSample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundScope {
    #[default]
    Global,
    PerLayer,
}

/// Sign convention of the residual fed to the adaptive order kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSign {
    /// e = q − β
    #[default]
    TargetMinusOutput,
    /// e = β − q
    OutputMinusTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderPolicy {
    Fixed {
        order: FractionalOrder,
    },
    /// Order chosen each iteration from the mean residual and mean output
    /// sensitivity; see [`adaptive_order`].
    AdaptiveKernel {
        epsilon_phi: f64,
    },
}

impl OrderPolicy {
    pub fn fixed(v: f64) -> Result<Self> {
        Ok(OrderPolicy::Fixed {
            order: FractionalOrder::new(v)?,
        })
    }
}

impl Default for OrderPolicy {
    fn default() -> Self {
        OrderPolicy::AdaptiveKernel { epsilon_phi: 1e-12 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trainable {
    #[default]
    All,
    Only(Vec<ParamId>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub mode: TrainMode,
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Lower bound of every weight. `None` means the smallest trainable
    /// initial weight (per `bound_scope`) minus `bound_gap`.
    pub w_inf: Option<f64>,
    /// Lower bound shared by all biases, defaulted like `w_inf`.
    pub b_inf: Option<f64>,
    pub bound_gap: f64,
    /// Whether defaulted bounds use the smallest value in the whole network
    /// or in each layer.
    pub bound_scope: BoundScope,
    /// Series terms kept in the fractional partial: 1 or 3.
    pub n_max: usize,
    pub order_policy: OrderPolicy,
    pub residual_sign: ResidualSign,
    pub trainable: Trainable,
    /// Parameters recorded in every trace row.
    pub tracked: Vec<ParamId>,
    pub stop_tolerance: f64,
    pub saddle_epsilon: f64,
    pub perturbation_scale: f64,
    pub rng_seed: u64,
    pub batch: BatchMode,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            mode: TrainMode::Fsdm,
            learning_rate: 0.1,
            max_iterations: 1000,
            w_inf: None,
            b_inf: None,
            bound_gap: 200.0,
            bound_scope: BoundScope::Global,
            n_max: 1,
            order_policy: OrderPolicy::default(),
            residual_sign: ResidualSign::default(),
            trainable: Trainable::All,
            tracked: Vec::new(),
            stop_tolerance: 1e-12,
            saddle_epsilon: 1e-12,
            perturbation_scale: 1e-3,
            rng_seed: 0,
            batch: BatchMode::FullBatch,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!(
                "learning rate must be finite and ≥ 0, got {}",
                self.learning_rate
            ));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if self.n_max != 1 && self.n_max != 3 {
            return bad(format!("n_max must be 1 or 3, got {}", self.n_max));
        }
        if !(self.bound_gap.is_finite() && self.bound_gap > 0.0) {
            return bad(format!(
                "bound_gap must be finite and positive, got {}",
                self.bound_gap
            ));
        }
        for (name, v) in [("w_inf", self.w_inf), ("b_inf", self.b_inf)] {
            if v.is_some_and(|x| !x.is_finite()) {
                return bad(format!("{name} must be finite"));
            }
        }
        for (name, v) in [
            ("stop_tolerance", self.stop_tolerance),
            ("saddle_epsilon", self.saddle_epsilon),
            ("perturbation_scale", self.perturbation_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and ≥ 0, got {v}"));
            }
        }
        match self.order_policy {
            OrderPolicy::Fixed { order } if order.value() < 0.0 => {
                bad(format!("fixed order must be ≥ 0, got {order}"))
            }
            OrderPolicy::AdaptiveKernel { epsilon_phi }
                if !(epsilon_phi.is_finite() && epsilon_phi > 0.0) =>
            {
                bad(format!("epsilon_phi must be positive, got {epsilon_phi}"))
            }
            _ => Ok(()),
        }
    }
}

/// Partial derivatives of the squared error with respect to every parameter
/// for one sample: ρ_1 · β for weights and ρ_1 for biases.
pub fn classic_gradient(trace: &ForwardTrace, rho: &SensitivityStack) -> ParamSet<f64> {
    let widths =
        (0..trace.depth()).map(|m| (trace.layer_input(m).len(), trace.layer_output(m).len()));
    let mut grad = ParamSet::with_widths(widths, 0.0);
    accumulate_terms(trace, rho, std::slice::from_mut(&mut grad));
    grad
}

/// Adds ρ_n · β^n (weights) and ρ_n (biases) into `terms[n-1]`.
fn accumulate_terms(trace: &ForwardTrace, rho: &SensitivityStack, terms: &mut [ParamSet<f64>]) {
    for (n, set) in terms.iter_mut().enumerate() {
        for (m, layer) in set.layers_mut().iter_mut().enumerate() {
            let input = trace.layer_input(m);
            let r = rho.get(n + 1, m);
            let in_w = input.len();
            for (i, &ri) in r.iter().enumerate() {
                for (j, &b) in input.iter().enumerate() {
                    layer.weights[i * in_w + j] += ri * beta_power(b, n + 1);
                }
                layer.biases[i] += ri;
            }
        }
    }
}

#[inline]
fn beta_power(b: f64, n: usize) -> f64 {
    match n {
        1 => b,
        2 => b * b,
        _ => b * b * b,
    }
}

/// Coefficients `[c0, c1, c2, c3]` of the truncated series at distance `d`
/// from the lower bound; entries past `n_max` are zero.
fn series_coefficients(d: f64, v: FractionalOrder, n_max: usize) -> Result<[f64; 4]> {
    let v = v.value();
    let mut c = [0.0; 4];
    c[0] = power_term(d, -v)? * recip_gamma(1.0 - v);
    for (n, slot) in c.iter_mut().enumerate().skip(1).take(n_max) {
        let nf = n as f64;
        *slot = frac_binomial(FractionalOrder::new(v)?, n as u32)
            * power_term(d, nf - v)?
            * recip_gamma(nf - v + 1.0);
    }
    Ok(c)
}

fn series(c: &[f64; 4], f_hat: f64, terms: [f64; 3], n_max: usize) -> f64 {
    let mut acc = c[0] * f_hat;
    for n in 1..=n_max {
        acc += c[n] * terms[n - 1];
    }
    acc
}

/// Truncated fractional partial of the squared error with respect to one
/// parameter. `rho` holds the owning neuron's sensitivities of orders 1..3;
/// `beta_upstream` is the input feeding the weight, or 1 for a bias.
pub fn fractional_partial(
    param_value: f64,
    lower_bound: f64,
    f_hat: f64,
    rho: [f64; 3],
    beta_upstream: f64,
    v: FractionalOrder,
    n_max: usize,
) -> Result<f64> {
    if n_max != 1 && n_max != 3 {
        return Err(Error::Config(format!("n_max must be 1 or 3, got {n_max}")));
    }
    let c = series_coefficients(param_value - lower_bound, v, n_max)?;
    let terms = [
        rho[0] * beta_power(beta_upstream, 1),
        rho[1] * beta_power(beta_upstream, 2),
        rho[2] * beta_power(beta_upstream, 3),
    ];
    Ok(series(&c, f_hat, terms, n_max))
}

/// Order from the error-driven kernel
/// ν = 2·|(1 − Φ^(−e)) / (1 + Φ^(−e))| + |e|, Φ = max(|ρ|, ε)^(2+e).
///
/// Evaluated as 2·|tanh(e·(2+e)·ln max(|ρ|, ε) / 2)| + |e|, which is the same
/// quantity without overflowing Φ.
///
/// # Panics
///
/// Panics if an input is not finite or `epsilon_phi` is not positive.
pub fn adaptive_order(e_avg: f64, rho_m_avg: f64, epsilon_phi: f64) -> FractionalOrder {
    assert!(
        e_avg.is_finite() && rho_m_avg.is_finite(),
        "kernel inputs must be finite"
    );
    assert!(epsilon_phi > 0.0, "epsilon_phi must be positive");
    let z = e_avg * (2.0 + e_avg) * rho_m_avg.abs().max(epsilon_phi).ln();
    let t = if z.is_nan() {
        0.0
    } else {
        (0.5 * z).tanh().abs()
    };
    FractionalOrder::new(2.0 * t + e_avg.abs()).expect("finite by construction")
}

/// One parameter's inputs to [`order_bounds`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTerm {
    pub value: f64,
    pub lower_bound: f64,
    pub rho: [f64; 3],
    /// Upstream activation, or 1 for a bias.
    pub beta: f64,
}

impl BoundTerm {
    fn products(&self) -> Result<[f64; 3]> {
        let d = self.value - self.lower_bound;
        if !(d > 0.0) {
            return Err(Error::Domain(
                "parameter at or below its lower bound".into(),
            ));
        }
        Ok([1, 2, 3].map(|n| d.powi(n as i32) * self.rho[n - 1] * beta_power(self.beta, n)))
    }

    fn bounding_sum(&self) -> Result<f64> {
        let p = self.products()?;
        Ok((0..3)
            .map(|k| p[k].abs() * recip_gamma((k + 1) as f64))
            .sum())
    }

    fn sigma_sq(&self, v: f64) -> Result<Option<f64>> {
        let p = self.products()?;
        let s: f64 = (0..3)
            .map(|k| p[k].abs() * recip_gamma((k + 1) as f64 - v + 1.0))
            .sum();
        let out = (v / (1.0 - v)).abs() * s;
        Ok(out.is_finite().then_some(out))
    }
}

/// Order-regime thresholds for one weight and one bias.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderBounds {
    /// Below this order the weight's fractional step opposes its gradient.
    pub v_t1: f64,
    pub v_t2: f64,
    /// Above this order (up to 2) the weight's step climbs; absent unless
    /// the threshold falls strictly inside (1, 2).
    pub v_t3: Option<f64>,
    pub v_t4: Option<f64>,
    /// Smaller of the weight and bias error thresholds at the current order.
    pub sigma_l_sq: Option<f64>,
    /// Larger of the two.
    pub sigma_u_sq: Option<f64>,
}

/// Thresholds from the sums S = Σ_{n=1}^{3} |d^n · ρ_n · β^n| / Γ(n):
/// v_T1 = 1/(S_w/F + 1), v_T3 = −1/(S_w/F − 1) when inside (1, 2), and the
/// bias analogues v_T2, v_T4.
pub fn order_bounds(
    f_hat: f64,
    weight: &BoundTerm,
    bias: &BoundTerm,
    v: FractionalOrder,
) -> Result<OrderBounds> {
    if !(f_hat > 0.0) {
        return Err(Error::Precondition(format!(
            "order bounds need a positive error, got {f_hat}"
        )));
    }
    let sw = weight.bounding_sum()? / f_hat;
    let sb = bias.bounding_sum()? / f_hat;
    let climb = |s: f64| {
        let t = -1.0 / (s - 1.0);
        (t > 1.0 && t < 2.0).then_some(t)
    };
    let (a, b) = (weight.sigma_sq(v.value())?, bias.sigma_sq(v.value())?);
    let (lo, hi) = match (a, b) {
        (Some(a), Some(b)) => (Some(a.min(b)), Some(a.max(b))),
        (x, None) | (None, x) => (x, x),
    };
    Ok(OrderBounds {
        v_t1: 1.0 / (sw + 1.0),
        v_t2: 1.0 / (sb + 1.0),
        v_t3: climb(sw),
        v_t4: climb(sb),
        sigma_l_sq: lo,
        sigma_u_sq: hi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Converged,
    /// Every partial vanished but the error did not.
    Saddle,
    Continue,
}

pub fn convergence_check(
    partials: &[f64],
    f_hat: f64,
    stop_tolerance: f64,
    saddle_epsilon: f64,
) -> ConvergenceStatus {
    let max = partials.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if max <= saddle_epsilon {
        if f_hat <= stop_tolerance {
            ConvergenceStatus::Converged
        } else {
            ConvergenceStatus::Saddle
        }
    } else {
        ConvergenceStatus::Continue
    }
}

/// Batch-averaged quantities driving one update.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    /// Mean over samples of Σ_j (q_j − β_j)².
    pub f_hat: f64,
    /// Mean residual over samples and output neurons.
    pub e_avg: f64,
    /// Mean first-order output sensitivity over samples and output neurons.
    pub rho_out_avg: f64,
    /// `terms[n-1]` is the mean of ρ_n · β^n per parameter.
    pub terms: Vec<ParamSet<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub f_hat: f64,
    pub order_v: f64,
    pub params: Vec<f64>,
    pub saddle_perturbed: bool,
}

/// One row per iteration, recorded before that iteration's update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub tracked: Vec<ParamId>,
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum RunStatus {
    /// Used the whole iteration budget.
    Completed,
    Converged,
    /// Stopped by a numeric failure; the trace holds the rows before it.
    Aborted(String),
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub mlp: Mlp,
    pub trace: TrainTrace,
    pub status: RunStatus,
}

const PARALLEL_MIN_SAMPLES: usize = 1024;
const CHUNK: usize = 256;

/// Resolved training state: mask, lower bounds, clamp floors and the
/// perturbation generator.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainerConfig,
    mask: ParamSet<bool>,
    /// (w_inf, b_inf) per layer.
    bounds: Vec<(f64, f64)>,
    floors: ParamSet<f64>,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainerConfig, initial: &Mlp) -> Result<Self> {
        config.validate()?;
        let mask = match &config.trainable {
            Trainable::All => ParamSet::shaped_like(initial, true),
            Trainable::Only(ids) => ParamSet::mask_of(initial, ids)?,
        };
        for &id in &config.tracked {
            initial.get(id)?;
        }
        let values = ParamSet::from_mlp(initial);
        // smallest trainable value of one kind, over `layers`
        let min_of = |weights: bool, layers: std::ops::Range<usize>| {
            let mut lo = f64::INFINITY;
            let mut any = f64::INFINITY;
            for m in layers {
                let (l, ml) = (&values.layers()[m], &mask.layers()[m]);
                let (v, k) = if weights {
                    (&l.weights, &ml.weights)
                } else {
                    (&l.biases, &ml.biases)
                };
                for (x, &on) in v.iter().zip(k) {
                    any = any.min(*x);
                    if on {
                        lo = lo.min(*x);
                    }
                }
            }
            // with nothing trainable any bound below the values works
            if lo.is_finite() {
                lo
            } else {
                any
            }
        };
        let depth = initial.depth();
        let bounds: Vec<(f64, f64)> = (0..depth)
            .map(|m| {
                let scope = match config.bound_scope {
                    BoundScope::Global => 0..depth,
                    BoundScope::PerLayer => m..m + 1,
                };
                (
                    config
                        .w_inf
                        .unwrap_or_else(|| min_of(true, scope.clone()) - config.bound_gap),
                    config
                        .b_inf
                        .unwrap_or_else(|| min_of(false, scope) - config.bound_gap),
                )
            })
            .collect();

        let mut floors = ParamSet::shaped_like(initial, 0.0);
        for (m, layer) in floors.layers_mut().iter_mut().enumerate() {
            let src = &values.layers()[m];
            let on = &mask.layers()[m];
            for (kind, lb, dst, vals, on) in [
                (
                    "weight",
                    bounds[m].0,
                    &mut layer.weights,
                    &src.weights,
                    &on.weights,
                ),
                (
                    "bias",
                    bounds[m].1,
                    &mut layer.biases,
                    &src.biases,
                    &on.biases,
                ),
            ] {
                for ((f, &x), &on) in dst.iter_mut().zip(vals).zip(on) {
                    if on && config.mode == TrainMode::Fsdm && x <= lb {
                        return Err(Error::Precondition(format!(
                            "trainable {kind} {x} is not above its lower bound {lb}"
                        )));
                    }
                    *f = lb + 1e-6 * (x - lb);
                }
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        Ok(Trainer {
            config,
            mask,
            bounds,
            floors,
            rng,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn mask(&self) -> &ParamSet<bool> {
        &self.mask
    }

    /// Resolved (w_inf, b_inf) of each layer.
    pub fn lower_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn orders_needed(&self) -> usize {
        match self.config.mode {
            TrainMode::Classic => 1,
            TrainMode::Fsdm => self.config.n_max,
        }
    }

    /// Averages the squared error, residual, output sensitivity and series
    /// terms over `batch`. Large batches are split into fixed chunks summed
    /// in parallel and combined in chunk order, so results do not depend on
    /// the thread count.
    pub fn batch_stats(&self, mlp: &Mlp, batch: &[Sample]) -> Result<BatchStats> {
        batch_stats(mlp, batch, self.orders_needed(), self.config.residual_sign)
    }

    pub fn order_for(&self, stats: &BatchStats) -> FractionalOrder {
        match (self.config.mode, self.config.order_policy) {
            (TrainMode::Classic, _) => FractionalOrder::ONE,
            (TrainMode::Fsdm, OrderPolicy::Fixed { order }) => order,
            (TrainMode::Fsdm, OrderPolicy::AdaptiveKernel { epsilon_phi }) => {
                adaptive_order(stats.e_avg, stats.rho_out_avg, epsilon_phi)
            }
        }
    }

    /// Mean first-order gradient; zero on frozen parameters.
    pub fn classic_direction(&self, stats: &BatchStats) -> ParamSet<f64> {
        stats.terms[0].zip_map(&self.mask, |&g, &on| if on { g } else { 0.0 })
    }

    /// Mean fractional partials at order `v`; zero on frozen parameters.
    pub fn fsdm_direction(
        &self,
        mlp: &Mlp,
        stats: &BatchStats,
        v: FractionalOrder,
    ) -> Result<ParamSet<f64>> {
        let n_max = self.config.n_max;
        let mut dir = ParamSet::shaped_like(mlp, 0.0);
        for (m, layer) in mlp.layers().iter().enumerate() {
            let on = &self.mask.layers()[m];
            let in_w = layer.in_width();
            let out = &mut dir.layers_mut()[m];
            for (k, &x) in layer.weights().iter().enumerate() {
                if on.weights[k] {
                    let t = [0, 1, 2]
                        .map(|n| stats.terms.get(n).map_or(0.0, |s| s.layers()[m].weights[k]));
                    let id = ParamId::weight(m + 1, k / in_w + 1, k % in_w + 1);
                    out.weights[k] =
                        self.partial_at(id, x - self.bounds[m].0, stats.f_hat, t, v, n_max)?;
                }
            }
            for (k, &x) in layer.biases().iter().enumerate() {
                if on.biases[k] {
                    let t = [0, 1, 2]
                        .map(|n| stats.terms.get(n).map_or(0.0, |s| s.layers()[m].biases[k]));
                    out.biases[k] = self.partial_at(
                        ParamId::bias(m + 1, k + 1),
                        x - self.bounds[m].1,
                        stats.f_hat,
                        t,
                        v,
                        n_max,
                    )?;
                }
            }
        }
        Ok(dir)
    }

    fn partial_at(
        &self,
        id: ParamId,
        d: f64,
        f_hat: f64,
        t: [f64; 3],
        v: FractionalOrder,
        n_max: usize,
    ) -> Result<f64> {
        let c =
            series_coefficients(d, v, n_max).map_err(|e| Error::Numeric(format!("{id}: {e}")))?;
        let p = series(&c, f_hat, t, n_max);
        if p.is_finite() {
            Ok(p)
        } else {
            Err(Error::Numeric(format!(
                "fractional partial of {id} is {p} at order {v}"
            )))
        }
    }

    /// x ← x − μ·g on every trainable parameter.
    pub fn step_classic(&self, mlp: &mut Mlp, batch: &[Sample]) -> Result<()> {
        let stats = self.batch_stats(mlp, batch)?;
        let dir = self.classic_direction(&stats);
        self.apply(mlp, &dir, false)
    }

    /// x ← x − μ·D^ν F on every trainable parameter, clamping anything that
    /// would reach its lower bound.
    pub fn step_fsdm(&self, mlp: &mut Mlp, batch: &[Sample], v: FractionalOrder) -> Result<()> {
        let stats = self.batch_stats(mlp, batch)?;
        let dir = self.fsdm_direction(mlp, &stats, v)?;
        self.apply(mlp, &dir, true)
    }

    fn apply(&self, mlp: &mut Mlp, dir: &ParamSet<f64>, clamp: bool) -> Result<()> {
        let mu = self.config.learning_rate;
        let mut next = mlp.clone();
        for (m, layer) in next.layers_mut().iter_mut().enumerate() {
            let (w_inf, b_inf) = self.bounds[m];
            let on = &self.mask.layers()[m];
            let d = &dir.layers()[m];
            let fl = &self.floors.layers()[m];
            let in_w = layer.in_width();
            for (k, x) in layer.weights_mut().iter_mut().enumerate() {
                if on.weights[k] {
                    let id = ParamId::weight(m + 1, k / in_w + 1, k % in_w + 1);
                    *x = updated(
                        id,
                        *x,
                        mu * d.weights[k],
                        clamp.then_some((w_inf, fl.weights[k])),
                    )?;
                }
            }
            for (k, x) in layer.biases_mut().iter_mut().enumerate() {
                if on.biases[k] {
                    let id = ParamId::bias(m + 1, k + 1);
                    *x = updated(
                        id,
                        *x,
                        mu * d.biases[k],
                        clamp.then_some((b_inf, fl.biases[k])),
                    )?;
                }
            }
        }
        *mlp = next;
        Ok(())
    }

    /// Seeded uniform kick in [−s, s] on every trainable parameter.
    fn perturb(&mut self, mlp: &mut Mlp) {
        let s = self.config.perturbation_scale;
        let clamp = self.config.mode == TrainMode::Fsdm;
        for (m, layer) in mlp.layers_mut().iter_mut().enumerate() {
            let (w_inf, b_inf) = self.bounds[m];
            let on = &self.mask.layers()[m];
            let fl = &self.floors.layers()[m];
            for (k, x) in layer.weights_mut().iter_mut().enumerate() {
                if on.weights[k] {
                    *x += self.rng.gen_range(-s..=s);
                    if clamp && *x <= w_inf {
                        *x = fl.weights[k];
                    }
                }
            }
            for (k, x) in layer.biases_mut().iter_mut().enumerate() {
                if on.biases[k] {
                    *x += self.rng.gen_range(-s..=s);
                    if clamp && *x <= b_inf {
                        *x = fl.biases[k];
                    }
                }
            }
        }
    }

    fn direction(
        &self,
        mlp: &Mlp,
        stats: &BatchStats,
        v: FractionalOrder,
    ) -> Result<ParamSet<f64>> {
        match self.config.mode {
            TrainMode::Classic => Ok(self.classic_direction(stats)),
            TrainMode::Fsdm => self.fsdm_direction(mlp, stats, v),
        }
    }

    /// Runs the configured loop. Configuration problems are errors; numeric
    /// failures end the run with [`RunStatus::Aborted`] and the trace so far.
    pub fn run(&mut self, mlp: &Mlp, data: &Dataset) -> Result<TrainOutcome> {
        data.check_against(mlp)?;
        let mut cur = mlp.clone();
        let mut trace = TrainTrace {
            tracked: self.config.tracked.clone(),
            rows: Vec::with_capacity(self.config.max_iterations),
        };
        let clamp = self.config.mode == TrainMode::Fsdm;
        let mut status = RunStatus::Completed;
        for k in 0..self.config.max_iterations {
            let result = (|| -> Result<(TraceRow, Option<ParamSet<f64>>)> {
                let stats = self.batch_stats(&cur, data.samples())?;
                if !stats.f_hat.is_finite() {
                    return Err(Error::Numeric(format!(
                        "squared error became {}",
                        stats.f_hat
                    )));
                }
                let v = self.order_for(&stats);
                let dir = self.direction(&cur, &stats, v)?;
                let partials: Vec<f64> = dir
                    .iter()
                    .zip(self.mask.iter())
                    .filter(|(_, &on)| on)
                    .map(|(&p, _)| p)
                    .collect();
                let check = convergence_check(
                    &partials,
                    stats.f_hat,
                    self.config.stop_tolerance,
                    self.config.saddle_epsilon,
                );
                let row = TraceRow {
                    iteration: k,
                    f_hat: stats.f_hat,
                    order_v: v.value(),
                    params: self
                        .config
                        .tracked
                        .iter()
                        .map(|&id| cur.get(id).expect("validated"))
                        .collect(),
                    saddle_perturbed: check == ConvergenceStatus::Saddle,
                };
                Ok((row, (check == ConvergenceStatus::Continue).then_some(dir)))
            })();
            let (row, dir) = match result {
                Ok(x) => x,
                Err(e) => {
                    status = RunStatus::Aborted(e.to_string());
                    break;
                }
            };
            let saddle = row.saddle_perturbed;
            trace.rows.push(row);
            let stepped = match dir {
                None if saddle => {
                    self.perturb(&mut cur);
                    Ok(())
                }
                None => {
                    status = RunStatus::Converged;
                    break;
                }
                Some(dir) => match self.config.batch {
                    BatchMode::FullBatch => self.apply(&mut cur, &dir, clamp),
                    BatchMode::PerSample => self.per_sample_pass(&mut cur, data),
                },
            };
            if let Err(e) = stepped {
                status = RunStatus::Aborted(e.to_string());
                break;
            }
        }
        Ok(TrainOutcome {
            mlp: cur,
            trace,
            status,
        })
    }

    fn per_sample_pass(&self, mlp: &mut Mlp, data: &Dataset) -> Result<()> {
        for s in data.samples() {
            let stats = self.batch_stats(mlp, std::slice::from_ref(s))?;
            let v = self.order_for(&stats);
            let dir = self.direction(mlp, &stats, v)?;
            self.apply(mlp, &dir, self.config.mode == TrainMode::Fsdm)?;
        }
        Ok(())
    }
}

fn updated(id: ParamId, x: f64, delta: f64, clamp: Option<(f64, f64)>) -> Result<f64> {
    let mut y = x - delta;
    if !y.is_finite() {
        return Err(Error::Numeric(format!("update of {id} produced {y}")));
    }
    if let Some((lb, floor)) = clamp {
        if y <= lb {
            y = floor;
        }
    }
    Ok(y)
}

struct Accum {
    f_hat: f64,
    e_sum: f64,
    rho_sum: f64,
    terms: Vec<ParamSet<f64>>,
}

impl Accum {
    fn new(mlp: &Mlp, orders: usize) -> Self {
        Accum {
            f_hat: 0.0,
            e_sum: 0.0,
            rho_sum: 0.0,
            terms: vec![ParamSet::shaped_like(mlp, 0.0); orders],
        }
    }

    fn add_sample(&mut self, mlp: &Mlp, s: &Sample, sign: ResidualSign) -> Result<()> {
        let trace = mlp.forward(&s.input)?;
        self.f_hat += squared_error(trace.output(), &s.target)?;
        let flip = if sign == ResidualSign::TargetMinusOutput {
            1.0
        } else {
            -1.0
        };
        for (q, b) in s.target.iter().zip(trace.output()) {
            self.e_sum += flip * (q - b);
        }
        let rho = sensitivities(mlp, &trace, &s.target)?;
        self.rho_sum += rho.get(1, rho.depth() - 1).iter().sum::<f64>();
        accumulate_terms(&trace, &rho, &mut self.terms);
        Ok(())
    }

    fn merge(&mut self, other: Accum) {
        self.f_hat += other.f_hat;
        self.e_sum += other.e_sum;
        self.rho_sum += other.rho_sum;
        for (a, b) in self.terms.iter_mut().zip(&other.terms) {
            a.add_assign(b);
        }
    }
}

/// See [`Trainer::batch_stats`].
pub fn batch_stats(
    mlp: &Mlp,
    batch: &[Sample],
    orders: usize,
    sign: ResidualSign,
) -> Result<BatchStats> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let orders = orders.clamp(1, 3);
    let mut acc = Accum::new(mlp, orders);
    if batch.len() >= PARALLEL_MIN_SAMPLES {
        let parts: Vec<Result<Accum>> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut a = Accum::new(mlp, orders);
                for s in chunk {
                    a.add_sample(mlp, s, sign)?;
                }
                Ok(a)
            })
            .collect();
        for p in parts {
            acc.merge(p?);
        }
    } else {
        for s in batch {
            acc.add_sample(mlp, s, sign)?;
        }
    }
    let n = batch.len() as f64;
    let outputs = n * mlp.output_width() as f64;
    for t in &mut acc.terms {
        t.scale(1.0 / n);
    }
    Ok(BatchStats {
        f_hat: acc.f_hat / n,
        e_avg: acc.e_sum / outputs,
        rho_out_avg: acc.rho_sum / outputs,
        terms: acc.terms,
    })
}

/// Trains a copy of `mlp` on `data`.
pub fn train(mlp: &Mlp, data: &Dataset, config: &TrainerConfig) -> Result<TrainOutcome> {
    Trainer::new(config.clone(), mlp)?.run(mlp, data)
}
