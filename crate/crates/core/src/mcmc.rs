//! Metropolis sampling over weight space: Boltzmann and annealed targets, the
//! minibatch-proposal variant, chain diagnostics and temperature sweeps.
//!
//! The step functions are generic over the state type so the same rules run on
//! weight vectors and on small enumerable toy spaces.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::LabelledDataset;
use crate::error::{domain, Error, Result};
use crate::perceptron::GaussianClassSpec;
use crate::predictors::{empirical_risk, empirical_risk_on, Constraint, PredictorSpec, WeightVector};
use crate::rng::{self, SeedTree, StreamRng};
use crate::scalar::Scalar;

/// Symmetric proposal kernel.
pub trait Proposal<W> {
    fn propose(&self, w: &W, rng: &mut StreamRng) -> W;
}

/// Isotropic Gaussian step; on the sphere the result is renormalised, which
/// keeps the kernel symmetric because its density depends only on the angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProposal<S> {
    pub scale: S,
}

impl<S: Scalar> Proposal<WeightVector<S>> for GaussianProposal<S> {
    fn propose(&self, w: &WeightVector<S>, rng: &mut StreamRng) -> WeightVector<S> {
        propose(w, self.scale, rng)
    }
}

pub fn propose<S: Scalar>(w: &WeightVector<S>, scale: S, rng: &mut StreamRng) -> WeightVector<S> {
    let values: Vec<S> = w.values().iter().map(|&v| v + scale * rng::standard_normal::<S, _>(rng)).collect();
    match w.constraint() {
        Constraint::Unconstrained => WeightVector::from_parts_unchecked(values, Constraint::Unconstrained),
        Constraint::UnitSphere => {
            let n = values.iter().map(|&v| v * v).sum::<S>().sqrt();
            WeightVector::from_parts_unchecked(values.into_iter().map(|v| v / n).collect(), Constraint::UnitSphere)
        }
    }
}

/// Current point, its cached acceptance risk and counters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<W, S> {
    pub w: W,
    pub risk: S,
    pub steps: u64,
    pub accepts: u64,
}

impl<W, S: Scalar> ChainState<W, S> {
    pub fn new(w: W, risk: S) -> Result<Self> {
        check_finite(risk, "initial state")?;
        Ok(Self { w, risk, steps: 0, accepts: 0 })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepts as f64 / self.steps as f64
        }
    }
}

fn check_finite<S: Scalar>(r: S, what: &str) -> Result<()> {
    if r.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("risk {r} at {what}")))
    }
}

fn uniform<S: Scalar>(rng: &mut StreamRng) -> S {
    S::lit(rng.random::<f64>())
}

/// Accepts downhill and level moves outright, uphill with probability
/// exp(−β·ΔR).
fn boltzmann_accept<S: Scalar>(beta: S, current: S, candidate: S, rng: &mut StreamRng) -> bool {
    if candidate <= current {
        return true;
    }
    let d = beta * (candidate - current);
    d == S::zero() || uniform::<S>(rng) < (-d).exp()
}

/// One Metropolis step targeting exp(−β·R). Returns whether the move was taken.
pub fn metropolis_step<W, S, P, F>(state: &mut ChainState<W, S>, beta: S, proposal: &P, risk: F, rng: &mut StreamRng) -> Result<bool>
where
    S: Scalar,
    P: Proposal<W>,
    F: Fn(&W) -> Result<S>,
{
    let candidate = proposal.propose(&state.w, rng);
    let r = risk(&candidate)?;
    check_finite(r, &format!("step {}", state.steps))?;
    state.steps += 1;
    let take = boltzmann_accept(beta, state.risk, r, rng);
    if take {
        state.w = candidate;
        state.risk = r;
        state.accepts += 1;
    }
    Ok(take)
}

/// One Metropolis step targeting (1 − R)^m, computed in log space. Moves into
/// R = 1 are rejected for m > 0 and moves out of it always accepted.
pub fn annealed_step<W, S, P, F>(state: &mut ChainState<W, S>, m: S, proposal: &P, risk: F, rng: &mut StreamRng) -> Result<bool>
where
    S: Scalar,
    P: Proposal<W>,
    F: Fn(&W) -> Result<S>,
{
    let candidate = proposal.propose(&state.w, rng);
    let r = risk(&candidate)?;
    check_finite(r, &format!("step {}", state.steps))?;
    state.steps += 1;
    let one = S::one();
    let take = if m == S::zero() || r == state.risk {
        true
    } else if r >= one {
        false
    } else if state.risk >= one {
        true
    } else {
        let log_ratio = m * ((-r).ln_1p() - (-state.risk).ln_1p());
        log_ratio >= S::zero() || uniform::<S>(rng) < log_ratio.exp()
    };
    if take {
        state.w = candidate;
        state.risk = r;
        state.accepts += 1;
    }
    Ok(take)
}

/// Minibatch-proposal step: `n_inner` Metropolis steps on fresh minibatches
/// (drawn without replacement from `n_data` rows) build a compound proposal
/// w_n, accepted if R(w_n) ≤ R_B(w_n) on the last minibatch and otherwise with
/// probability exp(−β·(R(w_n) − R_B(w_n))). On rejection the state stays at w_0.
///
/// If no inner step moves, w_n = w_0 and the step returns `false` without
/// touching the state beyond the step counter.
#[allow(clippy::too_many_arguments)]
pub fn minibatch_proposal_step<W, S, P, F, B>(
    state: &mut ChainState<W, S>,
    beta: S,
    n_inner: usize,
    batch_size: usize,
    n_data: usize,
    proposal: &P,
    full_risk: F,
    batch_risk: B,
    rng: &mut StreamRng,
) -> Result<bool>
where
    W: Clone,
    S: Scalar,
    P: Proposal<W>,
    F: Fn(&W) -> Result<S>,
    B: Fn(&W, &[usize]) -> Result<S>,
{
    if n_inner == 0 {
        return domain("minibatch proposals need at least one inner step");
    }
    if batch_size == 0 || batch_size > n_data {
        return domain(format!("batch size {batch_size} outside [1, {n_data}]"));
    }
    let mut w = state.w.clone();
    let mut moved = false;
    let mut last_batch_risk = S::zero();
    for _ in 0..n_inner {
        let batch = index::sample(rng, n_data, batch_size).into_vec();
        let current = batch_risk(&w, &batch)?;
        let candidate = proposal.propose(&w, rng);
        let r = batch_risk(&candidate, &batch)?;
        check_finite(r, &format!("inner step of outer step {}", state.steps))?;
        if boltzmann_accept(beta, current, r, rng) {
            w = candidate;
            moved = true;
            last_batch_risk = r;
        } else {
            last_batch_risk = current;
        }
    }
    state.steps += 1;
    if !moved {
        return Ok(false);
    }
    let full = full_risk(&w)?;
    check_finite(full, &format!("outer step {}", state.steps))?;
    let take = boltzmann_accept(beta, last_batch_risk, full, rng);
    if take {
        state.w = w;
        state.risk = full;
        state.accepts += 1;
    }
    Ok(take)
}

/// Risk functions used by weight-space chains: one drives acceptance, the
/// other is what gets reported.
pub trait RiskModel<S: Scalar>: Sync {
    fn acceptance_risk(&self, w: &WeightVector<S>) -> Result<S>;
    fn report_risk(&self, w: &WeightVector<S>) -> Result<S>;
    /// Whether the two risks coincide, letting chains skip the second evaluation.
    fn same_risk(&self) -> bool {
        false
    }
}

/// Risk models whose acceptance risk is an average over rows.
pub trait MinibatchRisk<S: Scalar>: RiskModel<S> {
    fn acceptance_rows(&self) -> usize;
    fn batch_risk(&self, w: &WeightVector<S>, rows: &[usize]) -> Result<S>;
}

/// Exact perceptron risk Φ(−Δ cos θ): no data, no sampling noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPerceptronRisk<S> {
    pub spec: GaussianClassSpec<S>,
}

impl<S: Scalar> RiskModel<S> for ExactPerceptronRisk<S> {
    fn acceptance_risk(&self, w: &WeightVector<S>) -> Result<S> {
        self.spec.risk_of(w.values())
    }

    fn report_risk(&self, w: &WeightVector<S>) -> Result<S> {
        self.spec.risk_of(w.values())
    }

    fn same_risk(&self) -> bool {
        true
    }
}

/// Zero-one risk of a predictor on an acceptance (training) set and a report
/// (held-out) set.
#[derive(Debug, Clone, Copy)]
pub struct DatasetRisk<'a, S> {
    pub predictor: &'a PredictorSpec,
    pub acceptance: &'a LabelledDataset<S>,
    pub report: &'a LabelledDataset<S>,
}

impl<S: Scalar> RiskModel<S> for DatasetRisk<'_, S> {
    fn acceptance_risk(&self, w: &WeightVector<S>) -> Result<S> {
        empirical_risk(self.predictor, w, self.acceptance, None)
    }

    fn report_risk(&self, w: &WeightVector<S>) -> Result<S> {
        empirical_risk(self.predictor, w, self.report, None)
    }

    fn same_risk(&self) -> bool {
        std::ptr::eq(self.acceptance, self.report)
    }
}

impl<S: Scalar> MinibatchRisk<S> for DatasetRisk<'_, S> {
    fn acceptance_rows(&self) -> usize {
        self.acceptance.n()
    }

    fn batch_risk(&self, w: &WeightVector<S>, rows: &[usize]) -> Result<S> {
        empirical_risk_on(self.predictor, w, self.acceptance, rows)
    }
}

/// Stationary distribution a chain targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target<S> {
    /// ∝ exp(−β·R)
    Boltzmann { beta: S },
    /// ∝ (1 − R)^m
    Annealed { m: S },
}

impl<S: Scalar> Target<S> {
    pub fn parameter(&self) -> S {
        match *self {
            Self::Boltzmann { beta } => beta,
            Self::Annealed { m } => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig<S> {
    pub target: Target<S>,
    pub proposal_scale: S,
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub seed: u64,
    /// Tune the proposal scale towards 20–40% acceptance before burn-in.
    pub calibrate: bool,
    /// Upper bound on calibrated scales.
    pub max_proposal_scale: S,
}

impl<S: Scalar> ChainConfig<S> {
    pub fn boltzmann(beta: S) -> Self {
        Self {
            target: Target::Boltzmann { beta },
            proposal_scale: S::lit(0.1),
            burn_in: 1000,
            samples: 1000,
            thin: 10,
            seed: 0,
            calibrate: true,
            max_proposal_scale: S::lit(10.0),
        }
    }

    pub fn with_target(&self, target: Target<S>) -> Self {
        Self { target, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 {
            return Err(Error::Config(format!("samples ({}) and thin ({}) must be positive", self.samples, self.thin)));
        }
        if !(self.proposal_scale > S::zero()) || !self.proposal_scale.is_finite() {
            return Err(Error::Config(format!("proposal scale must be positive, got {}", self.proposal_scale)));
        }
        if !(self.max_proposal_scale >= self.proposal_scale) {
            return Err(Error::Config("max_proposal_scale is below proposal_scale".into()));
        }
        let t = self.target.parameter();
        if !(t >= S::zero()) || !t.is_finite() {
            return Err(Error::Config(format!("target parameter must be finite and non-negative, got {t}")));
        }
        Ok(())
    }
}

/// One recorded sample. `accepted` counts accepted moves since the previous record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord<S> {
    pub step: u64,
    pub risk_acc: S,
    pub risk_rep: S,
    pub accepted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary<S> {
    pub mean: S,
    pub stderr: S,
    pub acceptance_rate: S,
    pub ess: S,
    pub proposal_scale: S,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun<S> {
    pub records: Vec<ChainRecord<S>>,
    pub summary: ChainSummary<S>,
    pub final_weights: WeightVector<S>,
}

const CALIBRATION_STEPS: usize = 200;
const CALIBRATION_ROUNDS: usize = 40;
const BATCHES: usize = 20;

fn step<S: Scalar, M: RiskModel<S>>(
    state: &mut ChainState<WeightVector<S>, S>,
    target: Target<S>,
    scale: S,
    model: &M,
    rng: &mut StreamRng,
) -> Result<bool> {
    let proposal = GaussianProposal { scale };
    let risk = |w: &WeightVector<S>| model.acceptance_risk(w);
    match target {
        Target::Boltzmann { beta } => metropolis_step(state, beta, &proposal, risk, rng),
        Target::Annealed { m } => annealed_step(state, m, &proposal, risk, rng),
    }
}

fn calibrate<S: Scalar, M: RiskModel<S>>(
    state: &mut ChainState<WeightVector<S>, S>,
    config: &ChainConfig<S>,
    model: &M,
    rng: &mut StreamRng,
) -> Result<S> {
    let (lo, hi) = (S::lit(0.2), S::lit(0.4));
    let floor = config.proposal_scale * S::lit(1e-6);
    let mut scale = config.proposal_scale;
    for _ in 0..CALIBRATION_ROUNDS {
        let mut taken = 0usize;
        for _ in 0..CALIBRATION_STEPS {
            taken += usize::from(step(state, config.target, scale, model, rng)?);
        }
        let rate = S::from_usize_lossy(taken) / S::from_usize_lossy(CALIBRATION_STEPS);
        if rate < lo {
            scale = (scale * S::lit(0.6)).max(floor);
        } else if rate > hi {
            if scale >= config.max_proposal_scale {
                break;
            }
            scale = (scale * S::lit(1.6)).min(config.max_proposal_scale);
        } else {
            break;
        }
    }
    Ok(scale)
}

/// Mean, batch-means standard error and effective sample size.
pub fn batch_means<S: Scalar>(xs: &[S]) -> (S, S, S) {
    let n = xs.len();
    let nf = S::from_usize_lossy(n);
    let mean = xs.iter().copied().sum::<S>() / nf;
    if n < 2 {
        return (mean, S::zero(), nf);
    }
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<S>() / (nf - S::one());
    if n < 2 * BATCHES {
        return (mean, (var / nf).sqrt(), nf);
    }
    let len = n / BATCHES;
    let means: Vec<S> = xs.chunks_exact(len).take(BATCHES).map(|c| c.iter().copied().sum::<S>() / S::from_usize_lossy(len)).collect();
    let b = S::from_usize_lossy(BATCHES);
    let grand = means.iter().copied().sum::<S>() / b;
    let var_b = means.iter().map(|&m| (m - grand) * (m - grand)).sum::<S>() / (b - S::one());
    let stderr = (var_b / b).sqrt();
    let ess = if var_b > S::zero() { (var / (var_b / S::from_usize_lossy(len))).min(nf) } else { nf };
    (mean, stderr, ess)
}

/// Runs one chain from `init` with the given generator: optional calibration,
/// burn-in, then `samples` records `thin` steps apart. Report risk is only
/// evaluated at record time.
pub fn run_chain_with_rng<S: Scalar, M: RiskModel<S>>(
    config: &ChainConfig<S>,
    init: WeightVector<S>,
    model: &M,
    rng: &mut StreamRng,
) -> Result<ChainRun<S>> {
    config.validate()?;
    let risk0 = model.acceptance_risk(&init)?;
    let mut state = ChainState::new(init, risk0)?;
    let scale = if config.calibrate { calibrate(&mut state, config, model, rng)? } else { config.proposal_scale };
    for _ in 0..config.burn_in {
        step(&mut state, config.target, scale, model, rng)?;
    }
    let (steps0, accepts0) = (state.steps, state.accepts);
    let mut records = Vec::with_capacity(config.samples);
    let mut report = if model.same_risk() { state.risk } else { model.report_risk(&state.w)? };
    for _ in 0..config.samples {
        let mut accepted = 0u64;
        for _ in 0..config.thin {
            accepted += u64::from(step(&mut state, config.target, scale, model, rng)?);
        }
        if accepted > 0 {
            report = if model.same_risk() { state.risk } else { model.report_risk(&state.w)? };
        }
        records.push(ChainRecord { step: state.steps, risk_acc: state.risk, risk_rep: report, accepted });
    }
    debug_assert_eq!(model.acceptance_risk(&state.w).ok(), Some(state.risk));
    let reported: Vec<S> = records.iter().map(|r| r.risk_rep).collect();
    let (mean, stderr, ess) = batch_means(&reported);
    let sampled_steps = state.steps - steps0;
    let summary = ChainSummary {
        mean,
        stderr,
        acceptance_rate: S::lit((state.accepts - accepts0) as f64 / sampled_steps as f64),
        ess,
        proposal_scale: scale,
        steps: state.steps,
    };
    Ok(ChainRun { records, summary, final_weights: state.w })
}

/// [`run_chain_with_rng`] on stream `[CHAIN, 0, 0]` of `config.seed`.
pub fn run_chain<S: Scalar, M: RiskModel<S>>(config: &ChainConfig<S>, init: WeightVector<S>, model: &M) -> Result<ChainRun<S>> {
    let mut rng = chain_stream(config.seed, 0, 0);
    run_chain_with_rng(config, init, model, &mut rng)
}

/// Stream for chain `chain` at grid position `grid_index`.
pub fn chain_stream(seed: u64, grid_index: usize, chain: usize) -> StreamRng {
    SeedTree::new(seed).stream(&[rng::domain::CHAIN, grid_index as u64, chain as u64])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<S> {
    pub beta: S,
    pub risk: S,
    pub stderr: S,
    pub acceptance: S,
    pub ess: S,
}

/// Mean reported risk against inverse temperature, β strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannCurve<S> {
    points: Vec<CurvePoint<S>>,
}

impl<S: Scalar> BoltzmannCurve<S> {
    pub fn new(points: Vec<CurvePoint<S>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("Boltzmann curve has no points".into()));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1].beta > w[0].beta)) {
            return domain(format!("inverse temperatures must increase strictly: {} then {}", w[0].beta, w[1].beta));
        }
        if let Some(p) = points.iter().find(|p| !(p.stderr >= S::zero()) || !p.risk.is_finite()) {
            return domain(format!("invalid curve point at beta {}: risk {}, stderr {}", p.beta, p.risk, p.stderr));
        }
        Ok(Self { points })
    }

    /// Noise-free curve from exact risks.
    pub fn from_exact(betas: &[S], risks: &[S]) -> Result<Self> {
        if betas.len() != risks.len() {
            return Err(Error::DimensionMismatch { expected: betas.len(), got: risks.len() });
        }
        Self::new(
            betas
                .iter()
                .zip(risks)
                .map(|(&beta, &risk)| CurvePoint { beta, risk, stderr: S::zero(), acceptance: S::one(), ess: S::infinity() })
                .collect(),
        )
    }

    pub fn points(&self) -> &[CurvePoint<S>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Each chain carries its final state to the next grid point.
    Warm,
    /// Every (grid point, chain) pair starts from its initial weights.
    Cold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep<S> {
    pub curve: BoltzmannCurve<S>,
    /// `runs[grid_index][chain]`.
    pub runs: Vec<Vec<ChainRun<S>>>,
}

fn combine<S: Scalar>(parameter: S, runs: &[ChainRun<S>]) -> CurvePoint<S> {
    let k = S::from_usize_lossy(runs.len());
    CurvePoint {
        beta: parameter,
        risk: runs.iter().map(|r| r.summary.mean).sum::<S>() / k,
        stderr: runs.iter().map(|r| r.summary.stderr * r.summary.stderr).sum::<S>().sqrt() / k,
        acceptance: runs.iter().map(|r| r.summary.acceptance_rate).sum::<S>() / k,
        ess: runs.iter().map(|r| r.summary.ess).sum(),
    }
}

/// Runs `chains` independent chains at every target of a strictly increasing
/// grid. Chain c at grid index i always draws from `chain_stream(seed, i, c)`,
/// so the output does not depend on thread scheduling.
pub fn sweep<S, M, I>(targets: &[Target<S>], base: &ChainConfig<S>, chains: usize, start: StartMode, init: I, model: &M) -> Result<Sweep<S>>
where
    S: Scalar,
    M: RiskModel<S>,
    I: Fn(usize) -> Result<WeightVector<S>> + Sync,
{
    if chains == 0 {
        return Err(Error::Config("need at least one chain".into()));
    }
    if targets.is_empty() {
        return Err(Error::Empty("target grid".into()));
    }
    base.validate()?;
    let per_chain: Vec<Vec<ChainRun<S>>> = match start {
        StartMode::Warm => (0..chains)
            .into_par_iter()
            .map(|c| {
                let mut w = init(c)?;
                let mut runs = Vec::with_capacity(targets.len());
                for (i, &t) in targets.iter().enumerate() {
                    let run = run_chain_with_rng(&base.with_target(t), w, model, &mut chain_stream(base.seed, i, c))?;
                    w = run.final_weights.clone();
                    runs.push(run);
                }
                Ok(runs)
            })
            .collect::<Result<_>>()?,
        StartMode::Cold => {
            let flat: Vec<ChainRun<S>> = (0..chains * targets.len())
                .into_par_iter()
                .map(|j| {
                    let (c, i) = (j / targets.len(), j % targets.len());
                    run_chain_with_rng(&base.with_target(targets[i]), init(c)?, model, &mut chain_stream(base.seed, i, c))
                })
                .collect::<Result<_>>()?;
            let mut it = flat.into_iter();
            (0..chains).map(|_| it.by_ref().take(targets.len()).collect()).collect()
        }
    };
    let runs: Vec<Vec<ChainRun<S>>> = (0..targets.len()).map(|i| per_chain.iter().map(|c| c[i].clone()).collect()).collect();
    let points = targets.iter().zip(&runs).map(|(t, r)| combine(t.parameter(), r)).collect();
    Ok(Sweep { curve: BoltzmannCurve::new(points)?, runs })
}

/// Boltzmann sweep over an increasing β grid.
pub fn boltzmann_sweep<S, M, I>(betas: &[S], base: &ChainConfig<S>, chains: usize, start: StartMode, init: I, model: &M) -> Result<Sweep<S>>
where
    S: Scalar,
    M: RiskModel<S>,
    I: Fn(usize) -> Result<WeightVector<S>> + Sync,
{
    let targets: Vec<Target<S>> = betas.iter().map(|&beta| Target::Boltzmann { beta }).collect();
    sweep(&targets, base, chains, start, init, model)
}

/// A three-state weight space with twelve data points, small enough to
/// enumerate the stationary distribution exactly.
pub mod toy {
    use super::*;

    pub const POINTS: usize = 12;
    /// Misclassified point count for each state.
    pub const ERRORS: [usize; 3] = [1, 5, 9];

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub enum Sampler {
        Metropolis { beta: f64 },
        Annealed { m: f64 },
        Minibatch { beta: f64, n_inner: usize, batch_size: usize },
    }

    /// Moves to one of the two other states uniformly.
    #[derive(Debug, Clone, Copy)]
    pub struct OtherState;

    impl Proposal<usize> for OtherState {
        fn propose(&self, w: &usize, rng: &mut StreamRng) -> usize {
            (w + 1 + rng.random_range(0..2)) % 3
        }
    }

    /// State k misclassifies the first ERRORS[k] points.
    pub fn loss(state: usize, point: usize) -> bool {
        point < ERRORS[state]
    }

    pub fn risk(state: usize) -> f64 {
        ERRORS[state] as f64 / POINTS as f64
    }

    pub fn batch_risk(state: usize, rows: &[usize]) -> f64 {
        rows.iter().filter(|&&i| loss(state, i)).count() as f64 / rows.len() as f64
    }

    /// Normalised target weights of a sampler.
    pub fn target(sampler: Sampler) -> [f64; 3] {
        let w: Vec<f64> = (0..3)
            .map(|s| match sampler {
                Sampler::Metropolis { beta } | Sampler::Minibatch { beta, .. } => (-beta * risk(s)).exp(),
                Sampler::Annealed { m } => (1.0 - risk(s)).powf(m),
            })
            .collect();
        let z: f64 = w.iter().sum();
        [w[0] / z, w[1] / z, w[2] / z]
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct ToyRun {
        pub visits: [u64; 3],
        pub transitions: [[u64; 3]; 3],
    }

    impl ToyRun {
        pub fn frequencies(&self) -> [f64; 3] {
            let n: u64 = self.visits.iter().sum();
            self.visits.map(|v| v as f64 / n as f64)
        }
    }

    /// Runs `steps` steps from state 0 and tallies the state after each step.
    pub fn simulate(sampler: Sampler, steps: u64, seed: u64) -> Result<ToyRun> {
        let mut rng = chain_stream(seed, 0, 0);
        let mut state = ChainState::new(0usize, risk(0))?;
        let mut run = ToyRun { visits: [0; 3], transitions: [[0; 3]; 3] };
        let r = |s: &usize| Ok(risk(*s));
        for _ in 0..steps {
            let from = state.w;
            match sampler {
                Sampler::Metropolis { beta } => {
                    metropolis_step(&mut state, beta, &OtherState, r, &mut rng)?;
                }
                Sampler::Annealed { m } => {
                    annealed_step(&mut state, m, &OtherState, r, &mut rng)?;
                }
                Sampler::Minibatch { beta, n_inner, batch_size } => {
                    let b = |s: &usize, rows: &[usize]| Ok(batch_risk(*s, rows));
                    minibatch_proposal_step(&mut state, beta, n_inner, batch_size, POINTS, &OtherState, r, b, &mut rng)?;
                }
            }
            run.visits[state.w] += 1;
            run.transitions[from][state.w] += 1;
        }
        Ok(run)
    }

    pub fn total_variation(a: &[f64; 3], b: &[f64; 3]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
    }
}
