//! Subcommand implementations. Each turns a resolved parameter record into a
//! [`Report`].

use std::path::Path;

use anyhow::{bail, Context};
use risklab::datasets::{gen_gaussian_pair, load_idx, split, teacher_relabel};
use risklab::entropy::{predicted_annealed_risk, quadratic_fit, reconstruct, EntropyCurve, EntropyPoint};
use risklab::gardner::{extrapolate_product_limit, solve_saddle};
use risklab::gibbs::{annealed_mu, gibbs_risk_integral, gibbs_risk_saddle};
use risklab::mcmc::{sweep, CurvePoint, DatasetRisk, ExactPerceptronRisk, RiskModel, StartMode, Target};
use risklab::perceptron::{
    boltzmann_risk_exact, hebbian_asymptote, hebbian_expected_risk, hebbian_simulate, risk_entropy, risk_entropy_derivative,
    risk_entropy_per_feature_limit,
};
use risklab::predictors::{random_weights, random_weights_stream, PredictorSpec};
use risklab::{BoltzmannCurve, ChainConfig, GaussianClassSpec, LabelledDataset, WeightVector};
use serde_json::json;

use crate::output::{dataset_table, read_columns, read_dataset, DatasetRecord, Report, Table};
use crate::params::*;

fn gaussian(p: usize, delta: f64) -> anyhow::Result<GaussianClassSpec> {
    Ok(GaussianClassSpec::axis_aligned(p, delta)?)
}

pub fn perceptron_entropy(prm: &PerceptronEntropyParams) -> anyhow::Result<Report> {
    let spec = gaussian(prm.p, prm.delta)?;
    let r_min = spec.min_risk();
    let grid: Vec<f64> = if prm.r_grid.is_empty() {
        if prm.points == 0 {
            bail!("points must be positive");
        }
        let width = 1.0 - 2.0 * r_min;
        (0..prm.points).map(|k| r_min + width * (k as f64 + 0.5) / prm.points as f64).collect()
    } else {
        prm.r_grid.clone()
    };
    let mut t = Table::new("perceptron_entropy", &["r", "s", "ds_dr", "s_per_feature_limit"]);
    for r in grid {
        t.push(vec![
            r.into(),
            risk_entropy(r, &spec)?.into(),
            risk_entropy_derivative(r, &spec)?.into(),
            risk_entropy_per_feature_limit(r, prm.delta)?.into(),
        ]);
    }
    Ok(Report { results: json!({ "min_risk": r_min }), tables: vec![t], ..Report::default() })
}

pub fn boltzmann_risk(prm: &BoltzmannRiskParams) -> anyhow::Result<Report> {
    let spec = gaussian(prm.p, prm.delta)?;
    let mut t = Table::new("boltzmann_risk", &["beta", "risk"]);
    for &beta in &prm.beta_grid {
        t.push(vec![beta.into(), boltzmann_risk_exact(beta, &spec)?.into()]);
    }
    Ok(Report { tables: vec![t], ..Report::default() })
}

pub fn hebbian(prm: &HebbianParams) -> anyhow::Result<Report> {
    let spec = gaussian(prm.p, prm.delta)?;
    let mut t = Table::new("hebbian", &["m", "risk", "asymptote"]);
    for &m in &prm.m_grid {
        t.push(vec![m.into(), hebbian_expected_risk(m, &spec)?.into(), hebbian_asymptote(m, &spec)?.into()]);
    }
    Ok(Report { tables: vec![t], ..Report::default() })
}

pub fn gardner(prm: &GardnerParams) -> anyhow::Result<Report> {
    let mut t = Table::new("gardner", &["alpha", "q", "r", "r_times_alpha", "residual"]);
    let mut solutions = Vec::with_capacity(prm.alpha.len());
    for &alpha in &prm.alpha {
        let sol = solve_saddle(alpha)?;
        let st = sol.state;
        t.push(vec![alpha.into(), st.q.into(), st.r.into(), (st.r * alpha).into(), sol.residual.into()]);
        solutions.push(sol);
    }
    let limit = extrapolate_product_limit(&solutions).ok();
    Ok(Report { tables: vec![t], results: json!({ "extrapolated_r_times_alpha": limit }), ..Report::default() })
}

pub fn gibbs_annealed(prm: &GibbsAnnealedParams) -> anyhow::Result<Report> {
    let spec = gaussian(prm.p, prm.delta)?;
    let bracket = (spec.min_risk() + 1e-12, 0.5);
    let mut t = Table::new("gibbs_annealed", &["m", "saddle_risk", "integral_risk"]);
    for &m in &prm.m_grid {
        let model = annealed_mu(m);
        let saddle = gibbs_risk_saddle(|r| risk_entropy_derivative(r, &spec).unwrap_or(f64::NAN), &model, bracket)?;
        let integral = gibbs_risk_integral(|r| risk_entropy(r, &spec).unwrap_or(f64::NEG_INFINITY), &model, None)?;
        t.push(vec![m.into(), saddle.into(), integral.into()]);
    }
    Ok(Report { tables: vec![t], ..Report::default() })
}

pub fn simulate_hebbian(prm: &SimulateHebbianParams) -> anyhow::Result<Report> {
    let spec = gaussian(prm.p, prm.delta)?;
    let mut t = Table::new("hebbian_simulation", &["m", "mean", "stderr", "exact"]);
    for (i, &m) in prm.m_grid.iter().enumerate() {
        // each m gets its own seed branch so grids can be extended
        let sim = hebbian_simulate(m, &spec, prm.runs, prm.seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))?;
        t.push(vec![m.into(), sim.mean.into(), sim.stderr.into(), hebbian_expected_risk(m, &spec)?.into()]);
    }
    Ok(Report { tables: vec![t], steps: prm.runs as u64 * prm.m_grid.iter().sum::<u64>(), ..Report::default() })
}

pub fn gen_gaussian(prm: &GenGaussianParams) -> anyhow::Result<Report> {
    let data = gen_gaussian_pair(&gaussian(prm.p, prm.delta)?, prm.n, prm.seed)?;
    Ok(Report {
        datasets: vec![DatasetRecord::new("generated", "gaussian_pair", &data)],
        tables: vec![dataset_table("dataset", &data)],
        ..Report::default()
    })
}

pub fn load_idx_cmd(prm: &LoadIdxParams) -> anyhow::Result<Report> {
    let images = crate::params::required(&prm.images, "images")?;
    let labels = crate::params::required(&prm.labels, "labels")?;
    let mut data: LabelledDataset = load_idx(images, labels)?;
    if prm.limit > 0 && prm.limit < data.n() {
        data = data.select(&(0..prm.limit).collect::<Vec<_>>())?;
    }
    Ok(Report {
        datasets: vec![DatasetRecord::new("loaded", &images.display().to_string(), &data)],
        tables: vec![dataset_table("dataset", &data)],
        results: json!({ "pixel_scaling": "byte/255", "label_counts": data.label_counts() }),
        ..Report::default()
    })
}

pub fn relabel(prm: &RelabelParams) -> anyhow::Result<Report> {
    let input = crate::params::required(&prm.input, "input")?;
    let data = read_dataset(input)?;
    let spec = PredictorSpec::mlp(data.p(), prm.layer_sizes.clone())?;
    let teacher = random_weights(&spec, prm.teacher_scale, prm.seed)?;
    let relabelled = teacher_relabel(&data, &spec, &teacher)?;
    let mut blob = Vec::new();
    teacher.write_to(&mut blob)?;
    Ok(Report {
        datasets: vec![DatasetRecord::new("input", &input.display().to_string(), &data), DatasetRecord::new("relabelled", "teacher", &relabelled)],
        tables: vec![dataset_table("dataset", &relabelled)],
        blobs: vec![("teacher.bin".into(), blob)],
        results: json!({
            "teacher_spec": spec,
            "label_counts": relabelled.label_counts(),
            "collision_probability": relabelled.collision_probability(),
        }),
        ..Report::default()
    })
}

/// Settings shared by both sampling commands.
struct SamplerSettings<'a> {
    model: ModelKind,
    p: usize,
    delta: f64,
    dataset: &'a Path,
    n: usize,
    holdout_fraction: f64,
    layer_sizes: &'a [usize],
    weight_scale: f64,
    sphere: bool,
    chains: usize,
    start: Start,
    config: ChainConfig,
}

fn run_sweep<M, I>(label: &str, targets: &[Target<f64>], s: &SamplerSettings<'_>, init: I, model: &M, report: &mut Report) -> anyhow::Result<()>
where
    M: RiskModel<f64>,
    I: Fn(usize) -> risklab::Result<WeightVector> + Sync,
{
    let start = match s.start {
        Start::Warm => StartMode::Warm,
        Start::Cold => StartMode::Cold,
    };
    let result = sweep(targets, &s.config, s.chains, start, init, model)?;
    let mut curve = Table::new("curve", &[label, "risk", "stderr", "acceptance", "ess"]);
    for pt in result.curve.points() {
        curve.push(vec![pt.beta.into(), pt.risk.into(), pt.stderr.into(), pt.acceptance.into(), pt.ess.into()]);
    }
    report.tables.push(curve);
    let mut scales = Vec::new();
    for (i, runs) in result.runs.iter().enumerate() {
        for (c, run) in runs.iter().enumerate() {
            let mut t = Table::new(format!("chain_t{i:02}_c{c:02}"), &["step", "risk_acc", "risk_rep", "accepted"]);
            for r in &run.records {
                t.push(vec![r.step.into(), r.risk_acc.into(), r.risk_rep.into(), r.accepted.into()]);
            }
            report.tables.push(t);
            report.steps += run.summary.steps;
            scales.push(
                json!({ "target_index": i, "chain": c, "proposal_scale": run.summary.proposal_scale, "acceptance": run.summary.acceptance_rate }),
            );
        }
    }
    report.results = json!({ "chains": scales });
    Ok(())
}

fn sample(label: &str, targets: Vec<Target<f64>>, s: SamplerSettings<'_>) -> anyhow::Result<Report> {
    let mut report = Report::default();
    let seed = s.config.seed;
    match s.model {
        ModelKind::Perceptron => {
            let model = ExactPerceptronRisk { spec: gaussian(s.p, s.delta)? };
            let predictor = PredictorSpec::sphere_linear(s.p)?;
            let init = |c: usize| random_weights_stream(&predictor, s.weight_scale, seed, c as u64);
            run_sweep(label, &targets, &s, init, &model, &mut report)?;
        }
        ModelKind::Mlp => {
            let (data, source) = if s.dataset.as_os_str().is_empty() {
                (gen_gaussian_pair(&gaussian(s.p, s.delta)?, s.n, seed)?, "gaussian_pair".to_string())
            } else {
                (read_dataset(s.dataset)?, s.dataset.display().to_string())
            };
            let (train, hold) = if s.holdout_fraction > 0.0 {
                let (a, b) = split(&data, 1.0 - s.holdout_fraction, seed)?;
                (a, Some(b))
            } else {
                (data, None)
            };
            let report_data = hold.as_ref().unwrap_or(&train);
            report.datasets.push(DatasetRecord::new("acceptance", &source, &train));
            if let Some(h) = &hold {
                report.datasets.push(DatasetRecord::new("report", &source, h));
            }
            let predictor = PredictorSpec::mlp(train.p(), s.layer_sizes.to_vec())?;
            let model = DatasetRisk { predictor: &predictor, acceptance: &train, report: report_data };
            let init = |c: usize| {
                let w = random_weights_stream(&predictor, s.weight_scale, seed, c as u64)?;
                if s.sphere {
                    w.normalized()
                } else {
                    Ok(w)
                }
            };
            run_sweep(label, &targets, &s, init, &model, &mut report)?;
        }
    }
    Ok(report)
}

macro_rules! settings {
    ($prm:expr, $target:expr) => {
        SamplerSettings {
            model: $prm.model,
            p: $prm.p,
            delta: $prm.delta,
            dataset: &$prm.dataset,
            n: $prm.n,
            holdout_fraction: $prm.holdout_fraction,
            layer_sizes: &$prm.layer_sizes,
            weight_scale: $prm.weight_scale,
            sphere: $prm.sphere,
            chains: $prm.chains,
            start: $prm.start,
            config: ChainConfig {
                target: $target,
                proposal_scale: $prm.proposal_scale,
                burn_in: $prm.burn_in,
                samples: $prm.samples,
                thin: $prm.thin,
                seed: $prm.seed,
                calibrate: $prm.calibrate,
                max_proposal_scale: $prm.max_proposal_scale,
            },
        }
    };
}

pub fn boltzmann_sweep(prm: &BoltzmannSweepParams) -> anyhow::Result<Report> {
    let targets: Vec<Target<f64>> = prm.beta_grid.iter().map(|&beta| Target::Boltzmann { beta }).collect();
    sample("beta", targets, settings!(prm, Target::Boltzmann { beta: 0.0 }))
}

pub fn annealed(prm: &AnnealedParams) -> anyhow::Result<Report> {
    let targets: Vec<Target<f64>> = prm.m_grid.iter().map(|&m| Target::Annealed { m: m as f64 }).collect();
    sample("m", targets, settings!(prm, Target::Annealed { m: 0.0 }))
}

pub fn reconstruct_entropy(prm: &ReconstructParams) -> anyhow::Result<Report> {
    let path = crate::params::required(&prm.curve, "curve")?;
    let cols = read_columns(path, &["beta", "risk", "stderr"])?;
    let points = (0..cols[0].len())
        .map(|i| CurvePoint { beta: cols[0][i], risk: cols[1][i], stderr: cols[2][i], acceptance: f64::NAN, ess: f64::NAN })
        .collect();
    let entropy = reconstruct(&BoltzmannCurve::new(points)?, prm.anchor_s0)?;
    let mut t = Table::new("entropy", &["r", "s", "pooled_flag"]);
    for p in entropy.points() {
        t.push(vec![p.r.into(), p.s.into(), p.pooled.into()]);
    }
    let mut tables = vec![t];
    if !prm.m_grid.is_empty() {
        let mut a = Table::new("annealed_prediction", &["m", "risk"]);
        for &m in &prm.m_grid {
            a.push(vec![m.into(), predicted_annealed_risk(&entropy, m)?.into()]);
        }
        tables.push(a);
    }
    let anchor = entropy.anchor();
    Ok(Report {
        tables,
        results: json!({ "anchor": { "beta": anchor.beta, "r": anchor.r, "s": anchor.s }, "pooled": entropy.pooled() }),
        ..Report::default()
    })
}

pub fn fit_quadratic(prm: &FitQuadraticParams) -> anyhow::Result<Report> {
    let path = crate::params::required(&prm.entropy, "entropy")?;
    let cols = read_columns(path, &["r", "s"])?;
    let points = cols[0].iter().zip(&cols[1]).map(|(&r, &s)| EntropyPoint { r, s, beta: f64::NAN, pooled: false }).collect();
    let curve = EntropyCurve::new(points).with_context(|| format!("{}: risks must decrease strictly", path.display()))?;
    let fit = quadratic_fit(&curve)?;
    let mut t = Table::new("quadratic_fit", &["c0", "c1", "c2", "rms"]);
    t.push(vec![fit.c0.into(), fit.c1.into(), fit.c2.into(), fit.rms.into()]);
    Ok(Report { tables: vec![t], results: json!({ "c0": fit.c0, "c1": fit.c1, "c2": fit.c2, "rms": fit.rms }), ..Report::default() })
}
