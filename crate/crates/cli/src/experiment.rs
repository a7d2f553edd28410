//! The experiment modes.
//!
//! Streams: experiment `g` of a config (a size, threshold or base size, in
//! config order) uses the master seed `derive_seed(seed, g)`. Within it,
//! replicate `i` runs on `child(master, i)`. Adaptive replicate `i` is
//! started from `derive_seed(master, i)`. In two-stage mode the first stage
//! runs on `child(master, u64::MAX)`, the allocated replicates use master
//! `derive_seed(master, 1)` and the constant-`N` replicates `derive_seed(master, 2)`.

use crate::config::{AdaptiveMode, ExperimentConfig, FixedMode, PhiChoice, TwoStageMode};
use crate::models::AnyModel;
use crate::output::{fmt, fmt_opt, Reports, Sink, Table};
use anyhow::{Context, Result};
use pfvar::engine::{point_estimates, AllocationPlan, TerminalView};
use pfvar::oracle::{exact_vpn, TestFunction};
use pfvar::rng::{child, derive_seed};
use pfvar::stats::{log_mean_exp, mean, sample_variance};
use pfvar::tuning::{
    adaptive_filter, replicate_full, replicate_terminal, replicate_variance_study, two_stage_allocation,
    AdaptiveOptions, TwoStageOptions,
};
use pfvar::varest::{estimate, estimate_terminal};
use pfvar::{FeynmanKac, Measure, VarianceReport};
use rayon::prelude::*;
use std::path::Path;

/// Everything a mode needs besides its own table.
pub struct Ctx<'a> {
    pub config: &'a ExperimentConfig,
    pub model: &'a AnyModel,
    pub base_dir: &'a Path,
    pub sink: &'a mut Sink,
}

#[derive(Clone, Copy)]
struct Phi {
    one: bool,
    centre: f64,
}

impl Phi {
    fn eval(self, x: f64) -> f64 {
        if self.one {
            1.0
        } else {
            x - self.centre
        }
    }

    /// `φ` for one run; the centred identity is centred at that run's estimate.
    fn for_run<V: TerminalView<State = f64>>(choice: PhiChoice, measure: Measure, view: &V) -> pfvar::Result<Self> {
        Ok(match choice {
            PhiChoice::ConstOne => Phi { one: true, centre: 0.0 },
            PhiChoice::Identity => Phi { one: false, centre: 0.0 },
            PhiChoice::CenteredIdentity => {
                let p = point_estimates(view, |x| *x)?;
                let centre = match measure {
                    Measure::Predictive => p.eta,
                    Measure::Updated => p.eta_hat,
                };
                Phi { one: false, centre }
            }
        })
    }

    fn fixed(choice: PhiChoice) -> Self {
        Phi { one: choice == PhiChoice::ConstOne, centre: 0.0 }
    }
}

fn test_function(choice: PhiChoice) -> TestFunction {
    match choice {
        PhiChoice::ConstOne => TestFunction::One,
        PhiChoice::Identity => TestFunction::Identity,
        PhiChoice::CenteredIdentity => TestFunction::CenteredIdentity,
    }
}

/// Kalman-exact quantities, for models that have them.
struct Exact {
    vpn: Vec<f64>,
    vpn_hat: Vec<f64>,
    /// `ln γ_n(1)` and `ln γ̂_n(1)`.
    log_gamma_one: f64,
    log_gamma_hat_one: f64,
}

impl Exact {
    fn new(model: &AnyModel, choice: PhiChoice) -> Option<Self> {
        let (fk, reference) = model.kalman()?;
        let n = model.horizon();
        let phi = test_function(choice);
        Some(Self {
            vpn: exact_vpn(&fk, &reference, phi, false).ok()?,
            vpn_hat: exact_vpn(&fk, &reference, phi, true).ok()?,
            log_gamma_one: reference.log_gamma_one(n),
            log_gamma_hat_one: reference.log_gamma_hat_one(n),
        })
    }

    fn sigma2(&self, weights: &[f64], updated: bool) -> f64 {
        let v = if updated { &self.vpn_hat } else { &self.vpn };
        v.iter().zip(weights).map(|(v, c)| v / c).sum()
    }

    fn log_normalizer(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Predictive => self.log_gamma_one,
            Measure::Updated => self.log_gamma_hat_one,
        }
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let sd = if xs.len() > 1 { sample_variance(xs).sqrt() } else { f64::NAN };
    (mean(xs), sd)
}

/// `ln γ_n^N(1)` and `η_n^N(φ)` for the chosen measure.
fn estimate_parts(report: &VarianceReport, measure: Measure) -> (f64, f64) {
    match measure {
        Measure::Predictive => (report.point.log_gamma_one, report.point.eta),
        Measure::Updated => (report.point.log_gamma_hat_one, report.point.eta_hat),
    }
}

/// Sample variance of `γ_n^N(φ) / M` with `M = B^{-1} Σ γ_{n,i}^N(1)`, and of
/// `γ_n^N(φ) / γ_n(1)` when the exact normalizer is known.
fn relative_variances(parts: &[(f64, f64)], exact_log: Option<f64>) -> (f64, Option<f64>) {
    if parts.len() < 2 {
        return (f64::NAN, exact_log.map(|_| f64::NAN));
    }
    let logs: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let m = log_mean_exp(&logs);
    let scaled = |c: f64| parts.iter().map(|(l, e)| (l - c).exp() * e).collect::<Vec<f64>>();
    (sample_variance(&scaled(m)), exact_log.map(|z| sample_variance(&scaled(z))))
}

fn report_for_run<V: TerminalView<State = f64>>(
    view: &V,
    full: Option<&pfvar::engine::ParticleHistory<f64>>,
    config: &ExperimentConfig,
) -> pfvar::Result<VarianceReport> {
    let phi = Phi::for_run(config.phi, config.estimators.measure, view)?;
    match full {
        Some(h) => estimate(h, |x| phi.eval(*x)),
        None => estimate_terminal(view, |x| phi.eval(*x)),
    }
}

fn replicate_reports(
    model: &AnyModel,
    plan: &AllocationPlan,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<VarianceReport>> {
    let count = config.replicates;
    let out = if config.estimators.decomposition {
        replicate_full(model, plan, count, seed, |_, h| report_for_run(&h, Some(&h), config))?
    } else {
        replicate_terminal(model, plan, count, seed, |_, h| report_for_run(&h, None, config))?
    };
    Ok(out)
}

fn plan_for(model: &AnyModel, size: usize, weights: &Option<Vec<f64>>) -> Result<AllocationPlan> {
    let n = model.horizon();
    let plan = match weights {
        Some(w) => AllocationPlan::new(size, w.clone())?,
        None => AllocationPlan::constant(n, size)?,
    };
    anyhow::ensure!(
        plan.horizon() == n,
        "fixed.weights: expected {} weights for a model with {} steps, got {}",
        n + 1,
        n + 1,
        plan.weights.len()
    );
    Ok(plan)
}

pub fn run_fixed(ctx: Ctx, mode: &FixedMode) -> Result<()> {
    let config = ctx.config;
    let measure = config.estimators.measure;
    let exact = Exact::new(ctx.model, config.phi);
    let mut reports = Reports::new(&["size", "replicate"]);
    let mut summary = Table::new([
        "size",
        "replicates",
        "mean_scaled_v",
        "sd_scaled_v",
        "mean_scaled_v_hat",
        "sd_scaled_v_hat",
        "mean_vn",
        "sd_vn",
        "mean_vn_hat",
        "sd_vn_hat",
        "relative_variance",
        "relative_variance_exact",
        "exact_sigma2",
        "exact_sigma2_hat",
    ]);
    let mut terms =
        Table::new(["size", "p", "mean_vpn", "sd_vpn", "mean_vpn_hat", "sd_vpn_hat", "exact_vpn", "exact_vpn_hat"]);
    for (g, &size) in mode.sizes.iter().enumerate() {
        let plan = plan_for(ctx.model, size, &mode.weights)?;
        eprintln!("fixed: N = {size}, {} replicates", config.replicates);
        let rs = replicate_reports(ctx.model, &plan, config, derive_seed(config.seed, g as u64))
            .with_context(|| format!("run at N = {size}"))?;
        let col = |f: &dyn Fn(&VarianceReport) -> Option<f64>| -> Vec<f64> { rs.iter().filter_map(f).collect() };
        let nv = col(&|r| Some(r.scaled_v));
        let nv_hat = col(&|r| Some(size as f64 * r.v_hat));
        let vn = col(&|r| r.decomposition.as_ref().map(|d| d.vn));
        let vn_hat = col(&|r| r.decomposition.as_ref().map(|d| d.vn_hat));
        let parts: Vec<(f64, f64)> = rs.iter().map(|r| estimate_parts(r, measure)).collect();
        let centred = config.phi == PhiChoice::CenteredIdentity;
        let exact_log = exact.as_ref().filter(|_| !centred).map(|e| e.log_normalizer(measure));
        let (rel, rel_exact) = relative_variances(&parts, exact_log);
        let opt_pair = |xs: &[f64]| {
            if xs.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_sd(xs);
                (Some(m), Some(s))
            }
        };
        let (m_nv, s_nv) = mean_sd(&nv);
        let (m_nvh, s_nvh) = mean_sd(&nv_hat);
        let (m_vn, s_vn) = opt_pair(&vn);
        let (m_vnh, s_vnh) = opt_pair(&vn_hat);
        summary.push(vec![
            size.to_string(),
            rs.len().to_string(),
            fmt(m_nv),
            fmt(s_nv),
            fmt(m_nvh),
            fmt(s_nvh),
            fmt_opt(m_vn),
            fmt_opt(s_vn),
            fmt_opt(m_vnh),
            fmt_opt(s_vnh),
            if centred { String::new() } else { fmt(rel) },
            fmt_opt(rel_exact),
            fmt_opt(exact.as_ref().map(|e| e.sigma2(&plan.weights, false))),
            fmt_opt(exact.as_ref().map(|e| e.sigma2(&plan.weights, true))),
        ]);
        if config.estimators.decomposition {
            for p in 0..=plan.horizon() {
                let v = col(&|r| r.decomposition.as_ref().map(|d| d.vpn[p]));
                let vh = col(&|r| r.decomposition.as_ref().map(|d| d.vpn_hat[p]));
                let (mv, sv) = mean_sd(&v);
                let (mvh, svh) = mean_sd(&vh);
                terms.push(vec![
                    size.to_string(),
                    p.to_string(),
                    fmt(mv),
                    fmt(sv),
                    fmt(mvh),
                    fmt(svh),
                    fmt_opt(exact.as_ref().map(|e| e.vpn[p])),
                    fmt_opt(exact.as_ref().map(|e| e.vpn_hat[p])),
                ]);
            }
        }
        for (i, r) in rs.into_iter().enumerate() {
            reports.push(vec![size.to_string(), i.to_string()], r);
        }
    }
    ctx.sink.reports("reports", &reports)?;
    ctx.sink.table("summary.csv", &summary)?;
    if !terms.is_empty() {
        ctx.sink.table("terms.csv", &terms)?;
    }
    Ok(())
}

pub fn run_adaptive(ctx: Ctx, mode: &AdaptiveMode) -> Result<()> {
    let config = ctx.config;
    let measure = config.estimators.measure;
    let phi = Phi::fixed(config.phi);
    let exact = Exact::new(ctx.model, config.phi);
    let mut reports = Reports::new(&["threshold", "replicate", "size"]);
    let mut stages = Table::new(["threshold", "replicate", "stage", "size", "v", "estimate", "accepted"]);
    let mut summary = Table::new([
        "threshold",
        "replicates",
        "converged",
        "mean_final_size",
        "sd_final_size",
        "relative_variance",
        "relative_variance_exact",
    ]);
    for (g, &delta) in mode.thresholds.iter().enumerate() {
        eprintln!("adaptive: δ = {delta}, {} replicates", config.replicates);
        let master = derive_seed(config.seed, g as u64);
        let options = AdaptiveOptions {
            initial_size: mode.initial_size,
            threshold: delta,
            max_doublings: mode.max_doublings,
            measure,
        };
        let runs = (0..config.replicates)
            .into_par_iter()
            .map(|i| adaptive_filter(ctx.model, |x| phi.eval(*x), options, derive_seed(master, i as u64)))
            .collect::<pfvar::Result<Vec<_>>>()
            .with_context(|| format!("adaptive run at δ = {delta}"))?;
        let sizes: Vec<f64> = runs.iter().map(|r| *r.trajectory.last().unwrap() as f64).collect();
        let parts: Vec<(f64, f64)> = runs.iter().map(|r| estimate_parts(&r.report, measure)).collect();
        let (rel, rel_exact) = relative_variances(&parts, exact.as_ref().map(|e| e.log_normalizer(measure)));
        let (ms, ss) = mean_sd(&sizes);
        summary.push(vec![
            fmt(delta),
            runs.len().to_string(),
            runs.iter().filter(|r| r.converged).count().to_string(),
            fmt(ms),
            fmt(ss),
            fmt(rel),
            fmt_opt(rel_exact),
        ]);
        for (i, r) in runs.into_iter().enumerate() {
            for s in &r.stages {
                stages.push(vec![
                    fmt(delta),
                    i.to_string(),
                    s.stage.to_string(),
                    s.size.to_string(),
                    fmt(s.v),
                    fmt(s.estimate),
                    s.accepted.to_string(),
                ]);
            }
            reports.push(vec![fmt(delta), i.to_string(), r.trajectory.last().unwrap().to_string()], r.report);
        }
    }
    ctx.sink.reports("reports", &reports)?;
    ctx.sink.table("stages.csv", &stages)?;
    ctx.sink.table("summary.csv", &summary)?;
    Ok(())
}

/// First stage for every base size; writes the allocation table and one reusable plan config per size.
fn allocate_all(ctx: &mut Ctx, mode: &TwoStageMode) -> Result<Vec<(usize, pfvar::tuning::TwoStageResult)>> {
    let config = ctx.config;
    let phi = Phi::fixed(config.phi);
    let options = TwoStageOptions { rule: mode.rule, floor: mode.floor };
    let mut table = Table::new(["size", "p", "stage_one_vpn", "weight", "count"]);
    let mut out = Vec::new();
    for (g, &size) in mode.base_sizes.iter().enumerate() {
        let master = derive_seed(config.seed, g as u64);
        let result = two_stage_allocation(ctx.model, |x| phi.eval(*x), size, options, &mut child(master, u64::MAX))
            .with_context(|| format!("first stage at N = {size}"))?;
        let counts = result.plan.counts();
        for p in 0..=result.plan.horizon() {
            table.push(vec![
                size.to_string(),
                p.to_string(),
                fmt(result.stage_one_vpn[p]),
                fmt(result.plan.weights[p]),
                counts[p].to_string(),
            ]);
        }
        let plan_config = ExperimentConfig {
            model: config.model.with_inline_observations(ctx.base_dir)?,
            fixed: Some(FixedMode { sizes: vec![size], weights: Some(result.plan.weights.clone()) }),
            adaptive: None,
            two_stage: None,
            output: Default::default(),
            ..config.clone()
        };
        ctx.sink.write(&format!("plan_N{size}.toml"), &plan_config.to_toml()?)?;
        out.push((size, result));
    }
    ctx.sink.table("allocation.csv", &table)?;
    Ok(out)
}

pub fn run_allocate(mut ctx: Ctx, mode: &TwoStageMode) -> Result<()> {
    allocate_all(&mut ctx, mode)?;
    Ok(())
}

pub fn run_two_stage(mut ctx: Ctx, mode: &TwoStageMode) -> Result<()> {
    let stage_one = allocate_all(&mut ctx, mode)?;
    let config = ctx.config;
    let measure = config.estimators.measure;
    let exact = Exact::new(ctx.model, config.phi);
    let mut reports = Reports::new(&["size", "allocation", "replicate"]);
    let mut summary = Table::new([
        "size",
        "allocation",
        "replicates",
        "total_particles",
        "relative_variance",
        "relative_variance_exact",
        "predicted_improvement",
        "exact_sigma2",
    ]);
    for (g, (size, result)) in stage_one.into_iter().enumerate() {
        let master = derive_seed(config.seed, g as u64);
        let mut arms = vec![("allocated", result.plan.clone(), derive_seed(master, 1))];
        if mode.compare_constant {
            arms.push(("constant", AllocationPlan::constant(ctx.model.horizon(), size)?, derive_seed(master, 2)));
        }
        for (name, plan, seed) in arms {
            eprintln!("two-stage: N = {size}, {name}, {} replicates", config.replicates);
            let rs = replicate_reports(ctx.model, &plan, config, seed)?;
            let parts: Vec<(f64, f64)> = rs.iter().map(|r| estimate_parts(r, measure)).collect();
            let (rel, rel_exact) = relative_variances(&parts, exact.as_ref().map(|e| e.log_normalizer(measure)));
            summary.push(vec![
                size.to_string(),
                name.to_string(),
                rs.len().to_string(),
                plan.counts().iter().sum::<usize>().to_string(),
                fmt(rel),
                fmt_opt(rel_exact),
                if name == "allocated" { fmt(result.predicted_improvement) } else { String::new() },
                fmt_opt(exact.as_ref().map(|e| e.sigma2(&plan.weights, measure == Measure::Updated))),
            ]);
            for (i, r) in rs.into_iter().enumerate() {
                reports.push(vec![size.to_string(), name.to_string(), i.to_string()], r);
            }
        }
    }
    ctx.sink.reports("reports", &reports)?;
    ctx.sink.table("summary.csv", &summary)?;
    Ok(())
}

pub fn run_replicate_study(ctx: Ctx, mode: &FixedMode) -> Result<()> {
    let config = ctx.config;
    anyhow::ensure!(config.replicates >= 2, "replicates: the replicate study needs at least 2");
    anyhow::ensure!(
        config.phi != PhiChoice::CenteredIdentity,
        "phi: the replicate study needs a fixed test function (const-one or identity)"
    );
    let phi = Phi::fixed(config.phi);
    let mut table = Table::new(["size", "replicates", "log_normalizer", "standard", "v_based", "ratio"]);
    for (g, &size) in mode.sizes.iter().enumerate() {
        eprintln!("replicate study: N = {size}, {} replicates", config.replicates);
        let plan = plan_for(ctx.model, size, &mode.weights)?;
        let s = replicate_variance_study(
            ctx.model,
            |x| phi.eval(*x),
            &plan,
            config.replicates,
            config.estimators.measure,
            derive_seed(config.seed, g as u64),
        )?;
        table.push(vec![
            size.to_string(),
            s.replicates.to_string(),
            fmt(s.log_normalizer),
            fmt(s.standard),
            fmt(s.v_based),
            fmt(s.v_based / s.standard),
        ]);
    }
    ctx.sink.table("replicate_study.csv", &table)?;
    Ok(())
}
