use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::benchmark::Benchmark;
use crate::error::{Error, Result};
use crate::lti::{AdditiveModel, ModelStructure};
use crate::riv::{align_submodels, riv_solve, EstimatorOptions, LoopMode, TransientWindow};
use crate::structured::{modal_eval, modal_init, project, ModalMap, ModalParams, ProjectOptions};

/// Estimation chain applied to every Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// RIV in the loop mode of the data.
    Unstructured,
    /// RIV followed by the modal projection weighted by the RIV covariance.
    Structured,
    /// The structured chain run with the open-loop estimator on closed-loop data.
    OpenOnClosed,
}

impl Pipeline {
    pub fn tag(self) -> &'static str {
        match self {
            Pipeline::Unstructured => "unstructured",
            Pipeline::Structured => "structured",
            Pipeline::OpenOnClosed => "open-on-closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub sample_sizes: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub init_perturbation: f64,
    /// Indices into `beta`; empty selects the default denominator `a_{i,2}`
    /// and last-diagonal `B_{i,0}` entries of every mode.
    #[serde(default)]
    pub tracked_params: Vec<usize>,
}

impl McConfig {
    /// Logarithmic grid of `count` sizes from `lo` to `hi`.
    pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<usize> {
        if count == 1 {
            return vec![lo.round() as usize];
        }
        let (a, b) = (lo.log10(), hi.log10());
        (0..count)
            .map(|i| {
                10f64
                    .powf(a + (b - a) * i as f64 / (count - 1) as f64)
                    .round() as usize
            })
            .collect()
    }

    /// Desk-scale sweep: 3 sizes from 10^3 to 10^4.5, 50 runs.
    pub fn desk(seed: u64) -> Self {
        Self {
            sample_sizes: Self::log_grid(1e3, 10f64.powf(4.5), 3),
            runs: 50,
            seed,
            init_perturbation: 0.025,
            tracked_params: Vec::new(),
        }
    }

    /// Full protocol: 50 sizes from 10^3 to 10^5, 300 runs.
    pub fn full(seed: u64) -> Self {
        Self {
            sample_sizes: Self::log_grid(1e3, 1e5, 50),
            runs: 300,
            ..Self::desk(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument(
                "runs per size must be at least 1".into(),
            ));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 10) {
            return Err(Error::InvalidArgument(
                "sample sizes must be at least 10".into(),
            ));
        }
        if !(self.init_perturbation >= 0.0 && self.init_perturbation < 1.0) {
            return Err(Error::InvalidArgument(
                "init perturbation must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// `a_{i,2}` and the last diagonal entry of `B_{i,0}` for every second-order
/// subsystem, denominators first.
pub fn default_tracked(structure: &ModelStructure) -> Vec<usize> {
    let (n_y, n_u) = (structure.n_y, structure.n_u);
    let k = structure.orders.len();
    let offsets: Vec<usize> = (0..k).map(|i| structure.offset(i)).collect();
    let dens = (0..k)
        .filter(|&i| structure.orders[i].n >= 2)
        .map(|i| offsets[i] + 1);
    let nums = (0..k).map(|i| offsets[i] + structure.orders[i].n + (n_u - 1) * n_y + (n_y - 1));
    dens.chain(nums).collect()
}

/// `a<i>_<j>` for denominator entries and `B<i>_<l>_<row><col>` for
/// numerator entries (1-based subsystem, row and column).
pub fn param_label(structure: &ModelStructure, idx: usize) -> String {
    let n_y = structure.n_y;
    for (i, o) in structure.orders.iter().enumerate() {
        let start = structure.offset(i);
        let len = o.n + (o.m + 1) * n_y * structure.n_u;
        if idx >= start && idx < start + len {
            let loc = idx - start;
            if loc < o.n {
                return format!("a{}_{}", i + 1, loc + 1);
            }
            let rest = loc - o.n;
            let block = n_y * structure.n_u;
            let (l, within) = (rest / block, rest % block);
            return format!("B{}_{}_{}{}", i + 1, l, within % n_y + 1, within / n_y + 1);
        }
    }
    format!("beta{idx}")
}

/// One `(method, N, parameter)` MSE entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub param: String,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRunStats {
    pub method: String,
    pub n: usize,
    pub runs: usize,
    pub failed: usize,
    /// Successful runs whose RIV iteration hit `max_iter`.
    pub not_converged: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct McResultTable {
    pub rows: Vec<McRow>,
    pub stats: Vec<McRunStats>,
}

impl McResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn merge(&mut self, other: McResultTable) {
        self.rows.extend(other.rows);
        self.stats.extend(other.stats);
    }

    pub fn mse(&self, method: &str, n: usize, param: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.n == n && r.param == param)
            .map(|r| r.mse)
    }

    /// Distinct parameter labels in first-seen order.
    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.param) {
                out.push(r.param.clone());
            }
        }
        out
    }

    /// Least-squares slope of `log10 MSE` against `log10 N` for one series.
    pub fn loglog_slope(&self, method: &str, param: &str) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.param == param && r.mse > 0.0)
            .map(|r| ((r.n as f64).log10(), r.mse.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / m, sy / m);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

fn perturb(model: &AdditiveModel, delta: f64, rng: &mut ChaCha8Rng) -> Result<AdditiveModel> {
    let beta = model.flatten().map(|b| {
        if delta > 0.0 {
            b * (1.0 + rng.random_range(-delta..=delta))
        } else {
            b
        }
    });
    model.structure().unflatten(&beta)
}

struct RunOutcome {
    tracked: DVector<f64>,
    converged: bool,
}

fn run_one(
    bench: &Benchmark,
    mc: &McConfig,
    pipeline: Pipeline,
    tracked: &[usize],
    si: usize,
    ri: usize,
) -> Result<RunOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(((si as u64) << 32) | ri as u64);
    let real = bench.simulate(mc.sample_sizes[si], &mut rng)?;
    let init = perturb(&bench.truth, mc.init_perturbation, &mut rng)?;

    let mut opts = EstimatorOptions {
        transient: TransientWindow::Samples(0),
        ..EstimatorOptions::default()
    };
    if bench.spec.loop_mode == LoopMode::Closed && pipeline != Pipeline::OpenOnClosed {
        opts.loop_mode = LoopMode::Closed;
        opts.controller = bench.controller.clone();
    }
    let res = riv_solve(&init, &real.dataset, &opts)?;
    let est = match pipeline {
        Pipeline::Unstructured => res.model.clone(),
        Pipeline::Structured | Pipeline::OpenOnClosed => {
            let (n_y, n_u) = (res.model.n_y(), res.model.n_u());
            let rho0 = modal_init(&res.model)?;
            let map = ModalMap::new(n_y, n_u, res.model.k());
            let pr = project(
                &res.model.flatten(),
                &res.acov,
                &map,
                &rho0.to_vector(),
                &ProjectOptions::default(),
            )?;
            modal_eval(&ModalParams::from_vector(&pr.rho(), n_y, n_u)?)
        }
    };
    let beta = align_submodels(&est, &bench.truth).0.flatten();
    let tracked = DVector::from_iterator(tracked.len(), tracked.iter().map(|&i| beta[i]));
    if tracked.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFail("non-finite estimate".into()));
    }
    Ok(RunOutcome {
        tracked,
        converged: res.converged,
    })
}

/// Runs `mc.runs` independent experiments per sample size and tabulates the
/// per-parameter MSE against the truth. Run `(s, r)` draws from the ChaCha8
/// stream `(s << 32) | r` of `mc.seed`, so results do not depend on scheduling.
pub fn run_monte_carlo(
    bench: &Benchmark,
    mc: &McConfig,
    pipeline: Pipeline,
) -> Result<McResultTable> {
    mc.validate()?;
    if pipeline == Pipeline::OpenOnClosed && bench.spec.loop_mode != LoopMode::Closed {
        return Err(Error::InvalidArgument(
            "open-on-closed needs a closed-loop benchmark".into(),
        ));
    }
    let structure = bench.truth.structure();
    let tracked = if mc.tracked_params.is_empty() {
        default_tracked(&structure)
    } else {
        mc.tracked_params.clone()
    };
    if let Some(&bad) = tracked.iter().find(|&&i| i >= structure.dim_beta()) {
        return Err(Error::InvalidArgument(format!(
            "tracked index {bad} out of range"
        )));
    }
    let truth = bench.truth.flatten();
    let jobs: Vec<(usize, usize)> = (0..mc.sample_sizes.len())
        .flat_map(|s| (0..mc.runs).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<Result<RunOutcome>> = jobs
        .par_iter()
        .map(|&(s, r)| run_one(bench, mc, pipeline, &tracked, s, r))
        .collect();

    let mut table = McResultTable::default();
    for (si, &n) in mc.sample_sizes.iter().enumerate() {
        let chunk = &outcomes[si * mc.runs..(si + 1) * mc.runs];
        let ok: Vec<&RunOutcome> = chunk.iter().filter_map(|o| o.as_ref().ok()).collect();
        let failed = mc.runs - ok.len();
        if ok.is_empty() || failed as f64 > 0.2 * mc.runs as f64 {
            return Err(Error::McUnreliable {
                failed,
                total: mc.runs,
                n,
            });
        }
        let mut sq = vec![0.0; tracked.len()];
        for o in &ok {
            for (j, &idx) in tracked.iter().enumerate() {
                sq[j] += (o.tracked[j] - truth[idx]).powi(2);
            }
        }
        for (j, &idx) in tracked.iter().enumerate() {
            table.rows.push(McRow {
                method: pipeline.tag().to_string(),
                n,
                param: param_label(&structure, idx),
                mse: sq[j] / ok.len() as f64,
            });
        }
        table.stats.push(McRunStats {
            method: pipeline.tag().to_string(),
            n,
            runs: mc.runs,
            failed,
            not_converged: ok.iter().filter(|o| !o.converged).count(),
        });
    }
    Ok(table)
}
