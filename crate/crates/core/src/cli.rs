//! Experiment harness behind the `hamrec` binary: single recoveries, error
//! sweeps over chain length, the S/N/r comparison table and pure-arithmetic
//! recoverability predictions.
//!
//! Every random quantity derives from an explicit seed; trial `i` of a sweep
//! uses `base_seed + i`. Trials may run concurrently but results are reduced
//! in trial order, so output depends only on the configuration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::hoe::{hoe_gram_with, hoe_rank};
use crate::krylov::{lowest_eigenpairs, LanczosOptions};
use crate::models::{assemble, enumerate_terms, random_instance, term_count, CoefficientVector, ModelKind, TermBasis};
use crate::ose::{
    assemble_equations_with, is_recoverable, predicted_lie_count, solve_nullspace, DegeneracyProfile,
    RecoveryReport,
};
use crate::parallel::{map_indexed, with_workers, Parallelism};
use crate::spectral::{build_steady_state, cluster_weights, Clustering, SteadyStateSpec, DEFAULT_CLUSTER_TOL};
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_THRESHOLD: f64 = 1e-8;
/// Hard cap on simulated chain lengths.
pub const LENGTH_CAP: usize = 12;

/// Degeneracy profile shorthand.
///
/// `"2"` is an equal mixture of the two lowest eigenstates, `"2,2"` (alias
/// `rho-me`) mixes the four lowest with weights 0.2, 0.2, 0.3, 0.3, and
/// `"full"` is the maximally mixed state at every length. Weights of
/// multi-class profiles follow [`SteadyStateSpec::ladder`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProfileTemplate {
    Classes(Vec<usize>),
    Full,
}

impl ProfileTemplate {
    pub fn rho_me() -> Self {
        ProfileTemplate::Classes(vec![2, 2])
    }

    /// Degeneracies at chain length `length`.
    pub fn q_at(&self, length: usize) -> Vec<usize> {
        match self {
            ProfileTemplate::Classes(q) => q.clone(),
            ProfileTemplate::Full => vec![1usize << length],
        }
    }

    pub fn spec_at(&self, length: usize) -> SteadyStateSpec {
        SteadyStateSpec::ladder(&self.q_at(length))
    }

    pub fn fits(&self, length: usize) -> bool {
        self.q_at(length).iter().sum::<usize>() <= 1usize << length
    }
}

impl fmt::Display for ProfileTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileTemplate::Full => f.write_str("full"),
            ProfileTemplate::Classes(q) => {
                let parts: Vec<String> = q.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for ProfileTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(ProfileTemplate::Full),
            "rho-me" | "rho_me" | "me" => Ok(ProfileTemplate::rho_me()),
            other => {
                let q = other
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidArgument(format!("bad profile {s:?}")))?;
                if q.is_empty() || q.contains(&0) {
                    return Err(Error::InvalidArgument(format!("bad profile {s:?}")));
                }
                Ok(ProfileTemplate::Classes(q))
            }
        }
    }
}

/// Everything one recovery run produced.
#[derive(Clone, Debug)]
pub struct Trial {
    pub kind: ModelKind,
    pub length: usize,
    pub seed: u64,
    pub profile: Vec<usize>,
    pub predicted_s: u64,
    pub n: usize,
    pub report: RecoveryReport,
    pub ambiguous_clustering: bool,
}

impl Trial {
    pub fn delta(&self) -> f64 {
        self.report.delta.unwrap_or(f64::NAN)
    }
}

fn check_cap(length: usize) -> Result<()> {
    if length > LENGTH_CAP {
        return Err(Error::InvalidArgument(format!("chain length {length} exceeds the cap {LENGTH_CAP}")));
    }
    Ok(())
}

/// Random instance → eigenstates → steady state → weight blocks.
fn observe(
    kind: ModelKind,
    length: usize,
    spec: &SteadyStateSpec,
    seed: u64,
) -> Result<(TermBasis, CoefficientVector, Clustering)> {
    check_cap(length)?;
    spec.validate()?;
    let basis = enumerate_terms(kind, length)?;
    let a = random_instance(kind, length, seed)?;
    let h = assemble(&basis, &a)?;
    let wanted = spec.max_index().map_or(1, |m| m + 1);
    if wanted > basis.dim() {
        return Err(Error::InvalidState(format!(
            "eigenstate {} requested in a {}-dimensional space",
            wanted - 1,
            basis.dim()
        )));
    }
    let eig = lowest_eigenpairs(&h, wanted, &LanczosOptions::default())?;
    let (rho, _) = build_steady_state(spec, &eig)?;
    let clustering = cluster_weights(&rho, DEFAULT_CLUSTER_TOL)?;
    Ok((basis, a, clustering))
}

/// The full recovery pipeline for one seeded instance.
pub fn run_trial(
    kind: ModelKind,
    length: usize,
    spec: &SteadyStateSpec,
    seed: u64,
    par: Parallelism,
) -> Result<Trial> {
    let (basis, a, clustering) = observe(kind, length, spec, seed)?;
    let profile = clustering.blocks.profile();
    let predicted_s = predicted_lie_count(&DegeneracyProfile::new(profile.clone(), length)?);
    let system = assemble_equations_with(&clustering.blocks, &basis, par)?;
    debug_assert_eq!(system.rows() as u64, predicted_s);
    let report = solve_nullspace(&system)?.with_truth(&a)?;
    Ok(Trial {
        kind,
        length,
        seed,
        profile,
        predicted_s,
        n: basis.count(),
        report,
        ambiguous_clustering: clustering.is_ambiguous(),
    })
}

/// Commutator rank `r` for one seeded instance.
pub fn hoe_rank_trial(kind: ModelKind, length: usize, spec: &SteadyStateSpec, seed: u64, par: Parallelism) -> Result<usize> {
    let (basis, _, clustering) = observe(kind, length, spec, seed)?;
    hoe_rank(&hoe_gram_with(&basis, &clustering.blocks, par)?)
}

/// JSON document printed by `hamrec recover`.
#[derive(Clone, Debug, Serialize)]
pub struct RecoverOutput {
    pub kind: ModelKind,
    #[serde(rename = "L")]
    pub length: usize,
    pub profile: Vec<usize>,
    pub seed: u64,
    #[serde(rename = "S")]
    pub s: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub rank: usize,
    pub nullity: usize,
    pub delta: f64,
    pub success: bool,
    pub singular_tail: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
}

pub fn cmd_recover(
    kind: ModelKind,
    length: usize,
    spec: &SteadyStateSpec,
    seed: u64,
    with_rank_oracle: bool,
) -> Result<RecoverOutput> {
    let trial = run_trial(kind, length, spec, seed, Parallelism::default())?;
    let r = if with_rank_oracle {
        Some(hoe_rank_trial(kind, length, spec, seed, Parallelism::default())?)
    } else {
        None
    };
    Ok(RecoverOutput {
        kind,
        length,
        profile: trial.profile.clone(),
        seed,
        s: trial.predicted_s,
        n: trial.n,
        rank: trial.report.rank,
        nullity: trial.report.nullity,
        delta: trial.delta(),
        success: trial.report.success,
        singular_tail: trial.report.singular_tail.clone(),
        r,
    })
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub kind: ModelKind,
    pub profile: ProfileTemplate,
    pub l_min: usize,
    pub l_max: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// A trial succeeds when `Δ` is strictly below this.
    pub threshold: f64,
    pub workers: Option<usize>,
    pub parallelism: Parallelism,
}

impl SweepConfig {
    pub fn new(kind: ModelKind, profile: ProfileTemplate, l_min: usize, l_max: usize) -> Self {
        SweepConfig {
            kind,
            profile,
            l_min,
            l_max,
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            threshold: DEFAULT_THRESHOLD,
            workers: None,
            parallelism: Parallelism::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("at least one trial is required".into()));
        }
        if self.l_min < self.kind.min_length() {
            return Err(Error::LengthTooSmall { length: self.l_min, minimum: self.kind.min_length() });
        }
        if self.l_min > self.l_max {
            return Err(Error::InvalidArgument(format!("empty length range {}..={}", self.l_min, self.l_max)));
        }
        check_cap(self.l_max)?;
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidArgument("threshold must be positive".into()));
        }
        for length in self.l_min..=self.l_max {
            if !self.profile.fits(length) {
                return Err(Error::InvalidArgument(format!(
                    "profile {} does not fit in 2^{length} states",
                    self.profile
                )));
            }
        }
        Ok(())
    }
}

/// Aggregate of all trials at one chain length.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub length: usize,
    pub trials: usize,
    pub median_delta: f64,
    pub p10_delta: f64,
    pub p90_delta: f64,
    pub success_fraction: f64,
    #[serde(rename = "S")]
    pub s: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub predicted_recoverable: bool,
    /// Trials that raised an error instead of producing a report.
    pub failed_trials: usize,
    /// Largest `Δ` over the completed trials.
    #[serde(skip)]
    pub max_delta: f64,
    /// Smallest `Δ` over the completed trials.
    #[serde(skip)]
    pub min_delta: f64,
}

impl SweepRow {
    pub const CSV_HEADER: [&'static str; 9] = [
        "L",
        "trials",
        "median_delta",
        "p10_delta",
        "p90_delta",
        "success_fraction",
        "S",
        "N",
        "predicted_recoverable",
    ];

    fn csv_record(&self) -> Vec<String> {
        vec![
            self.length.to_string(),
            self.trials.to_string(),
            fmt_float(self.median_delta),
            fmt_float(self.p10_delta),
            fmt_float(self.p90_delta),
            fmt_float(self.success_fraction),
            self.s.to_string(),
            self.n.to_string(),
            self.predicted_recoverable.to_string(),
        ]
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runs the trials of one chain length.
pub fn sweep_length(config: &SweepConfig, length: usize) -> Result<SweepRow> {
    let spec = config.profile.spec_at(length);
    let q = config.profile.q_at(length);
    let s = predicted_lie_count(&DegeneracyProfile::new(q.clone(), length)?);
    let n = term_count(config.kind, length)?;
    let outcomes = map_indexed(config.parallelism, config.trials, |i| {
        let seed = config.base_seed.wrapping_add(i as u64);
        run_trial(config.kind, length, &spec, seed, Parallelism::Sequential).map(|t| t.delta())
    });
    let mut deltas = Vec::with_capacity(config.trials);
    let mut failed = 0;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(delta) => deltas.push(delta),
            Err(err) => {
                log::warn!("L={length} trial {i} failed: {err}");
                failed += 1;
            }
        }
    }
    let successes = deltas.iter().filter(|d| **d < config.threshold).count();
    deltas.sort_by(f64::total_cmp);
    Ok(SweepRow {
        length,
        trials: config.trials,
        median_delta: quantile(&deltas, 0.5),
        p10_delta: quantile(&deltas, 0.1),
        p90_delta: quantile(&deltas, 0.9),
        success_fraction: successes as f64 / config.trials as f64,
        s,
        n,
        predicted_recoverable: is_recoverable(config.kind, &q, length)?,
        failed_trials: failed,
        max_delta: deltas.last().copied().unwrap_or(f64::NAN),
        min_delta: deltas.first().copied().unwrap_or(f64::NAN),
    })
}

pub fn cmd_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    with_workers(config.parallelism, config.workers, || {
        (config.l_min..=config.l_max).map(|length| sweep_length(config, length)).collect()
    })
}

/// One row of the S/N/r comparison for the `(2, 2)` steady state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Table1Row {
    #[serde(rename = "L")]
    pub length: usize,
    #[serde(rename = "S")]
    pub s: u64,
    #[serde(rename = "N_H2")]
    pub n_h2: usize,
    #[serde(rename = "r_H2")]
    pub r_h2: usize,
    #[serde(rename = "N_H3")]
    pub n_h3: Option<usize>,
    #[serde(rename = "r_H3")]
    pub r_h3: Option<usize>,
}

impl Table1Row {
    pub const CSV_HEADER: [&'static str; 6] = ["L", "S", "N(H2)", "r(H2)", "N(H3)", "r(H3)"];

    fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.length.to_string(),
            self.s.to_string(),
            self.n_h2.to_string(),
            self.r_h2.to_string(),
            opt(self.n_h3),
            opt(self.r_h3),
        ]
    }
}

/// Most frequent value; ties go to the smaller value.
fn majority(values: &[usize]) -> usize {
    let mut best = (0usize, 0usize);
    for &v in values {
        let count = values.iter().filter(|&&x| x == v).count();
        if count > best.1 || (count == best.1 && v < best.0) {
            best = (v, count);
        }
    }
    best.0
}

/// Commutator ranks of `seeds` instances (seeds `base_seed..`).
pub fn hoe_ranks(kind: ModelKind, length: usize, seeds: usize, base_seed: u64, par: Parallelism) -> Result<Vec<usize>> {
    let spec = ProfileTemplate::rho_me().spec_at(length);
    map_indexed(par, seeds, |i| {
        hoe_rank_trial(kind, length, &spec, base_seed.wrapping_add(i as u64), Parallelism::Sequential)
    })
    .into_iter()
    .collect()
}

pub fn cmd_table1(l_max: usize, seeds: usize, base_seed: u64, par: Parallelism) -> Result<Vec<Table1Row>> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    check_cap(l_max)?;
    (ModelKind::H2.min_length()..=l_max)
        .map(|length| {
            let s = predicted_lie_count(&DegeneracyProfile::new(vec![2, 2], length)?);
            let r_h2 = majority(&hoe_ranks(ModelKind::H2, length, seeds, base_seed, par)?);
            let (n_h3, r_h3) = if length >= ModelKind::H3.min_length() {
                let ranks = hoe_ranks(ModelKind::H3, length, seeds, base_seed, par)?;
                (Some(term_count(ModelKind::H3, length)?), Some(majority(&ranks)))
            } else {
                (None, None)
            };
            Ok(Table1Row { length, s, n_h2: term_count(ModelKind::H2, length)?, r_h2, n_h3, r_h3 })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredictRow {
    #[serde(rename = "L")]
    pub length: usize,
    /// Absent when the profile does not fit in `2^L` states.
    #[serde(rename = "S")]
    pub s: Option<u64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub recoverable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prediction {
    pub kind: ModelKind,
    pub profile: String,
    pub rows: Vec<PredictRow>,
    pub critical_length: Option<usize>,
}

impl Prediction {
    pub const CSV_HEADER: [&'static str; 4] = ["L", "S", "N", "recoverable"];
}

pub fn cmd_predict(kind: ModelKind, profile: &ProfileTemplate, l_max: usize) -> Result<Prediction> {
    if l_max > crate::pauli::MAX_SITES {
        return Err(Error::InvalidArgument(format!("l_max {l_max} is too large")));
    }
    let mut rows = Vec::new();
    for length in kind.min_length()..=l_max {
        let q = profile.q_at(length);
        let n = term_count(kind, length)?;
        let s = if profile.fits(length) {
            Some(predicted_lie_count(&DegeneracyProfile::new(q.clone(), length)?))
        } else {
            None
        };
        rows.push(PredictRow { length, s, n, recoverable: is_recoverable(kind, &q, length)? });
    }
    let critical_length = rows.iter().find(|r| r.recoverable).map(|r| r.length);
    Ok(Prediction { kind, profile: profile.to_string(), rows, critical_length })
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

/// Output options shared by the tabular subcommands.
#[derive(Clone, Copy, Debug)]
pub struct Emit {
    pub format: OutputFormat,
    /// Omit the generation timestamp so identical inputs give identical bytes.
    pub reproducible: bool,
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes a table as CSV (with `#` comment lines before and after) or as a
/// JSON document.
pub fn write_table<W: Write, T: Serialize>(
    out: &mut W,
    emit: Emit,
    header: &[&str],
    rows: &[T],
    records: impl Fn(&T) -> Vec<String>,
    footer: &[(String, String)],
) -> std::io::Result<()> {
    match emit.format {
        OutputFormat::Csv => {
            if !emit.reproducible {
                writeln!(out, "# generated_at_unix={}", timestamp())?;
            }
            {
                let mut writer = csv::Writer::from_writer(&mut *out);
                writer.write_record(header)?;
                for row in rows {
                    writer.write_record(records(row))?;
                }
                writer.flush()?;
            }
            for (key, value) in footer {
                writeln!(out, "# {key}={value}")?;
            }
        }
        OutputFormat::Json => {
            let mut doc = serde_json::Map::new();
            if !emit.reproducible {
                doc.insert("generated_at_unix".into(), timestamp().into());
            }
            for (key, value) in footer {
                doc.insert(key.clone(), value.clone().into());
            }
            doc.insert("rows".into(), serde_json::to_value(rows).map_err(std::io::Error::other)?);
            serde_json::to_writer_pretty(&mut *out, &serde_json::Value::Object(doc))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn write_sweep<W: Write>(out: &mut W, emit: Emit, rows: &[SweepRow]) -> Result<()> {
    write_table(out, emit, &SweepRow::CSV_HEADER, rows, SweepRow::csv_record, &[]).map_err(Error::from)
}

pub fn write_table1<W: Write>(out: &mut W, emit: Emit, rows: &[Table1Row]) -> Result<()> {
    write_table(out, emit, &Table1Row::CSV_HEADER, rows, Table1Row::csv_record, &[]).map_err(Error::from)
}

pub fn write_prediction<W: Write>(out: &mut W, emit: Emit, prediction: &Prediction) -> Result<()> {
    let lc = prediction.critical_length.map(|l| l.to_string()).unwrap_or_else(|| "none".into());
    let record = |r: &PredictRow| {
        vec![r.length.to_string(), r.s.map(|s| s.to_string()).unwrap_or_default(), r.n.to_string(), r.recoverable.to_string()]
    };
    write_table(out, emit, &Prediction::CSV_HEADER, &prediction.rows, record, &[("critical_length".into(), lc)])
        .map_err(Error::from)
}
