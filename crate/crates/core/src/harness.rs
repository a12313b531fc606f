//! The extrinsic-evaluation protocol: train/validation combinations of real
//! and synthetic data at several fake/real ratios, repeated seeded runs, and
//! count/mean/SD aggregation against each run's own baseline.
//!
//! One run trains a single GAN on the 60 labeled trips, synthesizes fakes at
//! every ratio, pretrains one autoencoder on the unlabeled pool, and then
//! grid-searches a classifier for each of the 25 cells: the (R, R, 0%)
//! baseline plus 8 source pairs x 3 ratios. Test AUROC for every cell is
//! computed on all real trips against their hidden ground truth. Note that
//! the test set deliberately includes the classifier's training trips; that
//! is the protocol being reproduced, and every report says so in its header.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{contract_err, shape_err, Error, Result};
use crate::features::{extract_features, FeatureVector};
use crate::fmath;
use crate::label::DrivingClass;
use crate::preprocess::{preprocess_pipeline, FitSubset, RawTrip, ScalerParams, Trip};
use crate::rcgan::{synthesize, train_rcgan, RcganConfig};
use crate::rng::{derive_seed, stream_rng};
use crate::semisup::{
    auroc, fit_feature_scaler, grid_search, roc_curve, scale_features, train_autoencoder, AeShape,
    GridConfig, GridSpec, RocCurve,
};

/// Where a train or validation set draws its trips from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetSource {
    /// Real labeled trips.
    R,
    /// GAN-generated trips.
    F,
    /// Union of the two.
    RF,
}

impl SetSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SetSource::R => "R",
            SetSource::F => "F",
            SetSource::RF => "R+F",
        }
    }

    pub fn parse(s: &str) -> Option<SetSource> {
        match s {
            "R" => Some(SetSource::R),
            "F" => Some(SetSource::F),
            "R+F" => Some(SetSource::RF),
            _ => None,
        }
    }

    fn uses_real(self) -> bool {
        matches!(self, SetSource::R | SetSource::RF)
    }

    fn uses_fake(self) -> bool {
        matches!(self, SetSource::F | SetSource::RF)
    }
}

/// Source pairs in report order.
pub const PAIR_ORDER: [(SetSource, SetSource); 8] = [
    (SetSource::RF, SetSource::RF),
    (SetSource::R, SetSource::F),
    (SetSource::F, SetSource::R),
    (SetSource::RF, SetSource::R),
    (SetSource::F, SetSource::F),
    (SetSource::R, SetSource::RF),
    (SetSource::F, SetSource::RF),
    (SetSource::RF, SetSource::F),
];

/// One cell of the combination grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinationSpec {
    pub train: SetSource,
    pub val: SetSource,
    /// Fake/real ratio; 0 only for the baseline.
    pub ratio: f64,
}

impl CombinationSpec {
    pub fn baseline() -> CombinationSpec {
        CombinationSpec {
            train: SetSource::R,
            val: SetSource::R,
            ratio: 0.0,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.ratio == 0.0
    }
}

/// The full cell list of one run: baseline first, then the 8 pairs at each
/// ratio, pair-major.
pub fn all_cells(ratios: &[f64]) -> Vec<CombinationSpec> {
    let mut cells = vec![CombinationSpec::baseline()];
    for (train, val) in PAIR_ORDER {
        for &ratio in ratios {
            cells.push(CombinationSpec { train, val, ratio });
        }
    }
    cells
}

/// One scaled feature vector with its class, as consumed by the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: u32,
    pub features: FeatureVector,
    pub class: DrivingClass,
}

impl Example {
    fn as_pair(&self) -> (FeatureVector, DrivingClass) {
        (self.features.clone(), self.class)
    }
}

fn split_by_class(items: &[Example]) -> (Vec<&Example>, Vec<&Example>) {
    let normal = items
        .iter()
        .filter(|e| e.class == DrivingClass::Normal)
        .collect();
    let aggressive = items
        .iter()
        .filter(|e| e.class == DrivingClass::Aggressive)
        .collect();
    (normal, aggressive)
}

/// Builds the train and validation sets of one cell.
///
/// The reals are stratified-split into equal halves with the rng (the run
/// reseeds every cell identically, so all 25 cells share one split); fakes
/// split into deterministic halves only when they appear on both sides,
/// otherwise the whole fake set goes to its single side. "R" always means
/// the corresponding half, never all 60, so the two sets stay disjoint.
pub fn build_sets<R: RngCore>(
    reals: &[Example],
    fakes: &[Example],
    spec: &CombinationSpec,
    rng: &mut R,
) -> Result<(Vec<Example>, Vec<Example>)> {
    let (real_normal, real_aggressive) = split_by_class(reals);
    if real_normal.len() != real_aggressive.len() {
        return Err(contract_err!(
            "build_sets: real set unbalanced ({} vs {})",
            real_normal.len(),
            real_aggressive.len()
        ));
    }
    if real_normal.len() % 2 != 0 || reals.is_empty() {
        return Err(contract_err!(
            "build_sets: real set must split into equal stratified halves"
        ));
    }
    let expected_fakes = spec.ratio * reals.len() as f64;
    if (expected_fakes - fmath::round(expected_fakes)).abs() > 1e-9 {
        return Err(contract_err!(
            "build_sets: ratio {} of {} reals is not a whole number",
            spec.ratio,
            reals.len()
        ));
    }
    if fakes.len() != fmath::round(expected_fakes) as usize {
        return Err(contract_err!(
            "build_sets: got {} fakes, ratio {} of {} reals needs {}",
            fakes.len(),
            spec.ratio,
            reals.len(),
            fmath::round(expected_fakes) as usize
        ));
    }
    if (spec.train.uses_fake() || spec.val.uses_fake()) && fakes.is_empty() {
        return Err(contract_err!(
            "build_sets: cell {}/{} needs fakes but none were provided",
            spec.train.as_str(),
            spec.val.as_str()
        ));
    }

    // stratified half/half split of the reals
    let mut r_train: Vec<Example> = Vec::new();
    let mut r_val: Vec<Example> = Vec::new();
    for class_items in [&real_normal, &real_aggressive] {
        let mut idx: Vec<usize> = (0..class_items.len()).collect();
        idx.shuffle(rng);
        let half = class_items.len() / 2;
        for (pos, &i) in idx.iter().enumerate() {
            if pos < half {
                r_train.push(class_items[i].clone());
            } else {
                r_val.push(class_items[i].clone());
            }
        }
    }

    // fake placement
    let (mut f_train, mut f_val): (Vec<Example>, Vec<Example>) = (Vec::new(), Vec::new());
    let both_sides = spec.train.uses_fake() && spec.val.uses_fake();
    if both_sides {
        let (fake_normal, fake_aggressive) = split_by_class(fakes);
        for (class_idx, block) in [&fake_normal, &fake_aggressive].into_iter().enumerate() {
            // alternate the odd-count rounding between classes so the two
            // halves end up the same size
            let take = if class_idx == 0 {
                (block.len() + 1) / 2
            } else {
                block.len() / 2
            };
            for (pos, e) in block.iter().enumerate() {
                if pos < take {
                    f_train.push((*e).clone());
                } else {
                    f_val.push((*e).clone());
                }
            }
        }
    } else if spec.train.uses_fake() {
        f_train = fakes.to_vec();
    } else if spec.val.uses_fake() {
        f_val = fakes.to_vec();
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    if spec.train.uses_real() {
        train.extend(r_train);
    }
    if spec.train.uses_fake() {
        train.extend(f_train);
    }
    if spec.val.uses_real() {
        val.extend(r_val);
    }
    if spec.val.uses_fake() {
        val.extend(f_val);
    }
    if train.is_empty() || val.is_empty() {
        return Err(contract_err!(
            "build_sets: cell {}/{} produced an empty set",
            spec.train.as_str(),
            spec.val.as_str()
        ));
    }
    Ok((train, val))
}

/// Everything a run needs, derived once from the raw dataset: scaled trips,
/// scaled features for every trip, and the index split into labeled and
/// unlabeled pools.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub trips: Vec<Trip>,
    pub signal_scaler: ScalerParams,
    pub feature_scaler: ScalerParams,
    pub examples: Vec<Example>,
    pub labeled_idx: Vec<usize>,
    pub unlabeled_idx: Vec<usize>,
}

/// Runs the preprocessing pipeline (scaler fitted on the full real set),
/// extracts features, and fits the feature scaler on the unlabeled pool the
/// autoencoder trains on.
pub fn prepare(raws: &[RawTrip]) -> Result<PreparedData> {
    let (trips, signal_scaler) = preprocess_pipeline(raws, FitSubset::All)?;
    let mut labeled_idx = Vec::new();
    let mut unlabeled_idx = Vec::new();
    for (i, trip) in trips.iter().enumerate() {
        if trip.truth.is_none() {
            return Err(contract_err!(
                "prepare: trip {} has no ground truth; test AUROC needs it",
                trip.id
            ));
        }
        if trip.label.is_some() {
            labeled_idx.push(i);
        } else {
            unlabeled_idx.push(i);
        }
    }
    if labeled_idx.is_empty() {
        return Err(contract_err!("prepare: no labeled trips"));
    }
    if unlabeled_idx.is_empty() {
        return Err(contract_err!(
            "prepare: no unlabeled trips to pretrain the autoencoder on"
        ));
    }
    let raw_features: Vec<FeatureVector> = trips
        .iter()
        .map(|t| extract_features(&t.values))
        .collect::<Result<_>>()?;
    let fit_set: Vec<FeatureVector> = unlabeled_idx
        .iter()
        .map(|&i| raw_features[i].clone())
        .collect();
    let feature_scaler = fit_feature_scaler(&fit_set)?;
    let examples = trips
        .iter()
        .zip(&raw_features)
        .map(|(t, f)| {
            Ok(Example {
                id: t.id,
                features: scale_features(&feature_scaler, f)?,
                class: t.truth.expect("checked above"),
            })
        })
        .collect::<Result<_>>()?;
    Ok(PreparedData {
        trips,
        signal_scaler,
        feature_scaler,
        examples,
        labeled_idx,
        unlabeled_idx,
    })
}

/// Experiment-level configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub rcgan: RcganConfig,
    pub ratios: Vec<f64>,
    pub grid: GridSpec,
    pub ae_epochs: usize,
    pub ae_learning_rate: f64,
    /// Evaluate only the (R, R, 0) cell and skip GAN training entirely.
    pub baseline_only: bool,
}

/// Documented default seed for every tool in this workspace.
pub const DEFAULT_SEED: u64 = 7;

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            runs: 20,
            base_seed: DEFAULT_SEED,
            rcgan: RcganConfig::default(),
            ratios: vec![0.5, 1.0, 1.5],
            grid: GridSpec::default(),
            ae_epochs: 100,
            ae_learning_rate: 0.001,
            baseline_only: false,
        }
    }
}

// derived-stream tags within one run
const STREAM_GAN: u64 = 1;
const STREAM_AE: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const STREAM_FAKES_BASE: u64 = 10;
const STREAM_GRID_BASE: u64 = 100;

/// One grid cell's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub spec: CombinationSpec,
    pub auroc: f64,
    pub grid_choice: GridConfig,
}

/// The 25 test AUROCs of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub cells: Vec<CellResult>,
}

impl RunResult {
    pub fn baseline_auroc(&self) -> Result<f64> {
        self.cells
            .iter()
            .find(|c| c.spec.is_baseline())
            .map(|c| c.auroc)
            .ok_or_else(|| contract_err!("run {} has no baseline cell", self.run))
    }
}

/// A run's report plus the per-cell ROC curves (kept out of the report so
/// the CSV round-trips exactly).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub rocs: Vec<RocCurve>,
}

/// Executes one full run: GAN training on the labeled trips, synthesis at
/// every ratio, autoencoder pretraining on the unlabeled pool, and a
/// grid-searched classifier per cell, each tested on all real trips.
pub fn run_experiment(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    run_idx: usize,
) -> Result<RunOutput> {
    let run_seed = derive_seed(cfg.base_seed, run_idx as u64);
    let labeled_trips: Vec<Trip> = data
        .labeled_idx
        .iter()
        .map(|&i| data.trips[i].clone())
        .collect();
    let labeled_examples: Vec<Example> = data
        .labeled_idx
        .iter()
        .map(|&i| data.examples[i].clone())
        .collect();

    // fakes per ratio from one GAN
    let mut fakes_by_ratio: Vec<(f64, Vec<Example>)> = Vec::new();
    if !cfg.baseline_only {
        let mut gan_rng = stream_rng(run_seed, STREAM_GAN);
        let trained = train_rcgan(&labeled_trips, &cfg.rcgan, &mut gan_rng)?;
        for (ratio_idx, &ratio) in cfg.ratios.iter().enumerate() {
            let mut fake_rng = stream_rng(run_seed, STREAM_FAKES_BASE + ratio_idx as u64);
            let fakes = synthesize(
                &trained.generator,
                ratio,
                labeled_trips.len(),
                &mut fake_rng,
            )?;
            let examples = fakes
                .iter()
                .map(|t| {
                    let f = extract_features(&t.values)?;
                    Ok(Example {
                        id: t.id,
                        features: scale_features(&data.feature_scaler, &f)?,
                        class: t.truth.expect("fakes carry their condition"),
                    })
                })
                .collect::<Result<Vec<Example>>>()?;
            fakes_by_ratio.push((ratio, examples));
        }
    }

    // one autoencoder per run, trained on the unlabeled pool
    let unlabeled: Vec<Vec<f64>> = data
        .unlabeled_idx
        .iter()
        .map(|&i| data.examples[i].features.values().to_vec())
        .collect();
    let mut ae_rng = stream_rng(run_seed, STREAM_AE);
    let (ae, _ae_losses) = train_autoencoder(
        &unlabeled,
        &AeShape::default(),
        cfg.ae_epochs,
        cfg.ae_learning_rate,
        &mut ae_rng,
    )?;

    let cells = if cfg.baseline_only {
        vec![CombinationSpec::baseline()]
    } else {
        all_cells(&cfg.ratios)
    };
    let test_labels: Vec<bool> = data
        .examples
        .iter()
        .map(|e| e.class == DrivingClass::Aggressive)
        .collect();

    let empty: Vec<Example> = Vec::new();
    let mut results = Vec::with_capacity(cells.len());
    let mut rocs = Vec::with_capacity(cells.len());
    for (cell_idx, spec) in cells.iter().enumerate() {
        let fakes = if spec.is_baseline() {
            &empty
        } else {
            &fakes_by_ratio
                .iter()
                .find(|(r, _)| *r == spec.ratio)
                .ok_or_else(|| contract_err!("no fakes synthesized for ratio {}", spec.ratio))?
                .1
        };
        // identical seed for every cell: all cells share one real split
        let mut split_rng = stream_rng(run_seed, STREAM_SPLIT);
        let (train, val) = build_sets(&labeled_examples, fakes, spec, &mut split_rng)?;
        let train_pairs: Vec<_> = train.iter().map(Example::as_pair).collect();
        let val_pairs: Vec<_> = val.iter().map(Example::as_pair).collect();
        let grid_seed = derive_seed(run_seed, STREAM_GRID_BASE + cell_idx as u64);
        let outcome = grid_search(&ae, &train_pairs, &val_pairs, &cfg.grid, grid_seed)
            .map_err(|e| match e {
                Error::Contract(msg) => contract_err!(
                    "cell {}/{} at ratio {}: {msg}",
                    spec.train.as_str(),
                    spec.val.as_str(),
                    spec.ratio
                ),
                other => other,
            })?;
        let scores: Vec<f64> = data
            .examples
            .iter()
            .map(|e| crate::semisup::predict(&outcome.best, &e.features))
            .collect::<Result<_>>()?;
        let cell_auroc = auroc(&scores, &test_labels)?;
        results.push(CellResult {
            spec: *spec,
            auroc: cell_auroc,
            grid_choice: outcome.best_config,
        });
        rocs.push(roc_curve(&scores, &test_labels)?);
    }
    Ok(RunOutput {
        result: RunResult {
            run: run_idx,
            seed: run_seed,
            cells: results,
        },
        rocs,
    })
}

/// Aggregate of one cell over all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub train: SetSource,
    pub val: SetSource,
    pub ratio: f64,
    /// Runs whose AUROC strictly exceeded that run's own baseline.
    pub count: usize,
    /// Mean of the above-baseline AUROCs (None when count = 0).
    pub mean: Option<f64>,
    /// Sample SD of the above-baseline AUROCs (None when count < 2).
    pub sd: Option<f64>,
}

/// Cross-run aggregate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub ratios: Vec<f64>,
    pub cells: Vec<CellAggregate>,
    /// Runs where at least one non-baseline cell beat the baseline.
    pub improved_runs: usize,
    pub overall_fraction: f64,
}

/// Counts, per cell, the runs strictly above their own baseline, and the
/// overall fraction of runs improved anywhere. Equal-to-baseline never
/// counts.
pub fn aggregate(results: &[RunResult]) -> Result<AggregateReport> {
    let first = results
        .first()
        .ok_or_else(|| contract_err!("aggregate: no runs"))?;
    let specs: Vec<CombinationSpec> = first
        .cells
        .iter()
        .filter(|c| !c.spec.is_baseline())
        .map(|c| c.spec)
        .collect();
    let mut ratios: Vec<f64> = Vec::new();
    for spec in &specs {
        if !ratios.contains(&spec.ratio) {
            ratios.push(spec.ratio);
        }
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); specs.len()];
    let mut improved_runs = 0;
    for run in results {
        if run.cells.len() != first.cells.len() {
            return Err(shape_err!(
                "aggregate: run {} has {} cells, run {} has {}",
                run.run,
                run.cells.len(),
                first.run,
                first.cells.len()
            ));
        }
        let baseline = run.baseline_auroc()?;
        let mut any = false;
        for cell in run.cells.iter().filter(|c| !c.spec.is_baseline()) {
            let slot = specs
                .iter()
                .position(|s| s == &cell.spec)
                .ok_or_else(|| contract_err!("aggregate: runs disagree on the cell grid"))?;
            if cell.auroc > baseline {
                values[slot].push(cell.auroc);
                any = true;
            }
        }
        if any {
            improved_runs += 1;
        }
    }
    let cells = specs
        .iter()
        .zip(&values)
        .map(|(spec, vals)| {
            let count = vals.len();
            let mean = if count > 0 {
                Some(vals.iter().sum::<f64>() / count as f64)
            } else {
                None
            };
            let sd = if count > 1 {
                let m = mean.expect("count > 0");
                Some(fmath::sqrt(
                    vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (count as f64 - 1.0),
                ))
            } else {
                None
            };
            CellAggregate {
                train: spec.train,
                val: spec.val,
                ratio: spec.ratio,
                count,
                mean,
                sd,
            }
        })
        .collect();
    Ok(AggregateReport {
        runs: results.len(),
        ratios,
        cells,
        improved_runs,
        overall_fraction: improved_runs as f64 / results.len() as f64,
    })
}

pub const PROTOCOL_NOTE: &str =
    "test AUROC is computed on all real trips, including trips the classifier trained on";

fn push_provenance(out: &mut String, provenance: &str) {
    if !provenance.is_empty() {
        out.push_str("# ");
        out.push_str(provenance);
        out.push('\n');
    }
    out.push_str("# note: ");
    out.push_str(PROTOCOL_NOTE);
    out.push('\n');
}

/// Renders one run as CSV (`parse_run_csv` is its exact inverse).
pub fn render_run_csv(result: &RunResult, provenance: &str) -> String {
    let mut out = String::new();
    push_provenance(&mut out, provenance);
    out.push_str("run,seed,train_set,val_set,ratio,auroc,grid_lr,grid_epochs,grid_activation\n");
    for cell in &result.cells {
        out.push_str(&alloc::format!(
            "{},{},{},{},{},{},{},{},{}\n",
            result.run,
            result.seed,
            cell.spec.train.as_str(),
            cell.spec.val.as_str(),
            cell.spec.ratio,
            cell.auroc,
            cell.grid_choice.learning_rate,
            cell.grid_choice.epochs,
            cell.grid_choice.activation.as_str(),
        ));
    }
    out
}

fn parse_err(line: &str, what: &str) -> Error {
    Error::Parse(alloc::format!("{what} in row: {line}"))
}

/// Parses the output of [`render_run_csv`].
pub fn parse_run_csv(text: &str) -> Result<RunResult> {
    let mut run: Option<(usize, u64)> = None;
    let mut cells = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("run,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(parse_err(line, "expected 9 fields"));
        }
        let run_idx: usize = fields[0].parse().map_err(|_| parse_err(line, "bad run"))?;
        let seed: u64 = fields[1].parse().map_err(|_| parse_err(line, "bad seed"))?;
        match &run {
            None => run = Some((run_idx, seed)),
            Some((r, s)) if *r != run_idx || *s != seed => {
                return Err(parse_err(line, "inconsistent run/seed"));
            }
            _ => {}
        }
        let train = SetSource::parse(fields[2]).ok_or_else(|| parse_err(line, "bad train set"))?;
        let val = SetSource::parse(fields[3]).ok_or_else(|| parse_err(line, "bad val set"))?;
        let ratio: f64 = fields[4].parse().map_err(|_| parse_err(line, "bad ratio"))?;
        let auroc: f64 = fields[5].parse().map_err(|_| parse_err(line, "bad auroc"))?;
        let lr: f64 = fields[6].parse().map_err(|_| parse_err(line, "bad lr"))?;
        let epochs: usize = fields[7]
            .parse()
            .map_err(|_| parse_err(line, "bad epochs"))?;
        let activation = crate::numerics::Activation::parse(fields[8])
            .ok_or_else(|| parse_err(line, "bad activation"))?;
        cells.push(CellResult {
            spec: CombinationSpec { train, val, ratio },
            auroc,
            grid_choice: GridConfig {
                learning_rate: lr,
                epochs,
                activation,
            },
        });
    }
    let (run, seed) = run.ok_or_else(|| Error::Parse(String::from("no data rows")))?;
    Ok(RunResult { run, seed, cells })
}

fn format_ratio_percent(ratio: f64) -> String {
    let pct = ratio * 100.0;
    if pct == fmath::round(pct) {
        alloc::format!("{}%", pct as i64)
    } else {
        alloc::format!("{pct}%")
    }
}

/// Markdown table of one run; AUROCs above the run's baseline are bold.
pub fn render_run_markdown(result: &RunResult) -> Result<String> {
    let baseline = result.baseline_auroc()?;
    let mut out = String::new();
    out.push_str(&alloc::format!(
        "# Classifier performance (run {}, seed {})\n\n",
        result.run,
        result.seed
    ));
    out.push_str(&alloc::format!("Note: {PROTOCOL_NOTE}.\n\n"));
    out.push_str("| Training Set | Validation Set | Ratio Fake/Real | AUROC |\n");
    out.push_str("|---|---|---|---|\n");
    for cell in &result.cells {
        let shown = alloc::format!("{:.3}", cell.auroc);
        let auroc = if cell.auroc > baseline {
            alloc::format!("**{shown}**")
        } else {
            shown
        };
        out.push_str(&alloc::format!(
            "| {} | {} | {} | {} |\n",
            cell.spec.train.as_str(),
            cell.spec.val.as_str(),
            format_ratio_percent(cell.spec.ratio),
            auroc
        ));
    }
    Ok(out)
}

fn opt_to_string(v: Option<f64>) -> String {
    match v {
        Some(x) => alloc::format!("{x}"),
        None => String::new(),
    }
}

/// Renders the aggregate as CSV: one row per combination cell plus a final
/// overall row (`parse_aggregate_csv` is its exact inverse).
pub fn render_aggregate_csv(report: &AggregateReport, provenance: &str) -> String {
    let mut out = String::new();
    push_provenance(&mut out, provenance);
    out.push_str("train_set,val_set,ratio,count_above,mean_above,sd_above,runs\n");
    for cell in &report.cells {
        out.push_str(&alloc::format!(
            "{},{},{},{},{},{},{}\n",
            cell.train.as_str(),
            cell.val.as_str(),
            cell.ratio,
            cell.count,
            opt_to_string(cell.mean),
            opt_to_string(cell.sd),
            report.runs
        ));
    }
    out.push_str(&alloc::format!(
        "overall,,,{},{},,{}\n",
        report.improved_runs,
        report.overall_fraction,
        report.runs
    ));
    out
}

/// Parses the output of [`render_aggregate_csv`].
pub fn parse_aggregate_csv(text: &str) -> Result<AggregateReport> {
    let mut cells = Vec::new();
    let mut overall: Option<(usize, f64, usize)> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("train_set,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(line, "expected 7 fields"));
        }
        if fields[0] == "overall" {
            let improved = fields[3]
                .parse()
                .map_err(|_| parse_err(line, "bad improved count"))?;
            let fraction = fields[4]
                .parse()
                .map_err(|_| parse_err(line, "bad fraction"))?;
            let runs = fields[6].parse().map_err(|_| parse_err(line, "bad runs"))?;
            overall = Some((improved, fraction, runs));
            continue;
        }
        let train = SetSource::parse(fields[0]).ok_or_else(|| parse_err(line, "bad train set"))?;
        let val = SetSource::parse(fields[1]).ok_or_else(|| parse_err(line, "bad val set"))?;
        let ratio: f64 = fields[2].parse().map_err(|_| parse_err(line, "bad ratio"))?;
        let count: usize = fields[3].parse().map_err(|_| parse_err(line, "bad count"))?;
        let mean = if fields[4].is_empty() {
            None
        } else {
            Some(fields[4].parse().map_err(|_| parse_err(line, "bad mean"))?)
        };
        let sd = if fields[5].is_empty() {
            None
        } else {
            Some(fields[5].parse().map_err(|_| parse_err(line, "bad sd"))?)
        };
        cells.push(CellAggregate {
            train,
            val,
            ratio,
            count,
            mean,
            sd,
        });
    }
    let (improved_runs, overall_fraction, runs) =
        overall.ok_or_else(|| Error::Parse(String::from("missing overall row")))?;
    let mut ratios = Vec::new();
    for cell in &cells {
        if !ratios.contains(&cell.ratio) {
            ratios.push(cell.ratio);
        }
    }
    Ok(AggregateReport {
        runs,
        ratios,
        cells,
        improved_runs,
        overall_fraction,
    })
}

/// Markdown aggregate: one row per source pair with per-ratio counts and
/// mean/SD pooled over that pair's above-baseline AUROCs.
pub fn render_aggregate_markdown(report: &AggregateReport) -> String {
    let mut out = String::new();
    out.push_str(&alloc::format!(
        "# Runs outperforming the baseline ({} runs)\n\n",
        report.runs
    ));
    out.push_str(&alloc::format!("Note: {PROTOCOL_NOTE}.\n\n"));
    out.push_str("| Training | Validation |");
    for ratio in &report.ratios {
        out.push_str(&alloc::format!(" {} |", format_ratio_percent(*ratio)));
    }
    out.push_str(" Mean | SD |\n|---|---|");
    for _ in &report.ratios {
        out.push_str("---|");
    }
    out.push_str("---|---|\n");
    for (train, val) in PAIR_ORDER {
        let row: Vec<&CellAggregate> = report
            .cells
            .iter()
            .filter(|c| c.train == train && c.val == val)
            .collect();
        if row.is_empty() {
            continue;
        }
        out.push_str(&alloc::format!("| {} | {} |", train.as_str(), val.as_str()));
        for ratio in &report.ratios {
            let count = row
                .iter()
                .find(|c| c.ratio == *ratio)
                .map(|c| c.count)
                .unwrap_or(0);
            out.push_str(&alloc::format!(" {count} |"));
        }
        // pool the pair's above-baseline values from the per-cell moments
        let n: usize = row.iter().map(|c| c.count).sum();
        let sum: f64 = row
            .iter()
            .filter_map(|c| c.mean.map(|m| m * c.count as f64))
            .sum();
        let sumsq: f64 = row
            .iter()
            .filter_map(|c| {
                c.mean.map(|m| {
                    let s = m * c.count as f64;
                    let var_part = match c.sd {
                        Some(sd) => sd * sd * (c.count as f64 - 1.0),
                        None => 0.0,
                    };
                    var_part + s * s / c.count as f64
                })
            })
            .sum();
        if n == 0 {
            out.push_str(" -- | -- |\n");
        } else {
            let mean = sum / n as f64;
            let mean_str = alloc::format!("{mean:.3}");
            if n > 1 {
                let var = (sumsq - sum * sum / n as f64) / (n as f64 - 1.0);
                out.push_str(&alloc::format!(
                    " {mean_str} | {:.3} |\n",
                    fmath::sqrt(var.max(0.0))
                ));
            } else {
                out.push_str(&alloc::format!(" {mean_str} | -- |\n"));
            }
        }
    }
    out.push_str(&alloc::format!(
        "\nIn {:.0}% of runs ({} of {}), at least one combination exceeded its baseline.\n",
        report.overall_fraction * 100.0,
        report.improved_runs,
        report.runs
    ));
    out
}

/// Renders one ROC curve as `threshold,fpr,tpr` CSV.
pub fn render_roc_csv(roc: &RocCurve, provenance: &str) -> String {
    let mut out = String::new();
    if !provenance.is_empty() {
        out.push_str("# ");
        out.push_str(provenance);
        out.push('\n');
    }
    out.push_str(&alloc::format!("# auroc={}\n", roc.auroc));
    out.push_str("threshold,fpr,tpr\n");
    for p in &roc.points {
        out.push_str(&alloc::format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    out
}
