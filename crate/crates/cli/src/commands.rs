use std::path::{Path, PathBuf};

use gliofuse_core::metrics::{aggregate, evaluate_case, CaseReport};
use gliofuse_core::nifti::{read_label_volume, read_scalar_volume, write_file_atomic, write_label_volume, write_scalar_volume};
use gliofuse_core::postprocess::postprocess_case_with_report;
use gliofuse_core::preprocess::normalize_modality;
use gliofuse_core::staple::fuse_labels;
use gliofuse_core::CaseId;
use gliofuse_netkit::{Architecture, BuildConfig, LayerKind, Tensor5};
use log::{error, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cases::{case_file, cases_with, ensure_case_dir};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::report::evaluation_report;

/// Per-case result of a subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutcome {
    pub succeeded: Vec<CaseId>,
    pub failed: Vec<(CaseId, String)>,
    pub skipped: Vec<CaseId>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.failed.is_empty())
    }

    fn record<T>(&mut self, case: CaseId, result: CliResult<T>) {
        match result {
            Ok(_) => self.succeeded.push(case),
            Err(e) => {
                error!("{case}: {e}");
                self.failed.push((case, e.to_string()));
            }
        }
    }
}

/// Runs `f` on every case with at most `parallel` cases in flight; results keep the input order.
fn for_each_case<T: Send>(
    cases: &[CaseId],
    parallel: usize,
    f: impl Fn(&CaseId) -> CliResult<T> + Sync,
) -> CliResult<Vec<CliResult<T>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cases.par_iter().map(&f).collect()))
}

fn require_dir(dir: &Path, what: &str) -> CliResult<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} {} is not a directory", dir.display())))
    }
}

/// Z-score then percentile rescaling of every modality of every case.
/// A case is written only when all of its modalities succeed.
pub fn normalize(config: &PipelineConfig, input: &Path, output: &Path) -> CliResult<RunOutcome> {
    require_dir(input, "input")?;
    let ext = &config.extension;
    let suffixes = config.modality_suffixes.all();
    let cases = crate::cases::discover_cases(input)?;
    if cases.is_empty() {
        warn!("no cases under {}", input.display());
    }
    let results = for_each_case(&cases, config.parallel_cases, |case| {
        let mut volumes = Vec::with_capacity(suffixes.len());
        for suffix in suffixes {
            let path = case_file(input, case, suffix, ext);
            let volume = read_scalar_volume(&path)?;
            let normalized = normalize_modality(&volume, &config.normalization, &config.rescale, config.step_order)
                .map_err(|e| CliError::Io(format!("{suffix}: {e}")))?;
            volumes.push((suffix, normalized));
        }
        ensure_case_dir(output, case)?;
        for (suffix, volume) in &volumes {
            write_scalar_volume(volume, case_file(output, case, suffix, ext))?;
        }
        info!("{case}: normalized {} modalities", volumes.len());
        Ok(())
    })?;
    let mut outcome = RunOutcome::default();
    for (case, r) in cases.into_iter().zip(results) {
        outcome.record(case, r);
    }
    Ok(outcome)
}

/// Fuses the members' label maps of every case present in all member directories.
pub fn fuse(config: &PipelineConfig) -> CliResult<RunOutcome> {
    let members = &config.prediction_dirs;
    if members.is_empty() {
        return Err(CliError::Config("fuse needs at least one prediction directory".into()));
    }
    let output = config
        .output_dir
        .as_deref()
        .ok_or_else(|| CliError::Config("fuse needs an output directory".into()))?;
    let (suffix, ext) = (&config.label_suffix, &config.extension);
    let mut per_member = Vec::with_capacity(members.len());
    for dir in members {
        require_dir(dir, "prediction directory")?;
        per_member.push(cases_with(dir, suffix, ext)?);
    }
    let mut all: Vec<CaseId> = per_member.iter().flatten().cloned().collect();
    all.sort();
    all.dedup();

    let mut outcome = RunOutcome::default();
    let mut complete = Vec::new();
    for case in all {
        let absent: Vec<&PathBuf> = members
            .iter()
            .zip(&per_member)
            .filter(|(_, cases)| cases.binary_search(&case).is_err())
            .map(|(dir, _)| dir)
            .collect();
        if absent.is_empty() {
            complete.push(case);
        } else if config.strict {
            outcome.record::<()>(case, Err(CliError::Io(format!("missing from {}", absent[0].display()))));
        } else {
            warn!("{case}: missing from {}, skipped", absent[0].display());
            outcome.skipped.push(case);
        }
    }

    let results = for_each_case(&complete, config.parallel_cases, |case| {
        let predictions = members
            .iter()
            .map(|dir| read_label_volume(case_file(dir, case, suffix, ext)))
            .collect::<Result<Vec<_>, _>>()?;
        let fused = fuse_labels(&predictions, &config.staple, config.fusion_method)?;
        ensure_case_dir(output, case)?;
        write_label_volume(&fused, case_file(output, case, suffix, ext))?;
        info!("{case}: fused {} members ({})", predictions.len(), config.fusion_method);
        Ok(())
    })?;
    for (case, r) in complete.into_iter().zip(results) {
        outcome.record(case, r);
    }
    Ok(outcome)
}

/// Small-ET removal and TC hole repair on every label map under `input`.
pub fn postprocess(config: &PipelineConfig, input: &Path, output: &Path) -> CliResult<RunOutcome> {
    require_dir(input, "input")?;
    let (suffix, ext) = (&config.label_suffix, &config.extension);
    let cases = cases_with(input, suffix, ext)?;
    let results = for_each_case(&cases, config.parallel_cases, |case| {
        let labels = read_label_volume(case_file(input, case, suffix, ext))?;
        let (cleaned, report) = postprocess_case_with_report(&labels, &config.postprocess)?;
        ensure_case_dir(output, case)?;
        write_label_volume(&cleaned, case_file(output, case, suffix, ext))?;
        info!(
            "{case}: removed {} ET components ({} voxels), {} hole voxels",
            report.removed_et_components, report.removed_et_voxels, report.hole_voxels
        );
        Ok(())
    })?;
    let mut outcome = RunOutcome::default();
    for (case, r) in cases.into_iter().zip(results) {
        outcome.record(case, r);
    }
    Ok(outcome)
}

/// Scores predictions against ground truth and writes the JSON report.
/// Ground-truth cases without a prediction are listed as missing and count as failures.
pub fn evaluate(config: &PipelineConfig, pred: &Path, truth: &Path, report_path: &Path) -> CliResult<RunOutcome> {
    require_dir(pred, "prediction directory")?;
    require_dir(truth, "ground-truth directory")?;
    let (suffix, ext) = (&config.label_suffix, &config.extension);
    let truth_cases = cases_with(truth, suffix, ext)?;
    let (paired, missing): (Vec<CaseId>, Vec<CaseId>) = truth_cases
        .into_iter()
        .partition(|c| case_file(pred, c, suffix, ext).is_file());
    for case in cases_with(pred, suffix, ext)? {
        if !case_file(truth, &case, suffix, ext).is_file() {
            warn!("{case}: prediction without ground truth, ignored");
        }
    }

    let results = for_each_case(&paired, config.parallel_cases, |case| {
        let p = read_label_volume(case_file(pred, case, suffix, ext))?;
        let t = read_label_volume(case_file(truth, case, suffix, ext))?;
        Ok(evaluate_case(case.clone(), &p, &t, &config.metrics)?)
    })?;
    let mut outcome = RunOutcome::default();
    let mut reports: Vec<CaseReport> = Vec::new();
    for (case, r) in paired.into_iter().zip(results) {
        if let Ok(report) = &r {
            reports.push(report.clone());
        }
        outcome.record(case, r);
    }
    for case in &missing {
        outcome.record::<()>(case.clone(), Err(CliError::Io("no prediction".into())));
    }
    let summary = if reports.is_empty() { None } else { Some(aggregate(&reports)?) };
    let doc = evaluation_report(&reports, summary.as_ref(), &missing, config);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(parent) = report_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    write_file_atomic(report_path, text.as_bytes())?;
    info!("evaluated {} cases, {} missing", reports.len(), missing.len());
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoNetOptions {
    pub architecture: Architecture,
    pub input_size: [usize; 3],
    pub batch: usize,
    pub num_classes: usize,
    pub base_features: usize,
    pub seed: u64,
}

impl DemoNetOptions {
    pub fn new(architecture: Architecture, input_size: [usize; 3]) -> Self {
        Self {
            architecture,
            input_size,
            batch: 1,
            num_classes: 4,
            base_features: 32,
            seed: 0,
        }
    }
}

/// Builds the network, runs a seeded random forward pass and returns the layer table.
pub fn demo_net(options: &DemoNetOptions) -> CliResult<String> {
    let arch = options.architecture;
    let build = BuildConfig {
        base_features: options.base_features,
        seed: options.seed,
        ..BuildConfig::new(options.num_classes, arch.default_depth())
    };
    let net = arch.build(&build).map_err(|e| CliError::Config(e.to_string()))?;
    let [d, h, w] = options.input_size;
    let divisor = net.divisor();
    if (0..3).any(|a| options.input_size[a] == 0 || !options.input_size[a].is_multiple_of(divisor[a])) {
        return Err(CliError::Config(format!(
            "input size {d}x{h}x{w} is not a positive multiple of {}x{}x{} for {}",
            divisor[0], divisor[1], divisor[2], net.name()
        )));
    }
    let shape = [options.batch, net.in_channels(), d, h, w];
    let mut table = net.summary(shape)?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let input = Tensor5::from_fn(shape, |_, _, _, _, _| rng.gen_range(-1.0..1.0))?;
    let output = net.forward(&input)?;
    let expected = [options.batch, options.num_classes, d, h, w];
    if output.shape() != expected {
        return Err(CliError::Io(format!("output shape {:?}, expected {expected:?}", output.shape())));
    }
    // Encoder-decoder skips span a change of resolution; residual ones do not.
    let shapes = net.output_shapes(shape)?;
    let long_skips = net
        .skips()
        .iter()
        .filter(|e| shapes[e.from..e.to].iter().any(|s| s[2..] != shapes[e.from][2..]))
        .count();
    let gates = net.layers().iter().filter(|l| l.kind() == LayerKind::AttentionGate).count();
    table.push_str(&format!(
        "skip connections: {} ({long_skips} encoder-decoder), attention gates: {gates}\n",
        net.skips().len()
    ));
    table.push_str(&format!("forward output: {:?}\n", output.shape()));
    Ok(table)
}
