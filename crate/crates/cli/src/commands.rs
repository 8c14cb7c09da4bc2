//! Command implementations. Every command is deterministic given its
//! configuration and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use bjdm_core::bipartite::{BiadjacencyState, BipartiteMultigraph};
use bjdm_core::dataset::{
    generate_synthetic, generate_synthetic_sequences, parse_sequential, parse_transactional,
    SequenceDataset, TransactionalDataset,
};
use bjdm_core::mining::{
    self, mine_frequent_itemsets, mine_frequent_sequences, pattern_length_histogram,
    sequence_length_histogram, Threshold,
};
use bjdm_core::samplers::{
    chain_weight_sequence, chain_weight_transactional, sample_many, sample_many_sequences,
    sample_many_sequences_timed, sample_many_timed, ChainOptions, SamplerId,
};
use bjdm_core::stats::{
    convergence_trace, convergence_trace_sequences, default_k_grid, empirical_pvalue, Direction,
    PvalueReport,
};

use crate::config::{Command, Format, JobConfig};
use crate::CliError;

enum Dataset {
    Trans(TransactionalDataset),
    Seq(SequenceDataset),
}

fn read_input(path: &str, format: Format) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(&path, e))?;
    match format {
        Format::Trans => Ok(Dataset::Trans(parse_transactional(&text)?)),
        Format::Seq => Ok(Dataset::Seq(parse_sequential(&text)?)),
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(&parent.display(), e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(&path.display(), e))
}

fn emit(out: &Option<String>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_output(Path::new(path), contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn single_sampler(config: &JobConfig) -> Result<SamplerId, CliError> {
    match config.samplers.as_slice() {
        [one] => Ok(SamplerId::parse(one)?),
        _ => Err(CliError::validation("exactly one --algo is required")),
    }
}

fn sampler_list(config: &JobConfig) -> Result<Vec<SamplerId>, CliError> {
    if config.samplers.is_empty() {
        return Err(CliError::validation("at least one --algo is required"));
    }
    config.samplers.iter().map(|s| Ok(SamplerId::parse(s)?)).collect()
}

fn check_kind(sampler: SamplerId, format: Format) -> Result<(), CliError> {
    let matches = sampler.is_sequence_sampler() == matches!(format, Format::Seq);
    if matches {
        Ok(())
    } else {
        Err(CliError::validation(&format!(
            "sampler {sampler} does not apply to --format {}",
            match format {
                Format::Trans => "trans",
                Format::Seq => "seq",
            }
        )))
    }
}

/// `--swaps` wins over `--k`; the default is each sampler's multiplier.
fn resolve_swaps(config: &JobConfig, sampler: SamplerId, w: u64) -> Result<u64, CliError> {
    match (config.num_swaps, config.k_multiplier) {
        (Some(_), Some(_)) => {
            Err(CliError::validation("--swaps and --k are mutually exclusive"))
        }
        (Some(s), None) => Ok(s),
        (None, Some(k)) if k >= 0.0 => Ok((k * w as f64).floor() as u64),
        (None, Some(k)) => Err(CliError::validation(&format!("negative k multiplier {k}"))),
        (None, None) => Ok((sampler.default_swap_multiplier() * w as f64).floor() as u64),
    }
}

fn theta_of(config: &JobConfig) -> Result<Threshold, CliError> {
    let theta = config
        .theta
        .ok_or_else(|| CliError::validation("--theta is required for this command"))?;
    Ok(Threshold::from_cli_value(theta)?)
}

fn chain_options(config: &JobConfig) -> ChainOptions {
    ChainOptions { check_invariants: config.check_invariants, weight: None }
}

pub fn execute(config: &JobConfig) -> Result<(), CliError> {
    match config.command {
        Command::Sample => cmd_sample(config),
        Command::Convergence => cmd_convergence(config),
        Command::Significance => cmd_significance(config),
        Command::Mine => cmd_mine(config),
        Command::Gen => cmd_gen(config),
        Command::Bench => cmd_bench(config),
    }
}

#[derive(Serialize)]
struct SampleEntry {
    file: String,
    seconds: f64,
    bjdm_checksum: u64,
}

#[derive(Serialize)]
struct SampleManifest<'a> {
    config: &'a JobConfig,
    sampler: String,
    num_swaps: u64,
    chain_weight: u64,
    observed_bjdm_checksum: u64,
    samples: Vec<SampleEntry>,
}

fn cmd_sample(config: &JobConfig) -> Result<(), CliError> {
    let sampler = single_sampler(config)?;
    check_kind(sampler, config.format)?;
    let [input] = config.inputs.as_slice() else {
        return Err(CliError::validation("exactly one --input is required"));
    };
    let num_samples = config.num_samples.unwrap_or(1);
    if num_samples == 0 {
        return Err(CliError::validation("--samples must be at least 1"));
    }
    let out_dir = PathBuf::from(config.out.clone().unwrap_or_else(|| "samples".to_string()));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir.display(), e))?;
    let options = chain_options(config);

    let (observed_checksum, num_swaps, w, entries) = match read_input(input, config.format)? {
        Dataset::Trans(observed) => {
            let w = chain_weight_transactional(&observed);
            let num_swaps = resolve_swaps(config, sampler, w)?;
            let samples = sample_many_timed(
                &observed,
                sampler,
                num_swaps,
                num_samples,
                config.seed,
                config.parallelism,
                &options,
            )?;
            let mut entries = Vec::with_capacity(samples.len());
            for (i, (dataset, seconds)) in samples.iter().enumerate() {
                let file = out_dir.join(format!("sample_{i:04}.dat"));
                write_output(&file, &dataset.write())?;
                entries.push(SampleEntry {
                    file: file.display().to_string(),
                    seconds: *seconds,
                    bjdm_checksum: BiadjacencyState::from_dataset(dataset).bjdm().checksum(),
                });
            }
            let observed_checksum = BiadjacencyState::from_dataset(&observed).bjdm().checksum();
            (observed_checksum, num_swaps, w, entries)
        }
        Dataset::Seq(observed) => {
            let w = chain_weight_sequence(&observed);
            let num_swaps = resolve_swaps(config, sampler, w)?;
            let samples = sample_many_sequences_timed(
                &observed,
                sampler,
                num_swaps,
                num_samples,
                config.seed,
                config.parallelism,
                &options,
            )?;
            let mut entries = Vec::with_capacity(samples.len());
            for (i, (dataset, seconds)) in samples.iter().enumerate() {
                let file = out_dir.join(format!("sample_{i:04}.dat"));
                write_output(&file, &dataset.write())?;
                entries.push(SampleEntry {
                    file: file.display().to_string(),
                    seconds: *seconds,
                    bjdm_checksum: BipartiteMultigraph::from_dataset(dataset).bjdm().checksum(),
                });
            }
            let observed_checksum = BipartiteMultigraph::from_dataset(&observed).bjdm().checksum();
            (observed_checksum, num_swaps, w, entries)
        }
    };

    let manifest = SampleManifest {
        config,
        sampler: sampler.name().to_string(),
        num_swaps,
        chain_weight: w,
        observed_bjdm_checksum: observed_checksum,
        samples: entries,
    };
    let path = out_dir.join("manifest.json");
    write_output(&path, &format!("{}\n", serde_json::to_string_pretty(&manifest)?))?;
    eprintln!("wrote {num_samples} samples and {}", path.display());
    Ok(())
}

fn cmd_convergence(config: &JobConfig) -> Result<(), CliError> {
    let samplers = sampler_list(config)?;
    let [input] = config.inputs.as_slice() else {
        return Err(CliError::validation("exactly one --input is required"));
    };
    let theta = config
        .theta
        .ok_or_else(|| CliError::validation("--theta is required for convergence"))?;
    let grid = config.k_grid.clone().unwrap_or_else(default_k_grid);
    let options = chain_options(config);
    let dataset = read_input(input, config.format)?;

    let mut csv = String::from("sampler,k,arsd,seconds\n");
    for sampler in samplers {
        check_kind(sampler, config.format)?;
        let trace = match &dataset {
            Dataset::Trans(observed) => convergence_trace(
                observed,
                sampler,
                &grid,
                Threshold::from_cli_value(theta)?,
                config.seed,
                &options,
            )?,
            Dataset::Seq(observed) => convergence_trace_sequences(
                observed,
                sampler,
                &grid,
                theta,
                config.seed,
                &options,
            )?,
        };
        for point in trace {
            csv.push_str(&format!(
                "{},{},{:.6},{:.3}\n",
                sampler, point.k, point.arsd, point.seconds
            ));
        }
    }
    emit(&config.out, &csv)
}

#[derive(Serialize)]
struct SignificanceReport {
    config: JobConfig,
    sampler: String,
    num_swaps: u64,
    observed_count: u64,
    sampled_mean_count: f64,
    pvalue: PvalueReport,
    observed_length_histogram: BTreeMap<usize, u64>,
    sampled_mean_length_histogram: BTreeMap<usize, f64>,
}

fn cmd_significance(config: &JobConfig) -> Result<(), CliError> {
    let sampler = single_sampler(config)?;
    check_kind(sampler, config.format)?;
    let [input] = config.inputs.as_slice() else {
        return Err(CliError::validation("exactly one --input is required"));
    };
    let num_samples = config
        .num_samples
        .ok_or_else(|| CliError::validation("--samples is required for significance"))?;
    if num_samples == 0 {
        return Err(CliError::validation("--samples must be at least 1"));
    }
    let direction = match &config.direction {
        Some(d) => Direction::parse(d)?,
        None => Direction::Greater,
    };
    let options = chain_options(config);

    let report = match read_input(input, config.format)? {
        Dataset::Trans(observed) => {
            let theta = theta_of(config)?;
            let w = chain_weight_transactional(&observed);
            let num_swaps = resolve_swaps(config, sampler, w)?;
            let observed_patterns = mine_frequent_itemsets(&observed, theta)?;
            let observed_hist = pattern_length_histogram(&observed_patterns);
            let samples = sample_many(
                &observed,
                sampler,
                num_swaps,
                num_samples,
                config.seed,
                config.parallelism,
                &options,
            )?;
            let mut counts = Vec::with_capacity(samples.len());
            let mut hist_sum: BTreeMap<usize, u64> = BTreeMap::new();
            for sample in &samples {
                let patterns = mine_frequent_itemsets(sample, theta)?;
                counts.push(patterns.len() as f64);
                for (len, n) in pattern_length_histogram(&patterns) {
                    *hist_sum.entry(len).or_insert(0) += n;
                }
            }
            build_report(config, sampler, num_swaps, observed_patterns.len() as u64, observed_hist, counts, hist_sum, num_samples, direction)
        }
        Dataset::Seq(observed) => {
            let theta = config
                .theta
                .ok_or_else(|| CliError::validation("--theta is required for significance"))?;
            let w = chain_weight_sequence(&observed);
            let num_swaps = resolve_swaps(config, sampler, w)?;
            let observed_patterns = mine_frequent_sequences(&observed, theta)?;
            let observed_hist = sequence_length_histogram(&observed_patterns);
            let samples = sample_many_sequences(
                &observed,
                sampler,
                num_swaps,
                num_samples,
                config.seed,
                config.parallelism,
                &options,
            )?;
            let mut counts = Vec::with_capacity(samples.len());
            let mut hist_sum: BTreeMap<usize, u64> = BTreeMap::new();
            for sample in &samples {
                let patterns = mine_frequent_sequences(sample, theta)?;
                counts.push(patterns.len() as f64);
                for (len, n) in sequence_length_histogram(&patterns) {
                    *hist_sum.entry(len).or_insert(0) += n;
                }
            }
            build_report(config, sampler, num_swaps, observed_patterns.len() as u64, observed_hist, counts, hist_sum, num_samples, direction)
        }
    };
    emit(&config.out, &format!("{}\n", serde_json::to_string_pretty(&report)?))
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    config: &JobConfig,
    sampler: SamplerId,
    num_swaps: u64,
    observed_count: u64,
    observed_hist: BTreeMap<usize, u64>,
    counts: Vec<f64>,
    hist_sum: BTreeMap<usize, u64>,
    num_samples: usize,
    direction: Direction,
) -> SignificanceReport {
    let sampled_mean_count = counts.iter().sum::<f64>() / counts.len() as f64;
    let pvalue = empirical_pvalue(observed_count as f64, &counts, direction);
    let sampled_mean_length_histogram = hist_sum
        .into_iter()
        .map(|(len, total)| (len, total as f64 / num_samples as f64))
        .collect();
    SignificanceReport {
        config: config.clone(),
        sampler: sampler.name().to_string(),
        num_swaps,
        observed_count,
        sampled_mean_count,
        pvalue,
        observed_length_histogram: observed_hist,
        sampled_mean_length_histogram,
    }
}

fn cmd_mine(config: &JobConfig) -> Result<(), CliError> {
    let [input] = config.inputs.as_slice() else {
        return Err(CliError::validation("exactly one --input is required"));
    };
    let text = match read_input(input, config.format)? {
        Dataset::Trans(observed) => {
            let patterns = mine_frequent_itemsets(&observed, theta_of(config)?)?;
            mining::write_patterns(&patterns, observed.item_labels())
        }
        Dataset::Seq(observed) => {
            let theta = config
                .theta
                .ok_or_else(|| CliError::validation("--theta is required for mine"))?;
            let patterns = mine_frequent_sequences(&observed, theta)?;
            mining::write_sequence_patterns(&patterns, observed.item_labels())
        }
    };
    emit(&config.out, &text)
}

fn cmd_gen(config: &JobConfig) -> Result<(), CliError> {
    let num_transactions = config
        .gen_transactions
        .ok_or_else(|| CliError::validation("--transactions is required for gen"))?;
    let num_items =
        config.gen_items.ok_or_else(|| CliError::validation("--items is required for gen"))?;
    let avg_length = config
        .gen_avg_length
        .ok_or_else(|| CliError::validation("--avg-length is required for gen"))?;
    let text = match config.format {
        Format::Trans => {
            generate_synthetic(num_transactions, num_items, avg_length, config.seed)?.write()
        }
        Format::Seq => {
            generate_synthetic_sequences(num_transactions, num_items, avg_length, config.seed)?
                .write()
        }
    };
    emit(&config.out, &text)
}

fn cmd_bench(config: &JobConfig) -> Result<(), CliError> {
    let samplers = sampler_list(config)?;
    if config.inputs.is_empty() {
        return Err(CliError::validation("at least one --input is required"));
    }
    let steps = config.steps.unwrap_or(10_000);
    let options = chain_options(config);
    let mut csv = String::from("dataset,sampler,steps,min_ns,median_ns,p95_ns,max_ns\n");
    for input in &config.inputs {
        let dataset = read_input(input, config.format)?;
        for &sampler in &samplers {
            check_kind(sampler, config.format)?;
            let mut times: Vec<u64> = Vec::with_capacity(steps as usize);
            match &dataset {
                Dataset::Trans(observed) => {
                    let mut chain = bjdm_core::samplers::MatrixChain::new(
                        observed,
                        sampler,
                        config.seed,
                        options.clone(),
                    )?;
                    for _ in 0..steps {
                        let t0 = Instant::now();
                        chain.step()?;
                        times.push(t0.elapsed().as_nanos() as u64);
                    }
                }
                Dataset::Seq(observed) => {
                    let mut chain = bjdm_core::samplers::SequenceChain::new(
                        observed,
                        sampler,
                        config.seed,
                        options.clone(),
                    )?;
                    for _ in 0..steps {
                        let t0 = Instant::now();
                        chain.step()?;
                        times.push(t0.elapsed().as_nanos() as u64);
                    }
                }
            }
            times.sort_unstable();
            let n = times.len();
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                input,
                sampler,
                n,
                times[0],
                times[n / 2],
                times[n * 95 / 100],
                times[n - 1]
            ));
        }
    }
    emit(&config.out, &csv)
}
