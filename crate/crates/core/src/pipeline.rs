//! Select representatives, fit the encoder, encode every point and cluster the
//! codes.

use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::config::{PipelineConfig, Selection};
use crate::error::{Error, Result};
use crate::io::{atomic_write, read_labels, read_matrix, save_encoder, write_labels};
use crate::metrics::{evaluate, EvalReport};
use crate::rpcm::{rpcm_fit, RpcmResult};
use crate::sampling::{select_kmeans, select_random, RepresentativeSet};
use crate::spectral::{cluster_rows, normalize_codes, spectral_embed_with, ClusterLabels, ClusterOptions};
use crate::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Select,
    Fit,
    Encode,
    Embed,
    KMeans,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Select, Phase::Fit, Phase::Encode, Phase::Embed, Phase::KMeans];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Select => "select",
            Phase::Fit => "fit",
            Phase::Encode => "encode",
            Phase::Embed => "embed",
            Phase::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Wall time of each pipeline phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimingReport {
    durations: [Duration; 5],
}

impl TimingReport {
    pub fn get(&self, phase: Phase) -> Duration {
        self.durations[phase as usize]
    }

    pub fn set(&mut self, phase: Phase, d: Duration) {
        self.durations[phase as usize] = d;
    }

    pub fn total(&self) -> Duration {
        self.durations.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,seconds\n");
        for phase in Phase::ALL {
            out.push_str(&format!("{},{:.6}\n", phase, self.get(phase).as_secs_f64()));
        }
        out
    }
}

fn timed<T>(timings: &mut TimingReport, phase: Phase, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    timings.set(phase, start.elapsed());
    out
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub labels: ClusterLabels,
    pub eval: Option<EvalReport>,
    pub timings: TimingReport,
    pub representatives: Vec<usize>,
    pub fit: RpcmResult,
}

pub fn select(y: &DataMatrix, config: &PipelineConfig) -> Result<RepresentativeSet> {
    if config.reps > y.ncols() {
        return Err(Error::InvalidInput(format!(
            "{} representatives requested from {} points",
            config.reps,
            y.ncols()
        )));
    }
    match config.selection {
        Selection::Random => select_random(y, config.reps, config.seed),
        Selection::KMeans => select_kmeans(y, config.reps, config.seed),
    }
}

/// The whole pipeline on in-memory data.
pub fn run_on_data(
    y: &DataMatrix,
    truth: Option<&ClusterLabels>,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.validate()?;
    if let Some(t) = truth {
        if t.len() != y.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} points",
                t.len(),
                y.ncols()
            )));
        }
    }
    let mut timings = TimingReport::default();
    let reps = timed(&mut timings, Phase::Select, || select(y, config))?;
    let fit = timed(&mut timings, Phase::Fit, || rpcm_fit(&reps.x, &config.rpcm))?;
    let codes = timed(&mut timings, Phase::Encode, || {
        fit.params.forward_batched(y, config.encode_batch)
    })?;
    let options = ClusterOptions::default();
    let mut embedding = timed(&mut timings, Phase::Embed, || {
        let ztilde = normalize_codes(&codes)?;
        spectral_embed_with(&ztilde, config.k, options.method)
    })?;
    let labels = timed(&mut timings, Phase::KMeans, || {
        cluster_rows(&mut embedding.v, config.k, config.seed, &options)
    })?;
    let eval = truth.map(|t| evaluate(&labels, t)).transpose()?;
    Ok(PipelineOutput {
        labels,
        eval,
        timings,
        representatives: reps.indices,
        fit,
    })
}

/// Read the configured files, run, and write labels, encoder and timings
/// into the output directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    let data = config
        .data
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("no data file configured".into()))?;
    let y = read_matrix(data)?;
    let truth = config.labels.as_deref().map(read_labels).transpose()?;
    let out = run_on_data(&y, truth.as_ref(), config)?;
    if let Some(dir) = config.output.as_deref() {
        write_outputs(dir, config, &out)?;
    }
    Ok(out)
}

fn write_outputs(dir: &Path, config: &PipelineConfig, out: &PipelineOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_labels(&dir.join("labels.txt"), &out.labels)?;
    save_encoder(&dir.join("encoder.txt"), &out.fit.params)?;
    if config.emit_timings {
        atomic_write(&dir.join("timings.csv"), out.timings.to_csv().as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn quick_config() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.rpcm.encoder.hidden_sizes = vec![64];
        c
    }

    #[test]
    fn replica_is_separated() {
        let data = generate(&SynthConfig::replica(1)).unwrap();
        let out = run_on_data(&data.y, Some(&data.labels), &quick_config()).unwrap();
        let eval = out.eval.unwrap();
        assert!(eval.acc >= 0.95, "{}", eval.acc);
        assert_eq!(out.labels.distinct(), 4);
    }

    #[test]
    fn single_cluster_accuracy_is_majority_share() {
        let mut config = SynthConfig::replica(2);
        config.points_per_subspace = vec![50, 30, 10, 10];
        let data = generate(&config).unwrap();
        let mut c = quick_config();
        c.k = 1;
        c.reps = 20;
        let out = run_on_data(&data.y, Some(&data.labels), &c).unwrap();
        assert!(out.labels.as_slice().iter().all(|&l| l == 0));
        assert_eq!(out.eval.unwrap().acc, 0.5);
    }

    #[test]
    fn reruns_are_identical() {
        let data = generate(&SynthConfig::replica(3)).unwrap();
        let a = run_on_data(&data.y, None, &quick_config()).unwrap();
        let b = run_on_data(&data.y, None, &quick_config()).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn too_many_representatives() {
        let data = generate(&SynthConfig::uniform(3, 2, 1, 5, 0)).unwrap();
        let mut c = quick_config();
        c.reps = 11;
        assert!(matches!(run_on_data(&data.y, None, &c), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn timing_csv_has_five_phases() {
        let csv = TimingReport::default().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "phase,seconds");
        for (line, phase) in lines[1..].iter().zip(Phase::ALL) {
            assert!(line.starts_with(&format!("{phase},")));
        }
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&SynthConfig::replica(4)).unwrap();
        let data_path = dir.path().join("y.lscm");
        crate::io::write_matrix(&data_path, &data.y).unwrap();
        let mut c = quick_config();
        c.data = Some(data_path);
        c.output = Some(dir.path().join("out"));
        run_pipeline(&c).unwrap();
        let out = dir.path().join("out");
        assert_eq!(read_labels(&out.join("labels.txt")).unwrap().len(), 800);
        assert!(crate::io::load_encoder(&out.join("encoder.txt")).is_ok());
        assert!(out.join("timings.csv").exists());
    }
}
