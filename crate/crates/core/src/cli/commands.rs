use super::config::{
    default_threshold, model_input_dim, preset, ExperimentConfig, THRESHOLD_SWEEP,
};
use super::output::{OutputDir, RUN_MANIFEST};
use super::pipeline::{
    analyze_model, hidden_layer_count, train as train_model, LayerReport, BIN_BASE,
};
use super::{
    AnalyzeArgs, CliError, ConfigArgs, IsingArgs, IsingPresetArg, KmeansArgs, MaxentArgs,
    ReportArgs, TrainArgs,
};
use crate::baselines::{cluster_size_spectrum, kmeans as run_kmeans};
use crate::datasets::{
    generate_ising_dataset_chains, sha256_hex, write_idx_images, Boundary, IsingParams,
    IsingPreset, LabeledDataset, Manifest, ManifestEntry,
};
use crate::infostats::{fit_power_law, summarize, InfoSummary, PowerLawFit};
use crate::linalg::Rng;
use crate::maxent::{
    degeneracy_of, loglog_slope, relevance_of, resolution_of, solve_fixed_beta,
    solve_fixed_resolution, thermo_view, verify_stationarity, MaxEntProblem, ThermoView,
};
use crate::models::{read_checkpoint, Activation, Checkpoint, EpochMetrics, Model};
use crate::representation::{log_bin, BinnedPoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn resolve_config(c: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(d) = &c.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(d) = &c.test_dataset {
        cfg.test_dataset = Some(d.clone());
    }
    if let Some(m) = &c.manifest {
        cfg.manifest = Some(m.clone());
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

/// Records the manifest and the files behind `names` as run inputs.
fn record_dataset_inputs(out: &mut OutputDir, cfg: &ExperimentConfig, names: &[&str]) {
    let path = cfg.manifest_path();
    out.input(&path);
    if let Ok(m) = Manifest::load(&path) {
        for name in names {
            if let Ok((images, labels)) = m.files(name) {
                out.input(&images);
                if let Some(l) = labels {
                    out.input(&l);
                }
            }
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => String::new(),
    }
}

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_loss,train_metric,test_metric\n");
    for m in metrics {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            m.epoch,
            fmt_opt(Some(m.train_loss)),
            fmt_opt(Some(m.train_metric)),
            fmt_opt(m.test_metric)
        );
    }
    s
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("checkpoints/epoch-{epoch:04}.ckpt")
}

pub const FINAL_CHECKPOINT: &str = "final.ckpt";

pub(super) fn train(a: TrainArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut cfg = resolve_config(&a.common)?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(s) = a.snapshots {
        cfg.train.snapshot_epochs = s;
    }
    if let Some(acc) = a.stop_at_accuracy {
        cfg.train.stop_at_accuracy = Some(acc);
    }
    cfg.validate()?;
    if a.print_config {
        print!("{}", cfg.to_pretty_json());
        return Ok(());
    }
    let (data, test) = cfg.load_train_data()?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut names = vec![cfg.dataset.as_str()];
    names.extend(cfg.test_dataset.as_deref());
    record_dataset_inputs(&mut out, &cfg, &names);

    let trained = train_model(&cfg, &data, test.as_ref())?;
    out.write("config.json", cfg.to_pretty_json().as_bytes())?;
    out.write("metrics.csv", metrics_csv(&trained.metrics).as_bytes())?;
    for (epoch, model) in &trained.snapshots {
        let ck = Checkpoint {
            epoch: *epoch,
            model: model.clone(),
        };
        out.write(&checkpoint_name(*epoch), &ck.to_bytes())?;
    }
    let last = trained.last_epoch();
    let ck = Checkpoint {
        epoch: last,
        model: trained.model,
    };
    out.write(FINAL_CHECKPOINT, &ck.to_bytes())?;
    if let Some(m) = trained.metrics.last() {
        println!(
            "trained {} epochs: train metric {:.6}{}",
            last,
            m.train_metric,
            m.test_metric
                .map(|t| format!(", test metric {t:.6}"))
                .unwrap_or_default()
        );
    }
    let params = serde_json::to_value(&cfg).expect("config serializes");
    out.finish("train", threads, Some(cfg.train.seed), params)?;
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub dataset: String,
    pub checkpoint_sha256: String,
    pub checkpoint_epoch: usize,
    pub reports: Vec<LayerReport>,
}

fn layer_tag(layer: usize) -> String {
    if layer == 0 {
        "x".into()
    } else {
        format!("z{layer}")
    }
}

pub(super) fn analyze(a: AnalyzeArgs, threads: Option<usize>) -> Result<(), CliError> {
    let cfg = resolve_config(&a.common)?;
    let bytes = fs::read(&a.checkpoint)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.checkpoint.display())))?;
    let ck = read_checkpoint(&a.checkpoint)?;
    let data = cfg.load_manifest()?.load_dataset(&cfg.dataset)?;
    let dim = model_input_dim(&ck.model);
    if dim != data.n_features() {
        return Err(CliError::Config(format!(
            "checkpoint expects {dim} input features, dataset {} has {}",
            cfg.dataset,
            data.n_features()
        )));
    }
    let layers: Vec<usize> = if a.all_layers {
        (1..=hidden_layer_count(&ck.model)).collect()
    } else {
        a.layer
            .clone()
            .unwrap_or_else(|| cfg.analysis.layers.clone())
    };
    let activation = match &ck.model {
        Model::Mlp(m) => m.activation,
        Model::Rbm(_) => Activation::Sigmoid,
    };
    let thresholds: Vec<f64> = if a.threshold_sweep {
        THRESHOLD_SWEEP.to_vec()
    } else if let Some(t) = &a.threshold {
        t.clone()
    } else if !cfg.analysis.thresholds.is_empty() {
        cfg.analysis.thresholds.clone()
    } else {
        vec![default_threshold(activation)]
    };
    let labels = if a.labels {
        true
    } else if a.no_labels {
        false
    } else {
        cfg.analysis.labels
    };
    let k_cutoff = a.k_cutoff.or(cfg.analysis.k_cutoff);

    let out_dir = a
        .common
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("analysis"));
    let mut out = OutputDir::create(&out_dir)?;
    out.input(&a.checkpoint);
    record_dataset_inputs(&mut out, &cfg, &[cfg.dataset.as_str()]);

    let analyses = analyze_model(&ck.model, &data, &layers, &thresholds, labels, k_cutoff)?;
    for an in &analyses {
        let r = &an.report;
        let stem = format!("{}_t{:.2}", layer_tag(r.layer), r.threshold);
        out.write(
            &format!("spectrum_{stem}.csv"),
            an.spectrum.to_csv().as_bytes(),
        )?;
        out.write(
            &format!("binned_{stem}.csv"),
            BinnedPoint::csv(&an.binned).as_bytes(),
        )?;
        print_report_line(&format!("{} t={:.2}", layer_tag(r.layer), r.threshold), r);
    }
    let result = AnalysisOutput {
        dataset: cfg.dataset.clone(),
        checkpoint_sha256: sha256_hex(&bytes),
        checkpoint_epoch: ck.epoch,
        reports: analyses.into_iter().map(|a| a.report).collect(),
    };
    out.write_json("analysis.json", &result)?;
    let params = serde_json::json!({
        "dataset": cfg.dataset,
        "layers": layers,
        "thresholds": thresholds,
        "labels": labels,
        "k_cutoff": k_cutoff,
    });
    out.finish("analyze", threads, None, params)?;
    Ok(())
}

fn print_report_line(tag: &str, r: &LayerReport) {
    let s = &r.summary;
    let fit = match &r.fit {
        Some(f) => format!(
            "beta {:.3} k_min {} k_max {} decades {:.2} R2 {}",
            f.beta,
            f.k_min,
            f.k_max,
            f.decades,
            f.binned_r2.map_or("-".into(), |v| format!("{v:.3}"))
        ),
        None => format!("no fit ({})", r.fit_error.as_deref().unwrap_or("")),
    };
    println!(
        "{tag}: M {} distinct {} H_Z {:.4} H_K {:.4} | {fit} | power law: {}",
        s.m,
        s.distinct,
        s.h_z,
        s.h_k,
        if r.power_law { "yes" } else { "no" }
    );
}

pub const ISING_DEFAULT_SEED: u64 = 7;

/// One Ising dataset to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingJob {
    pub name: String,
    pub params: IsingParams,
    pub n_samples: usize,
    pub seed: u64,
    pub chains: usize,
}

impl IsingJob {
    /// 50 000 samples of a preset temperature with the default seed and one chain.
    pub fn preset(p: IsingPreset) -> Self {
        IsingJob {
            name: format!("ising-{}", p.name()),
            params: IsingParams::preset(p),
            n_samples: 50_000,
            seed: ISING_DEFAULT_SEED,
            chains: 1,
        }
    }

    pub fn generate(&self) -> Result<LabeledDataset, CliError> {
        Ok(generate_ising_dataset_chains(
            &self.params,
            self.n_samples,
            self.chains,
            &Rng::new(self.seed),
        )?)
    }

    pub fn images_file(&self) -> String {
        format!("{}-images-idx3-ubyte", self.name)
    }
}

fn ising_jobs(a: &IsingArgs) -> Vec<IsingJob> {
    let base = IsingParams {
        side: a.side,
        sweeps_equilibrate: a.sweeps_equilibrate,
        sweeps_between_samples: a.sweeps_between,
        boundary: if a.free_boundary {
            Boundary::Free
        } else {
            Boundary::Periodic
        },
        ..Default::default()
    };
    let job = |name: String, temperature: f64| IsingJob {
        name,
        params: IsingParams {
            temperature,
            ..base
        },
        n_samples: a.n,
        seed: a.seed,
        chains: a.chains,
    };
    if let Some(t) = a.temperature {
        return vec![job(format!("ising-t{t}"), t)];
    }
    let mut presets: Vec<IsingPreset> = Vec::new();
    let requested = if a.preset.is_empty() {
        &[IsingPresetArg::All][..]
    } else {
        &a.preset[..]
    };
    for p in requested {
        let add: &[IsingPreset] = match p {
            IsingPresetArg::Low => &[IsingPreset::Low],
            IsingPresetArg::Critical => &[IsingPreset::Critical],
            IsingPresetArg::High => &[IsingPreset::High],
            IsingPresetArg::All => &IsingPreset::ALL,
        };
        for q in add {
            if !presets.contains(q) {
                presets.push(*q);
            }
        }
    }
    presets
        .into_iter()
        .map(|p| job(format!("ising-{}", p.name()), p.temperature()))
        .collect()
}

pub(super) fn ising(a: IsingArgs, threads: Option<usize>) -> Result<(), CliError> {
    let jobs = ising_jobs(&a);
    for j in &jobs {
        j.params.validate()?;
        if j.n_samples == 0 || j.chains == 0 {
            return Err(CliError::Config(
                "--n and --chains must be at least 1".into(),
            ));
        }
    }
    let mut out = OutputDir::create(&a.out)?;
    let manifest_path = out.path("manifest.json");
    let mut entries: BTreeMap<String, ManifestEntry> = match fs::read_to_string(&manifest_path) {
        Ok(text) => serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?,
        Err(_) => BTreeMap::new(),
    };
    for j in &jobs {
        let ds = j.generate()?;
        let file = j.images_file();
        write_idx_images(
            &out.path(&file),
            &ds.samples,
            (j.params.side, j.params.side),
        )?;
        out.track(&file)?;
        out.write_json(&format!("{}.json", j.name), j)?;
        let bytes = fs::read(out.path(&file)).map_err(|e| CliError::Io(e.to_string()))?;
        entries.insert(
            j.name.clone(),
            ManifestEntry {
                images: file,
                labels: None,
                sha256: Some(sha256_hex(&bytes)),
                labels_sha256: None,
                n_expected: Some(j.n_samples),
                label_range: None,
                subset: None,
            },
        );
        println!(
            "{}: T = {}, {} samples",
            j.name, j.params.temperature, j.n_samples
        );
    }
    out.write_json("manifest.json", &entries)?;
    let params = serde_json::to_value(&jobs).expect("jobs serialize");
    out.finish("ising", threads, Some(a.seed), params)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxEntOutput {
    pub mode: String,
    pub k_max: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub beta: f64,
    pub target_resolution: Option<f64>,
    pub resolution: f64,
    pub relevance: f64,
    /// Largest absolute gap between iterative and closed-form `p(k)`.
    pub linf_gap: f64,
    pub stationarity_residual: f64,
    pub loglog_slope: f64,
    pub expected_slope: f64,
    pub iterations: usize,
    pub thermo: ThermoView,
}

pub(super) fn maxent(a: MaxentArgs, threads: Option<usize>) -> Result<(), CliError> {
    let (beta, target) = match (a.beta, a.resolution) {
        (Some(b), _) => (b, None),
        (None, Some(r)) => {
            let (b, _) = solve_fixed_resolution(&MaxEntProblem::with_resolution(a.k_max, a.m, r))?;
            (b, Some(r))
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of --beta or --resolution is required".into(),
            ))
        }
    };
    let sol = solve_fixed_beta(&MaxEntProblem::with_beta(a.k_max, a.m, beta))?;
    let m_of_k = sol.degeneracy();
    let result = MaxEntOutput {
        mode: if target.is_some() {
            "resolution"
        } else {
            "beta"
        }
        .into(),
        k_max: a.k_max,
        m: a.m,
        beta,
        target_resolution: target,
        resolution: resolution_of(&sol.iterative, a.m),
        relevance: relevance_of(&sol.iterative),
        linf_gap: sol.linf_gap(),
        stationarity_residual: verify_stationarity(&sol.iterative, beta, a.m)?,
        loglog_slope: loglog_slope(&m_of_k)?,
        expected_slope: -beta - 1.0,
        iterations: sol.iterations,
        thermo: thermo_view(&sol.iterative, beta, a.m),
    };
    let mut csv = String::from("k,m_k\n");
    for (i, v) in m_of_k.iter().enumerate() {
        let _ = writeln!(csv, "{},{v:e}", i + 1);
    }
    let mut closed = String::from("k,m_k\n");
    for (i, v) in degeneracy_of(&sol.closed_form, a.m).iter().enumerate() {
        let _ = writeln!(closed, "{},{v:e}", i + 1);
    }
    let mut out = OutputDir::create(&a.out)?;
    out.write("maxent_spectrum.csv", csv.as_bytes())?;
    out.write("maxent_closed_form.csv", closed.as_bytes())?;
    out.write_json("maxent.json", &result)?;
    println!(
        "beta {:.6}: slope {:.6} (expected {:.6}), L∞ gap {:.3e}, stationarity {:.3e}, H_Z {:.4}, H_K {:.4}",
        beta, result.loglog_slope, result.expected_slope, result.linf_gap, result.stationarity_residual,
        result.resolution, result.relevance
    );
    let params = serde_json::json!({ "beta": a.beta, "resolution": a.resolution, "k_max": a.k_max, "M": a.m });
    out.finish("maxent", threads, None, params)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KMeansOutput {
    pub dataset: String,
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub cluster_sizes: Vec<u64>,
    pub size_cv: f64,
    pub summary: InfoSummary,
    pub fit: Option<PowerLawFit>,
    pub fit_error: Option<String>,
}

pub(super) fn kmeans(a: KmeansArgs, threads: Option<usize>) -> Result<(), CliError> {
    let cfg = resolve_config(&a.common)?;
    let data = cfg.load_manifest()?.load_dataset(&cfg.dataset)?;
    let out_dir = a
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs/kmeans"));
    let mut out = OutputDir::create(&out_dir)?;
    record_dataset_inputs(&mut out, &cfg, &[cfg.dataset.as_str()]);
    let seed = cfg.train.seed;
    let r = run_kmeans(&data.samples, a.k, seed, a.max_iters)?;
    let spec = cluster_size_spectrum(&r);
    let (fit, fit_error) = match fit_power_law(&spec) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let result = KMeansOutput {
        dataset: cfg.dataset.clone(),
        k: a.k,
        seed,
        inertia: r.inertia,
        inertia_history: r.inertia_history.clone(),
        iterations: r.iterations,
        converged: r.converged,
        cluster_sizes: r.cluster_sizes.clone(),
        size_cv: spec.size_cv(),
        summary: summarize(&spec)?,
        fit,
        fit_error,
    };
    out.write("kmeans_spectrum.csv", spec.to_csv().as_bytes())?;
    out.write(
        "kmeans_binned.csv",
        BinnedPoint::csv(&log_bin(&spec, BIN_BASE)).as_bytes(),
    )?;
    out.write_json("kmeans.json", &result)?;
    println!(
        "k-means k={} on {}: {} iterations (converged: {}), inertia {:.4}, size CV {:.4}",
        a.k, cfg.dataset, r.iterations, r.converged, r.inertia, result.size_cv
    );
    let params = serde_json::json!({ "dataset": cfg.dataset, "k": a.k, "max_iters": a.max_iters });
    out.finish("kmeans", threads, Some(seed), params)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run: String,
    pub command: Option<String>,
    pub analysis: Option<AnalysisOutput>,
    pub maxent: Option<MaxEntOutput>,
    pub kmeans: Option<KMeansOutput>,
    pub final_metrics: Option<String>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, CliError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        Err(_) => Ok(None),
    }
}

pub(super) fn report(a: ReportArgs) -> Result<(), CliError> {
    let mut all = Vec::new();
    for dir in &a.runs {
        if !dir.is_dir() {
            return Err(CliError::Config(format!(
                "{}: not a run directory",
                dir.display()
            )));
        }
        let command = read_json::<serde_json::Value>(&dir.join(RUN_MANIFEST))?
            .and_then(|v| v.get("command").and_then(|c| c.as_str()).map(String::from));
        let final_metrics = fs::read_to_string(dir.join("metrics.csv"))
            .ok()
            .and_then(|t| t.lines().last().map(String::from));
        let s = RunSummary {
            run: dir.display().to_string(),
            command,
            analysis: read_json(&dir.join("analysis.json"))?,
            maxent: read_json(&dir.join("maxent.json"))?,
            kmeans: read_json(&dir.join("kmeans.json"))?,
            final_metrics,
        };
        println!(
            "== {} ({})",
            s.run,
            s.command.as_deref().unwrap_or("unknown")
        );
        if let Some(m) = &s.final_metrics {
            println!("last epoch (epoch,train_loss,train_metric,test_metric): {m}");
        }
        if let Some(an) = &s.analysis {
            for r in &an.reports {
                print_report_line(&format!("{} t={:.2}", layer_tag(r.layer), r.threshold), r);
            }
        }
        if let Some(m) = &s.maxent {
            println!(
                "maxent beta {}: slope {:.6} (expected {:.6}), L∞ gap {:.3e}",
                m.beta, m.loglog_slope, m.expected_slope, m.linf_gap
            );
        }
        if let Some(k) = &s.kmeans {
            println!(
                "k-means k={}: distinct sizes {}, size CV {:.4}, H_Z {:.4}, H_K {:.4}",
                k.k, k.summary.distinct, k.size_cv, k.summary.h_z, k.summary.h_k
            );
        }
        all.push(s);
    }
    if let Some(path) = &a.out {
        let text = serde_json::to_string_pretty(&all).expect("report serializes") + "\n";
        fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
