use std::io::BufRead;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use steinmd_core::cw::{self, glauber_sampler, pair_diagnostics, CWAnalysis, GlauberSamples, MagnetizationDist, PairOptions, PairSample, PairSource};
use steinmd_core::md::{self, MDMagnetizationDist, MDParams, MDStationary};
use steinmd_core::verify::{fit_exponent, ratio_curve, Alignment, AtomTail, RatioCurve, ScalingFit};
use steinmd_core::{LimitLaw, RangeSpec};

use crate::cache::Cache;
use crate::config::{ExperimentConfig, Method, Model};
use crate::error::{CliError, Result};
use crate::manifest::{ArtifactRecord, RunManifest};

/// Bump when the layout of cached artifacts changes.
const CACHE_FORMAT: u32 = 1;

#[derive(Debug, Clone)]
enum ModelSetup {
    Cw(CWAnalysis),
    Md(MDStationary),
}

/// Resolved model, limit law and ratio range for one config.
struct Setup {
    model: ModelSetup,
    law: LimitLaw,
    range: RangeSpec,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        match cfg.model {
            Model::Cw => {
                let a = cfg.cw_analysis()?;
                let law = a.limit_law()?;
                let range = RangeSpec::CwCritical { k: a.k };
                Ok(Self {
                    model: ModelSetup::Cw(a),
                    law,
                    range,
                })
            }
            Model::Md => {
                let st = cfg.md_stationary()?;
                Ok(Self {
                    model: ModelSetup::Md(st),
                    law: st.limit_law()?,
                    range: RangeSpec::for_md(&st),
                })
            }
        }
    }
}

/// Law of `W` at one size, as loaded from its cached CSV.
enum Loaded {
    Cw(MagnetizationDist),
    Md(MDMagnetizationDist),
    Samples(Vec<f64>),
}

impl Loaded {
    /// Ascending atoms of `W` with their log-probabilities.
    fn atoms(&self, setup: &Setup, n: u64) -> (Vec<f64>, Vec<f64>) {
        match (self, &setup.model) {
            (Loaded::Cw(d), ModelSetup::Cw(a)) => (d.w_values(a.k), d.log_pmf.clone()),
            (Loaded::Md(d), ModelSetup::Md(st)) => (d.w_values(st), d.log_pmf.clone()),
            (Loaded::Samples(s), ModelSetup::Cw(a)) => {
                let scale = a.w_scale(n);
                let mut w: Vec<f64> = s.iter().map(|x| x * scale).collect();
                w.sort_by(f64::total_cmp);
                empirical_atoms(&w)
            }
            _ => unreachable!("artifact and model disagree"),
        }
    }
}

/// Groups sorted values that agree up to rounding in the running sum.
fn empirical_atoms(sorted: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut atoms: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for &x in sorted {
        match atoms.last() {
            Some(&a) if (x - a).abs() <= 1e-9 * (1.0 + a.abs()) => *counts.last_mut().unwrap() += 1,
            _ => {
                atoms.push(x);
                counts.push(1);
            }
        }
    }
    let total = sorted.len() as f64;
    let log_pmf = counts.iter().map(|&c| (c as f64 / total).ln()).collect();
    (atoms, log_pmf)
}

fn bad_csv(path: &str, line: usize) -> CliError {
    CliError::Config(format!("malformed cached artifact {path} at line {line}"))
}

fn parse_md_csv(bytes: &[u8], params: MDParams) -> Result<MDMagnetizationDist> {
    let mut j = Vec::new();
    let mut log_pmf = Vec::new();
    for (i, line) in bytes.lines().enumerate().skip(1) {
        let line = line.map_err(|e| CliError::io("reading cached distribution", e))?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad_csv("md distribution", i + 1));
        }
        j.push(cols[0].parse().map_err(|_| bad_csv("md distribution", i + 1))?);
        log_pmf.push(cols[2].parse().map_err(|_| bad_csv("md distribution", i + 1))?);
    }
    Ok(MDMagnetizationDist { params, j, log_pmf })
}

fn parse_sample_csv(bytes: &[u8]) -> Result<Vec<f64>> {
    let mut s = Vec::new();
    for (i, line) in bytes.lines().enumerate().skip(1) {
        let line = line.map_err(|e| CliError::io("reading cached samples", e))?;
        let v = line.split(',').nth(1).and_then(|c| c.parse().ok()).ok_or_else(|| bad_csv("samples", i + 1))?;
        s.push(v);
    }
    Ok(s)
}

#[derive(Serialize)]
struct CacheDescriptor<'a> {
    artifact: &'a str,
    format: u32,
    version: &'a str,
    n: u64,
    points: &'a [f64],
    weights: &'a [f64],
    k: usize,
    #[serde(rename = "J")]
    j: f64,
    h: f64,
    seed: u64,
    burn_in: usize,
    samples: usize,
    thin: usize,
}

/// Everything a command needs to schedule per-n jobs.
pub struct Pipeline {
    cfg: ExperimentConfig,
    setup: Setup,
    cache: Cache,
    pool: rayon::ThreadPool,
    started: Instant,
}

struct Fetched {
    loaded: Loaded,
    bytes: Vec<u8>,
    key: String,
    hit: bool,
}

/// Output of one per-n job before it is folded into the manifest.
struct JobOutput<T> {
    n: u64,
    path: PathBuf,
    key: String,
    hit: bool,
    seconds: f64,
    value: T,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let setup = Setup::new(&cfg)?;
        std::fs::create_dir_all(&cfg.output_dir)
            .map_err(|e| CliError::io(format!("creating {}", cfg.output_dir.display()), e))?;
        let cache = Cache::locate(&cfg.output_dir);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
        Ok(Self {
            cfg,
            setup,
            cache,
            pool,
            started: Instant::now(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn write_file(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok(PathBuf::from(name))
    }

    fn descriptor<'a>(&'a self, artifact: &'a str, n: u64, points: &'a [f64], weights: &'a [f64]) -> CacheDescriptor<'a> {
        let (k, j, h) = match &self.setup.model {
            ModelSetup::Cw(a) => (a.k, 0.0, 0.0),
            ModelSetup::Md(st) => (0, st.J, st.h),
        };
        let sampled = artifact == "cw-glauber-samples";
        let s = &self.cfg.sampler;
        CacheDescriptor {
            artifact,
            format: CACHE_FORMAT,
            version: env!("CARGO_PKG_VERSION"),
            n,
            points,
            weights,
            k,
            j,
            h,
            seed: if sampled { s.seed } else { 0 },
            burn_in: if sampled { s.burn_in } else { 0 },
            samples: if sampled { s.samples } else { 0 },
            thin: if sampled { s.thin } else { 0 },
        }
    }

    /// Exact distribution for `method = exact`, Glauber samples otherwise.
    fn fetch(&self, n: u64, method: Method) -> Result<Fetched> {
        match (&self.setup.model, method) {
            (ModelSetup::Cw(a), Method::Exact) => {
                let rho = &a.rho;
                let key = Cache::key(&self.descriptor("cw-exact-dist", n, rho.points(), rho.weights()));
                let (bytes, hit) = self.cache.get_or_compute(&key, || {
                    let mut buf = Vec::new();
                    cw::exact_magnetization_dist(rho, n)?.write_csv(&mut buf, a.k)?;
                    Ok(buf)
                })?;
                let step = rho.lattice_step().ok_or(steinmd_core::Error::NotLattice)?;
                let dist = MagnetizationDist::read_csv(bytes.as_slice(), n, step)?;
                Ok(Fetched {
                    loaded: Loaded::Cw(dist),
                    bytes,
                    key,
                    hit,
                })
            }
            (ModelSetup::Cw(a), Method::Glauber) => {
                let rho = &a.rho;
                let key = Cache::key(&self.descriptor("cw-glauber-samples", n, rho.points(), rho.weights()));
                let s = self.cfg.sampler;
                let size = usize::try_from(n).map_err(|_| CliError::Config(format!("n = {n} does not fit in memory")))?;
                let (bytes, hit) = self.cache.get_or_compute(&key, || {
                    let scale = a.w_scale(n);
                    let mut buf = String::from("index,s_value,w_value\n");
                    for (i, v) in glauber_sampler(rho, size, s.seed, s.burn_in, s.samples, s.thin)?.enumerate() {
                        buf.push_str(&format!("{i},{v:?},{:?}\n", v * scale));
                    }
                    Ok(buf.into_bytes())
                })?;
                Ok(Fetched {
                    loaded: Loaded::Samples(parse_sample_csv(&bytes)?),
                    bytes,
                    key,
                    hit,
                })
            }
            (ModelSetup::Md(st), Method::Exact) => {
                let key = Cache::key(&self.descriptor("md-exact-dist", n, &[], &[]));
                let params = MDParams::new(st.J, st.h, n)?;
                let (bytes, hit) = self.cache.get_or_compute(&key, || {
                    let mut buf = Vec::new();
                    md::exact_magnetization_dist(&params)?.write_csv(&mut buf, st)?;
                    Ok(buf)
                })?;
                Ok(Fetched {
                    loaded: Loaded::Md(parse_md_csv(&bytes, params)?),
                    bytes,
                    key,
                    hit,
                })
            }
            (ModelSetup::Md(_), Method::Glauber) => {
                Err(CliError::Config("the glauber method is only available for model = \"cw\"".into()))
            }
        }
    }

    /// Runs `job` for every `n` on the worker pool; results keep the order of `n_list`.
    fn run_jobs<T, F>(&self, job: F) -> Result<Vec<JobOutput<T>>>
    where
        T: Send,
        F: Fn(u64) -> Result<JobOutput<T>> + Sync,
    {
        let results: Vec<Result<JobOutput<T>>> = self.pool.install(|| self.cfg.n_list.par_iter().map(|&n| job(n)).collect());
        results.into_iter().collect()
    }

    fn manifest<T>(&self, command: &str, jobs: &[JobOutput<T>], summaries: Vec<PathBuf>) -> Result<PathBuf> {
        let m = RunManifest {
            command: command.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.cfg.hash(),
            config: self.cfg.clone(),
            cache_dir: self.cache.dir().to_path_buf(),
            artifacts: jobs
                .iter()
                .map(|j| ArtifactRecord {
                    n: j.n,
                    path: j.path.clone(),
                    cache_key: j.key.clone(),
                    cache_hit: j.hit,
                    seconds: j.seconds,
                })
                .collect(),
            summaries,
            total_seconds: self.started.elapsed().as_secs_f64(),
        };
        m.write(&self.cfg.output_dir)
    }

    fn model_tag(&self) -> &'static str {
        match self.cfg.model {
            Model::Cw => "cw",
            Model::Md => "md",
        }
    }

    /// Per-n exact distributions `<model>_dist_n<n>.csv`.
    pub fn enumerate(&self) -> Result<PathBuf> {
        if self.cfg.method != Method::Exact {
            return Err(CliError::Config("enumerate needs method = \"exact\"".into()));
        }
        let jobs = self.run_jobs(|n| {
            let t = Instant::now();
            let f = self.fetch(n, Method::Exact)?;
            let path = self.write_file(&format!("{}_dist_n{n}.csv", self.model_tag()), &f.bytes)?;
            Ok(JobOutput {
                n,
                path,
                key: f.key,
                hit: f.hit,
                seconds: t.elapsed().as_secs_f64(),
                value: (),
            })
        })?;
        self.manifest("enumerate", &jobs, Vec::new())
    }

    /// Per-n Glauber sample paths `cw_samples_n<n>.csv`.
    pub fn sample(&self) -> Result<PathBuf> {
        if self.cfg.model != Model::Cw {
            return Err(CliError::Config("sample needs model = \"cw\"".into()));
        }
        let jobs = self.run_jobs(|n| {
            let t = Instant::now();
            let f = self.fetch(n, Method::Glauber)?;
            let path = self.write_file(&format!("cw_samples_n{n}.csv"), &f.bytes)?;
            Ok(JobOutput {
                n,
                path,
                key: f.key,
                hit: f.hit,
                seconds: t.elapsed().as_secs_f64(),
                value: (),
            })
        })?;
        self.manifest("sample", &jobs, Vec::new())
    }

    fn curve(&self, n: u64, loaded: &Loaded) -> Result<RatioCurve> {
        let (atoms, log_pmf) = loaded.atoms(&self.setup, n);
        let tail = AtomTail::new(atoms, &log_pmf);
        Ok(ratio_curve(
            |z| tail.tail(z),
            &self.setup.law,
            &self.setup.range,
            n,
            self.cfg.z_grid_size,
            Alignment::Midpoints(tail.atoms()),
        )?)
    }

    fn ratio_jobs(&self) -> Result<Vec<JobOutput<RatioCurve>>> {
        self.run_jobs(|n| {
            let t = Instant::now();
            let f = self.fetch(n, self.cfg.method)?;
            let curve = self.curve(n, &f.loaded)?;
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            let path = self.write_file(&format!("ratio_n{n}.csv"), &buf)?;
            Ok(JobOutput {
                n,
                path,
                key: f.key,
                hit: f.hit,
                seconds: t.elapsed().as_secs_f64(),
                value: curve,
            })
        })
    }

    /// Per-n ratio curves `ratio_n<n>.csv`.
    pub fn ratio(&self) -> Result<PathBuf> {
        let jobs = self.ratio_jobs()?;
        self.manifest("ratio", &jobs, Vec::new())
    }

    /// Ratio curves plus the log-log fit in `scaling.json`. Fails verification
    /// when the fitted exponent leaves the configured band around the predicted one.
    pub fn scaling(&self) -> Result<PathBuf> {
        let jobs = self.ratio_jobs()?;
        let curves: Vec<&RatioCurve> = jobs.iter().map(|j| &j.value).collect();
        let summary = ScalingSummary::new(&self.cfg, &self.setup.range, &curves)?;
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        let json = self.write_file("scaling.json", text.as_bytes())?;
        let manifest = self.manifest("scaling", &jobs, vec![json])?;
        if !summary.pass {
            let target = summary.target_slope.map_or_else(|| "-".to_string(), |t| t.to_string());
            return Err(CliError::Verification(format!(
                "fitted slope {} (r^2 {}) misses target {} +/- {} or r^2 >= {}",
                summary.fit.slope, summary.fit.r_squared, target, summary.slope_tolerance, summary.min_r_squared
            )));
        }
        Ok(manifest)
    }

    /// Ratio errors and model diagnostics per n in `report.json` and `report.txt`.
    pub fn report(&self) -> Result<(PathBuf, String)> {
        let jobs = self.run_jobs(|n| {
            let t = Instant::now();
            let f = self.fetch(n, self.cfg.method)?;
            let curve = self.curve(n, &f.loaded)?;
            let row = self.report_row(n, &f.loaded, &curve)?;
            Ok(JobOutput {
                n,
                path: PathBuf::from("report.json"),
                key: f.key,
                hit: f.hit,
                seconds: t.elapsed().as_secs_f64(),
                value: row,
            })
        })?;
        let rows: Vec<&ReportRow> = jobs.iter().map(|j| &j.value).collect();
        let errors: Vec<(u64, f64)> = rows.iter().map(|r| (r.n, r.max_abs_err)).collect();
        let report = Report {
            model: self.model_summary(),
            range: self.setup.range.name().to_string(),
            law: self.setup.law.label().to_string(),
            c1: self.setup.law.c1(),
            rows: rows.iter().map(|r| (*r).clone()).collect(),
            fit: fit_exponent(&errors).ok(),
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        let json = self.write_file("report.json", text.as_bytes())?;
        let table = report.table();
        let txt = self.write_file("report.txt", table.as_bytes())?;
        let manifest = self.manifest("report", &jobs, vec![json, txt])?;
        Ok((manifest, table))
    }

    fn model_summary(&self) -> serde_json::Value {
        match &self.setup.model {
            ModelSetup::Cw(a) => serde_json::json!({
                "model": "cw",
                "k": a.k,
                "h2k": a.h2k,
                "drift_scale": a.drift_scale,
                "cumulants_from_order_2": a.cumulants,
                "h_prime_positive": a.h_prime_positive,
            }),
            ModelSetup::Md(st) => serde_json::json!({
                "model": "md",
                "J": st.J,
                "h": st.h,
                "phase": st.phase,
                "m0": st.m0,
                "lambda": st.lambda,
            }),
        }
    }

    fn report_row(&self, n: u64, loaded: &Loaded, curve: &RatioCurve) -> Result<ReportRow> {
        let weighted = self.setup.range.error_power().map(|q| curve.weighted_max_err(q));
        let mut row = ReportRow {
            n,
            z_max: curve.z_max,
            max_abs_err: curve.max_abs_err,
            weighted_max_err: weighted,
            pair: None,
            md_pair_second_moment: None,
        };
        match (&self.setup.model, loaded) {
            (ModelSetup::Cw(a), Loaded::Cw(_)) => {
                let d = pair_diagnostics(a, n, PairSource::Exact, &PairOptions::default())?;
                row.pair = Some(PairSummary::from(&d));
            }
            (ModelSetup::Cw(a), Loaded::Samples(_)) => {
                let s = self.cfg.sampler;
                let size = usize::try_from(n).map_err(|_| CliError::Config(format!("n = {n} does not fit in memory")))?;
                let mut stream = glauber_sampler(&a.rho, size, s.seed, s.burn_in, s.samples, s.thin)?;
                let mut samples = Vec::with_capacity(s.samples);
                while let Some(chain) = stream.advance() {
                    samples.push(PairSample::from_chain(a, chain));
                }
                let max_jump = GlauberSamples::chain(&stream).max_jump();
                let source = PairSource::Samples {
                    samples: &samples,
                    max_jump,
                };
                let d = pair_diagnostics(a, n, source, &PairOptions::default())?;
                row.pair = Some(PairSummary::from(&d));
            }
            (ModelSetup::Md(_), Loaded::Md(d)) => {
                row.md_pair_second_moment = Some(md::pair_second_moment(d)?);
            }
            _ => unreachable!("artifact and model disagree"),
        }
        Ok(row)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingPoint {
    pub n: u64,
    pub z_max: f64,
    pub grid_points: usize,
    pub max_abs_err: f64,
    pub weighted_max_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingSummary {
    pub range: String,
    pub points: Vec<ScalingPoint>,
    pub fit: ScalingFit,
    pub weighted_fit: Option<ScalingFit>,
    pub target_slope: Option<f64>,
    pub slope_tolerance: f64,
    pub min_r_squared: f64,
    pub pass: bool,
}

impl ScalingSummary {
    fn new(cfg: &ExperimentConfig, range: &RangeSpec, curves: &[&RatioCurve]) -> Result<Self> {
        let q = range.error_power();
        let points: Vec<ScalingPoint> = curves
            .iter()
            .map(|c| ScalingPoint {
                n: c.n,
                z_max: c.z_max,
                grid_points: c.z_values.len(),
                max_abs_err: c.max_abs_err,
                weighted_max_err: q.map(|q| c.weighted_max_err(q)),
            })
            .collect();
        let fit = fit_exponent(&points.iter().map(|p| (p.n, p.max_abs_err)).collect::<Vec<_>>())?;
        let weighted_fit = match q {
            Some(_) => Some(fit_exponent(
                &points.iter().map(|p| (p.n, p.weighted_max_err.unwrap_or(f64::NAN))).collect::<Vec<_>>(),
            )?),
            None => None,
        };
        let target_slope = range.error_rate().map(|r| -r);
        let tol = cfg.scaling.slope_tolerance;
        let pass = target_slope.map_or(true, |t| (fit.slope - t).abs() <= tol) && fit.r_squared >= cfg.scaling.min_r_squared;
        Ok(Self {
            range: range.name().to_string(),
            points,
            fit,
            weighted_fit,
            target_slope,
            slope_tolerance: tol,
            min_r_squared: cfg.scaling.min_r_squared,
            pass,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub delta: f64,
    pub max_step: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub residual_envelope_ratio: f64,
    pub bins: usize,
}

impl From<&cw::PairDiagnostics> for PairSummary {
    fn from(d: &cw::PairDiagnostics) -> Self {
        Self {
            delta: d.delta,
            max_step: d.max_step,
            delta1: d.delta1,
            delta2: d.delta2,
            residual_envelope_ratio: d.residual_envelope_ratio,
            bins: d.bins.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub n: u64,
    pub z_max: f64,
    pub max_abs_err: f64,
    pub weighted_max_err: Option<f64>,
    pub pair: Option<PairSummary>,
    pub md_pair_second_moment: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub model: serde_json::Value,
    pub range: String,
    pub law: String,
    pub c1: f64,
    pub rows: Vec<ReportRow>,
    pub fit: Option<ScalingFit>,
}

impl Report {
    /// Fixed-width text table of the per-n rows.
    pub fn table(&self) -> String {
        let mut s = format!("law {} (c1 = {:.6}), range {}\n", self.law, self.c1, self.range);
        s.push_str(&format!("{:>10} {:>12} {:>14} {:>14} {:>12} {:>12}\n", "n", "z_max", "max_abs_err", "weighted_err", "delta1", "delta2"));
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        for r in &self.rows {
            s.push_str(&format!(
                "{:>10} {:>12.6} {:>14.6e} {:>14} {:>12} {:>12}\n",
                r.n,
                r.z_max,
                r.max_abs_err,
                opt(r.weighted_max_err),
                opt(r.pair.as_ref().map(|p| p.delta1)),
                opt(r.pair.as_ref().map(|p| p.delta2)),
            ));
        }
        if let Some(f) = &self.fit {
            s.push_str(&format!("slope {:.6} (r^2 {:.6})\n", f.slope, f.r_squared));
        }
        s
    }
}
