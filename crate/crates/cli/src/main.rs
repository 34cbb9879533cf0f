mod output;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use tbfa::distributions::RngStream;
use tbfa::estimation::{fit, fit_best_of, Algorithm, FitConfig, FitResult};
use tbfa::inference::{standard_errors, FreeSet};
use tbfa::io::{read_mds, read_params, write_mds_binary, write_mds_text, write_params};
use tbfa::model::{factor_scores, identify_with, max_factors, MatrixDataset, ObsLabel, TbfaParams, TriangularForm};
use tbfa::selection::{bic, grid_select, SelectionConfig};
use tbfa::simbench::{
    accuracy_study, convergence_study, generate, inject_outliers, robustness_study, AccuracyConfig,
    ConvergenceConfig, GeneratorKind, GeneratorSpec, Method, OutlierFamily, OutlierSpec, RobustnessConfig,
    Situation,
};
use tbfa::TbfaError;

use output::{is_json, read, write_atomic, write_csv, write_json};

#[derive(Parser)]
#[command(name = "tbfa", version, about = "Robust bilinear factor analysis for matrix-valued data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Fit the model to a dataset.
    Fit(FitArgs),
    /// Choose (q_c, q_r) by BIC over a grid.
    Select(SelectArgs),
    /// Factor scores of every observation.
    Scores(ScoresArgs),
    /// Information-based standard errors.
    Stderr(StderrArgs),
    /// Benchmark runners.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Args)]
struct SimulateArgs {
    /// data1, data2, data3 or accuracy.
    #[arg(long)]
    kind: GeneratorKind,
    /// Clean observations; defaults to the recipe's size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the binary encoding.
    #[arg(long)]
    binary: bool,
    /// Outliers as FAMILY:SITUATION:P, e.g. FC:I:0.05.
    #[arg(long)]
    contaminate: Option<OutlierSpec>,
    /// Draw from the t model with this ν.
    #[arg(long)]
    nu: Option<f64>,
    /// Column dimension override (data1–3).
    #[arg(long)]
    d_c: Option<usize>,
    /// Ground-truth parameter file [default: OUT.truth].
    #[arg(long)]
    truth: Option<PathBuf>,
    /// One label per line [default: OUT.labels].
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct FitOpts {
    #[arg(long, default_value = "px-ecme")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    tmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Matrix-normal errors instead of matrix-t.
    #[arg(long)]
    gaussian: bool,
    /// Loading zero pattern: lower or reversed.
    #[arg(long, default_value = "lower")]
    form: TriangularForm,
}

impl FitOpts {
    fn config(&self) -> FitConfig {
        FitConfig {
            algorithm: self.algorithm,
            tol: self.tol,
            t_max: self.tmax,
            seed: self.seed,
            gaussian: self.gaussian,
            form: self.form,
            ..FitConfig::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    qc: usize,
    #[arg(long)]
    qr: usize,
    #[command(flatten)]
    opts: FitOpts,
    /// Random starts; the best likelihood is kept.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Also write the estimate as a parameter file.
    #[arg(long)]
    params_out: Option<PathBuf>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    /// LO-HI or a single value.
    #[arg(long)]
    qc_range: String,
    #[arg(long)]
    qr_range: String,
    #[command(flatten)]
    opts: FitOpts,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// JSON, or CSV when the extension is not .json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoresArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    params: PathBuf,
    /// Dataset of q_c × q_r score blocks.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct StderrArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    n: usize,
    /// Zero pattern imposed before computing the errors.
    #[arg(long, default_value = "lower")]
    form: TriangularForm,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Log-likelihood traces of the four algorithms from one start.
    Convergence(ConvergenceArgs),
    /// Covariance error under contamination.
    Robustness(RobustnessArgs),
    /// RMSE, ESTD and IMSE of the 5×5 model.
    Accuracy(AccuracyArgs),
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, default_value = "data1")]
    kind: GeneratorKind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d_c: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    tmax: usize,
    #[arg(long, default_value_t = 3)]
    qc: usize,
    #[arg(long, default_value_t = 3)]
    qr: usize,
    /// JSON traces.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RobustnessArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Comma-separated FC, OC, FC+OC [default: all].
    #[arg(long, value_delimiter = ',')]
    family: Vec<OutlierFamily>,
    /// Comma-separated I–IV [default: I,III].
    #[arg(long, value_delimiter = ',')]
    situation: Vec<Situation>,
    /// Comma-separated proportions.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Comma-separated tbfa, bfa, tfa, fa [default: all].
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "px-ecme")]
    algorithm: Algorithm,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AccuracyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [100, 500, 5000])]
    n_values: Vec<usize>,
    /// Repetitions per sample size.
    #[arg(long, value_delimiter = ',', default_values_t = [100, 100, 25])]
    reps: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    NotConverged,
    Lib(TbfaError),
}

impl From<TbfaError> for Failure {
    fn from(e: TbfaError) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &TbfaError) -> u8 {
    match e {
        TbfaError::Divergence { .. }
        | TbfaError::Factorization(_)
        | TbfaError::Singular { .. }
        | TbfaError::Selection(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Fit(a) => fit_cmd(a),
        Cmd::Select(a) => select(a),
        Cmd::Scores(a) => scores(a),
        Cmd::Stderr(a) => stderr_cmd(a),
        Cmd::Bench(b) => match b {
            BenchCmd::Convergence(a) => bench_convergence(a),
            BenchCmd::Robustness(a) => bench_robustness(a),
            BenchCmd::Accuracy(a) => bench_accuracy(a),
        },
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged) => {
            eprintln!("warning: iteration limit reached before convergence");
            ExitCode::from(3)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn load_data(path: &Path) -> Result<MatrixDataset, TbfaError> {
    read_mds(&read(path)?)
}

fn load_params(path: &Path) -> Result<TbfaParams, TbfaError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| TbfaError::Io(e.to_string()))?;
    read_params(&text)
}

fn encode(data: &MatrixDataset, binary: bool) -> Vec<u8> {
    if binary {
        write_mds_binary(data)
    } else {
        write_mds_text(data).into_bytes()
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut spec = GeneratorSpec::new(a.kind, a.n.unwrap_or(GeneratorSpec::default_n(a.kind)));
    if let Some(nu) = a.nu {
        spec = spec.with_nu(nu);
    }
    if let Some(d) = a.d_c {
        spec = spec.with_d_c(d);
    }
    let master = RngStream::new(a.seed);
    let (mut data, truth) = generate(&spec, &mut master.split(0))?;
    if let Some(c) = &a.contaminate {
        data = inject_outliers(&data, &truth, c, &mut master.split(1))?;
    }
    write_atomic(&a.out, &encode(&data, a.binary))?;
    write_atomic(&a.truth.unwrap_or_else(|| sidecar(&a.out, "truth")), write_params(&truth).as_bytes())?;
    let labels: String = data
        .labels_or_clean()
        .iter()
        .map(|l| match l {
            ObsLabel::Clean => "clean\n",
            ObsLabel::Outlier => "outlier\n",
        })
        .collect();
    write_atomic(&a.labels.unwrap_or_else(|| sidecar(&a.out, "labels")), labels.as_bytes())?;
    Ok(())
}

fn check_dims(data: &MatrixDataset, qc: usize, qr: usize) -> Result<(), Failure> {
    for (name, q, d) in [("--qc", qc, data.d_c()), ("--qr", qr, data.d_r())] {
        if q > max_factors(d) {
            return Err(Failure::Usage(format!("{name} {q} exceeds max_factors({d}) = {}", max_factors(d))));
        }
    }
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Serialize)]
struct ParamsJson {
    w: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    psi_c: Vec<f64>,
    r: Vec<Vec<f64>>,
    psi_r: Vec<f64>,
    /// Absent in Gaussian mode.
    nu: Option<f64>,
    gaussian: bool,
}

impl From<&TbfaParams> for ParamsJson {
    fn from(p: &TbfaParams) -> Self {
        Self {
            w: rows(&p.w),
            c: rows(&p.c),
            psi_c: p.psi_c.iter().copied().collect(),
            r: rows(&p.r),
            psi_r: p.psi_r.iter().copied().collect(),
            nu: p.finite_nu(),
            gaussian: p.gaussian,
        }
    }
}

#[derive(Serialize)]
struct FitReport {
    algorithm: String,
    q_c: usize,
    q_r: usize,
    n: usize,
    converged: bool,
    iterations: usize,
    loglik: f64,
    bic: f64,
    free_params: usize,
    nu_saturated: bool,
    degenerate: bool,
    params: ParamsJson,
    loglik_trace: Vec<f64>,
    tau: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_trace: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_seconds: Option<f64>,
}

fn fit_report(r: &FitResult, data: &MatrixDataset, timing: bool) -> FitReport {
    FitReport {
        algorithm: r.algorithm.to_string(),
        q_c: r.params.q_c(),
        q_r: r.params.q_r(),
        n: data.n(),
        converged: r.converged,
        iterations: r.iterations,
        loglik: r.loglik(),
        bic: bic(r, data),
        free_params: r.params.free_param_count(),
        nu_saturated: r.nu_saturated,
        degenerate: r.degenerate,
        params: (&r.params).into(),
        loglik_trace: r.loglik_trace.clone(),
        tau: r.final_tau.clone(),
        time_trace: timing.then(|| r.time_trace.clone()),
        elapsed_seconds: timing.then_some(r.elapsed_seconds),
    }
}

fn fit_cmd(a: FitArgs) -> Result<(), Failure> {
    let data = load_data(&a.data)?;
    check_dims(&data, a.qc, a.qr)?;
    if a.restarts == 0 {
        return Err(Failure::Usage("--restarts must be at least 1".into()));
    }
    let cfg = a.opts.config();
    let r = if a.restarts == 1 { fit(&data, a.qc, a.qr, &cfg)? } else { fit_best_of(&data, a.qc, a.qr, &cfg, a.restarts)? };
    write_json(&a.out, &fit_report(&r, &data, a.timing))?;
    if let Some(p) = &a.params_out {
        write_atomic(p, write_params(&r.params).as_bytes())?;
    }
    if r.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<usize>, Failure> {
    let bad = || Failure::Usage(format!("malformed range '{s}', expected LO-HI with LO <= HI"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = match s.split_once('-') {
        Some((l, h)) => (num(l)?, num(h)?),
        None => {
            let v = num(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn select(a: SelectArgs) -> Result<(), Failure> {
    let qc = parse_range(&a.qc_range)?;
    let qr = parse_range(&a.qr_range)?;
    let data = load_data(&a.data)?;
    check_dims(&data, *qc.end(), *qr.end())?;
    let cfg = SelectionConfig { fit: a.opts.config(), restarts: a.restarts.max(1) };
    let rep = grid_select(&data, qc, qr, &cfg)?;
    if is_json(&a.out) {
        write_json(&a.out, &rep)?;
    } else {
        let rows: Vec<Vec<String>> = rep
            .grid
            .iter()
            .map(|c| {
                vec![
                    c.q_c.to_string(),
                    c.q_r.to_string(),
                    c.bic.to_string(),
                    c.loglik.to_string(),
                    c.converged.to_string(),
                    c.nu_hat.to_string(),
                    c.free_params.to_string(),
                    ((c.q_c, c.q_r) == rep.best).to_string(),
                ]
            })
            .collect();
        write_csv(&a.out, &["q_c", "q_r", "bic", "loglik", "converged", "nu_hat", "free_params", "best"], &rows)?;
    }
    Ok(())
}

fn scores(a: ScoresArgs) -> Result<(), Failure> {
    let data = load_data(&a.data)?;
    let p = load_params(&a.params)?;
    if (p.d_c(), p.d_r()) != (data.d_c(), data.d_r()) {
        return Err(Failure::Usage(format!(
            "parameters are {}x{} but data are {}x{}",
            p.d_c(),
            p.d_r(),
            data.d_c(),
            data.d_r()
        )));
    }
    if p.q_c() == 0 || p.q_r() == 0 {
        return Err(Failure::Usage("factor scores need q_c, q_r >= 1".into()));
    }
    let z = data.observations().iter().map(|x| factor_scores(&p, x)).collect::<Result<Vec<_>, _>>()?;
    let out = MatrixDataset::with_shape(p.q_c(), p.q_r(), z)?;
    write_atomic(&a.out, &encode(&out, a.binary))?;
    Ok(())
}

#[derive(Serialize)]
struct SeRow<'a> {
    name: &'a str,
    estimate: f64,
    se: f64,
}

fn stderr_cmd(a: StderrArgs) -> Result<(), Failure> {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be positive".into()));
    }
    let p = identify_with(&load_params(&a.params)?, a.form).params;
    let free = FreeSet::Identified(a.form);
    let layout = tbfa::inference::ParamLayout::new(&p, free);
    let se = standard_errors(&p, a.n, free)?;
    let est = layout.values(&p);
    if is_json(&a.out) {
        let rows: Vec<SeRow> = se
            .names
            .iter()
            .zip(&est)
            .zip(&se.values)
            .map(|((name, &estimate), &se)| SeRow { name, estimate, se })
            .collect();
        write_json(&a.out, &rows)?;
    } else {
        let rows: Vec<Vec<String>> = se
            .names
            .iter()
            .zip(&est)
            .zip(&se.values)
            .map(|((n, e), s)| vec![n.clone(), e.to_string(), s.to_string()])
            .collect();
        write_csv(&a.out, &["name", "estimate", "se"], &rows)?;
    }
    Ok(())
}

fn bench_convergence(a: ConvergenceArgs) -> Result<(), Failure> {
    let mut cfg = ConvergenceConfig::new(a.kind);
    if let Some(n) = a.n {
        cfg.spec.n = n;
    }
    if let Some(d) = a.d_c {
        cfg.spec = cfg.spec.with_d_c(d);
    }
    if let Some(t) = a.tol {
        cfg.tol = t;
    }
    cfg.seed = a.seed;
    cfg.t_max = a.tmax;
    cfg.q_c = a.qc;
    cfg.q_r = a.qr;
    let traces = convergence_study(&cfg)?;
    write_json(&a.out, &traces)?;
    Ok(())
}

fn bench_robustness(a: RobustnessArgs) -> Result<(), Failure> {
    let mut cfg = RobustnessConfig { n: a.n, reps: a.reps, seed: a.seed, algorithm: a.algorithm, ..Default::default() };
    if !a.family.is_empty() {
        cfg.families = a.family;
    }
    if !a.situation.is_empty() {
        cfg.situations = a.situation;
    }
    if !a.p.is_empty() {
        cfg.proportions = a.p;
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods;
    }
    let cells = robustness_study(&cfg)?;
    if is_json(&a.out) {
        write_json(&a.out, &cells)?;
    } else {
        let rows: Vec<Vec<String>> = cells
            .iter()
            .map(|c| {
                vec![
                    c.family.to_string(),
                    c.situation.to_string(),
                    c.method.to_string(),
                    c.p.to_string(),
                    c.rel_error.to_string(),
                    c.rel_error_x100.to_string(),
                    c.failures.to_string(),
                ]
            })
            .collect();
        write_csv(&a.out, &["family", "situation", "method", "p", "relerr", "relerr_x100", "failures"], &rows)?;
    }
    Ok(())
}

fn bench_accuracy(a: AccuracyArgs) -> Result<(), Failure> {
    if a.n_values.len() != a.reps.len() {
        return Err(Failure::Usage("--n-values and --reps need the same length".into()));
    }
    let cfg = AccuracyConfig { n_values: a.n_values, reps: a.reps, seed: a.seed, ..Default::default() };
    let tables = accuracy_study(&cfg)?;
    if is_json(&a.out) {
        write_json(&a.out, &tables)?;
    } else {
        let mut rows = Vec::new();
        for t in &tables {
            for j in 0..t.names.len() {
                rows.push(vec![
                    t.n.to_string(),
                    t.names[j].clone(),
                    t.truth[j].to_string(),
                    t.rmse[j].to_string(),
                    t.estd[j].to_string(),
                    t.imse[j].to_string(),
                ]);
            }
        }
        write_csv(&a.out, &["n", "parameter", "truth", "rmse", "estd", "imse"], &rows)?;
    }
    Ok(())
}
