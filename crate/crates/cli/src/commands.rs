use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use hllgemm::eval::{evaluate, GroundTruth};
use hllgemm::{
    analyze, multiply_mode, read_matrix_market, spgemm, write_matrix_market, CsrMatrix, EngineConfig, EngineError,
    ParseError, RunReport, StageTimes, TierConfig,
};

use crate::args::{AnalyzeArgs, BenchArgs, Corpus, EstEvalArgs, MultiplyArgs, Op, Operands, Workflow};
use crate::record::{write_records, Record};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Parse(PathBuf, ParseError),
    Engine(EngineError),
    Io(PathBuf, io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Engine(EngineError::Resource { .. }) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Parse(p, e) => write!(f, "{}: {e}", p.display()),
            Failure::Engine(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure::Engine(e)
    }
}

fn load(path: &Path) -> Result<CsrMatrix, Failure> {
    read_matrix_market(path).map_err(|e| Failure::Parse(path.to_path_buf(), e))
}

fn check_b(op: Op, b: Option<&PathBuf>) -> Result<(), Failure> {
    match (op, b) {
        (Op::Ab, None) => Err(Failure::Usage("--op ab requires --b <path.mtx>".into())),
        (Op::Aa | Op::Aat, Some(_)) => Err(Failure::Usage("--b is only used with --op ab".into())),
        _ => Ok(()),
    }
}

/// Right-hand operand, loaded once when the op needs one.
fn load_b(op: Op, b: Option<&PathBuf>) -> Result<Option<CsrMatrix>, Failure> {
    check_b(op, b)?;
    b.map(|p| load(p)).transpose()
}

fn engine_config(workflow: Workflow, registers: Option<usize>, coef: Option<f64>, seed: u64) -> EngineConfig {
    let tiers = match coef {
        Some(c) => TierConfig::default().with_coef(c),
        None => TierConfig::default(),
    };
    EngineConfig {
        workflow: workflow.to_override(),
        registers,
        tiers,
        seed,
        ..EngineConfig::default()
    }
}

fn matrix_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn multiply(args: &MultiplyArgs) -> Result<(), Failure> {
    let Operands { a, op, b } = &args.operands;
    let b = load_b(*op, b.as_ref())?;
    let a = load(a)?;
    let (left, right) = multiply_mode(&a, op.mode(), b.as_ref())?;
    let mut cfg = engine_config(args.workflow, args.registers, args.coef, args.seed);
    cfg.sampling = args.sampling.params().map_err(Failure::Usage)?;
    cfg.staging_limit_bytes = args.staging_limit;
    let (c, report) = spgemm(left, &right, &cfg)?;

    if let Some(path) = &args.out {
        let f = File::create(path).map_err(|e| Failure::Io(path.clone(), e))?;
        let mut w = BufWriter::new(f);
        write_matrix_market(&c, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::Io(path.clone(), e))?;
    }
    if let Some(path) = &args.report {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Failure::Io(path.clone(), e))?;
    }
    println!(
        "{} {}x{} nnz={} products={} workflow={} overflow_rows={} total_ms={:.3}",
        op.label(),
        c.nrows(),
        c.ncols(),
        c.nnz(),
        report.total_products,
        report.workflow,
        report.overflow_rows,
        report.timings.total_ms
    );
    Ok(())
}

pub fn analyze_cmd(args: &AnalyzeArgs) -> Result<(), Failure> {
    let Operands { a, op, b } = &args.operands;
    let b = load_b(*op, b.as_ref())?;
    let a = load(a)?;
    let (left, right) = multiply_mode(&a, op.mode(), b.as_ref())?;
    let (report, _) = analyze(left, &right, &args.sampling.params().map_err(Failure::Usage)?, args.seed, args.registers)
        .map_err(EngineError::from)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }
    println!("rows              {}", report.stats.nrows());
    println!("nnz_a             {}", report.nnz_a);
    println!("products          {}", report.total_products);
    println!("er                {:.4}", report.er);
    println!("avg_products      {:.4}", report.avg_products);
    if let Some(s) = &report.sampled {
        println!("cr_sampled        {:.4}", s.cr_hat);
        println!("row_cr_mean       {:.4}", s.mean_row_cr);
        println!("row_cr_std        {:.4}", s.std_row_cr);
        println!("rows_sampled      {}", s.n_sampled);
    }
    println!("registers         {}", report.choice.registers);
    println!("workflow          {}", report.choice.kind);
    Ok(())
}

/// Matrix paths named by `--a` or `--list`.
fn corpus_paths(corpus: &Corpus) -> Result<Vec<PathBuf>, Failure> {
    if let Some(a) = &corpus.a {
        return Ok(vec![a.clone()]);
    }
    let list = corpus.list.as_ref().expect("clap requires --a or --list");
    let text = std::fs::read_to_string(list).map_err(|e| Failure::Io(list.clone(), e))?;
    let base = list.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        })
        .collect())
}

fn mean_times(reports: &[RunReport]) -> StageTimes {
    let n = reports.len().max(1) as f64;
    let mut t = StageTimes::default();
    for r in reports {
        let s = &r.timings;
        t.analysis_ms += s.analysis_ms / n;
        t.sketch_ms += s.sketch_ms / n;
        t.predict_ms += s.predict_ms / n;
        t.numeric_ms += s.numeric_ms / n;
        t.fallback_ms += s.fallback_ms / n;
        t.compact_ms += s.compact_ms / n;
        t.total_ms += s.total_ms / n;
    }
    t
}

fn nonempty_rows(c: &CsrMatrix) -> usize {
    c.row_ptr().windows(2).filter(|w| w[1] > w[0]).count()
}

fn fail(mut rec: Record, status: &str, name: &str, msg: impl fmt::Display) -> Record {
    eprintln!("{name}: {msg}");
    rec.status = status.into();
    rec
}

fn bench_one(a: &CsrMatrix, b: &CsrMatrix, cfg: &EngineConfig, args: &BenchArgs, mut rec: Record) -> Record {
    let timeout = Duration::from_secs_f64(args.timeout.max(0.0));
    let run = |cfg: &EngineConfig| {
        let cfg = EngineConfig {
            deadline: Some(Instant::now() + timeout),
            ..cfg.clone()
        };
        spgemm(a, b, &cfg)
    };
    let mut last = None;
    for _ in 0..args.warmup {
        match run(cfg) {
            Ok(out) => last = Some(out),
            Err(e) => return classify(rec, e),
        }
    }
    let mut reports = Vec::with_capacity(args.runs);
    for _ in 0..args.runs {
        match run(cfg) {
            Ok((c, r)) => {
                reports.push(r.clone());
                last = Some((c, r));
            }
            Err(e) => return classify(rec, e),
        }
    }
    let Some((c, r)) = last else {
        rec.status = "ok".into();
        return rec;
    };
    let t = mean_times(&reports);
    let measured = !reports.is_empty();
    let time = |v: f64| measured.then_some(v);
    rec.status = "ok".into();
    rec.registers = r.registers.or(rec.registers);
    rec.analysis_ms = time(t.analysis_ms);
    rec.sketch_ms = time(t.sketch_ms);
    rec.predict_ms = time(t.predict_ms);
    rec.numeric_ms = time(t.numeric_ms);
    rec.fallback_ms = time(t.fallback_ms);
    rec.compact_ms = time(t.compact_ms);
    rec.total_ms = time(t.total_ms);
    rec.nnz_a = Some(r.nnz_a);
    rec.nnz_c = Some(r.nnz_c);
    rec.products = Some(r.total_products);
    rec.flops = Some(r.flops);
    rec.gflops = measured.then(|| if t.total_ms > 0.0 { r.flops as f64 / (t.total_ms * 1e6) } else { 0.0 });
    rec.overflow_rows = Some(r.overflow_rows);
    rec.mean_rel_err = r.estimation.as_ref().map(|e| e.mean_rel_err);
    rec.std_rel_err = r.estimation.as_ref().map(|e| e.std_rel_err);
    let rows = nonempty_rows(&c);
    rec.overflow_ratio = Some(if rows > 0 { r.overflow_rows as f64 / rows as f64 } else { 0.0 });
    rec.cr_true = Some(r.cr_true);
    rec.cr_sampled = r.sampled.as_ref().map(|s| s.cr_hat);
    rec
}

fn classify(rec: Record, e: EngineError) -> Record {
    let name = rec.matrix.clone();
    match e {
        EngineError::Timeout(_) => fail(rec, "timeout", &name, e),
        e => fail(rec, "error", &name, e),
    }
}

pub fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let corpus = &args.corpus;
    check_b(corpus.op, corpus.b.as_ref())?;
    let b = corpus.b.as_ref().map(|p| load(p));
    let paths = corpus_paths(corpus)?;
    let registers: Vec<Option<usize>> = if args.registers.is_empty() {
        vec![None]
    } else {
        args.registers.iter().copied().map(Some).collect()
    };

    let mut records = Vec::new();
    for path in &paths {
        let name = matrix_name(path);
        let loaded = load(path).and_then(|a| match &b {
            Some(Err(e)) => Err(Failure::Usage(e.to_string())),
            _ => Ok(a),
        });
        for &workflow in &args.workflow {
            for &m in &registers {
                let rec = Record {
                    matrix: name.clone(),
                    op: corpus.op.label().into(),
                    workflow: workflow.label().into(),
                    registers: m,
                    coef: args.coef,
                    seed: args.seed,
                    warmup: Some(args.warmup),
                    runs: Some(args.runs),
                    ..Record::default()
                };
                let a = match &loaded {
                    Ok(a) => a,
                    Err(e) => {
                        records.push(fail(rec, "error", &name, e));
                        continue;
                    }
                };
                let b = b.as_ref().and_then(|r| r.as_ref().ok());
                let (left, right) = match multiply_mode(a, corpus.op.mode(), b) {
                    Ok(x) => x,
                    Err(e) => {
                        records.push(fail(rec, "error", &name, e));
                        continue;
                    }
                };
                let mut cfg = engine_config(workflow, m, args.coef, args.seed);
                cfg.sampling = args.sampling.params().map_err(Failure::Usage)?;
                records.push(bench_one(left, &right, &cfg, args, rec));
            }
        }
    }
    write_records(args.csv.as_deref(), &records).map_err(|e| Failure::Io(args.csv.clone().unwrap_or_default(), e))
}

pub fn est_eval(args: &EstEvalArgs) -> Result<(), Failure> {
    let corpus = &args.corpus;
    check_b(corpus.op, corpus.b.as_ref())?;
    let b = corpus.b.as_ref().map(|p| load(p));
    let paths = corpus_paths(corpus)?;
    let params = args.sampling.params().map_err(Failure::Usage)?;
    let tiers = TierConfig::default();

    let mut records = Vec::new();
    for path in &paths {
        let name = matrix_name(path);
        let base = Record {
            matrix: name.clone(),
            op: corpus.op.label().into(),
            workflow: "hll_estimation".into(),
            coef: args.coef,
            seed: args.seed,
            ..Record::default()
        };
        let prepared = load(path)
            .and_then(|a| match &b {
                Some(Err(e)) => Err(Failure::Usage(e.to_string())),
                _ => Ok(a),
            })
            .and_then(|a| {
                let b = b.as_ref().and_then(|r| r.as_ref().ok());
                let (_, right) = multiply_mode(&a, corpus.op.mode(), b)?;
                let right = right.into_owned();
                let truth = GroundTruth::new(&a, &right).map_err(EngineError::from)?;
                Ok((a, right, truth))
            });
        let (a, right, truth) = match prepared {
            Ok(x) => x,
            Err(e) => {
                for &m in &args.registers {
                    let rec = Record {
                        registers: Some(m),
                        ..base.clone()
                    };
                    records.push(fail(rec, "error", &name, &e));
                }
                continue;
            }
        };
        for &m in &args.registers {
            let e = evaluate(&a, &right, &truth, m, args.coef, &tiers, &params, args.seed)
                .expect("register counts are validated by the parser");
            records.push(Record {
                registers: Some(m),
                coef: Some(e.coef),
                status: "ok".into(),
                nnz_a: Some(a.nnz()),
                nnz_c: Some(truth.nnz_c),
                products: Some(truth.stats.total_products),
                flops: Some(2 * truth.stats.total_products),
                mean_rel_err: Some(e.mean_rel_err),
                std_rel_err: Some(e.std_rel_err),
                overflow_rows: Some(e.overflow_rows),
                overflow_ratio: Some(e.overflow_ratio),
                cr_true: Some(e.cr_true),
                cr_sampled: Some(e.cr_sampled),
                ..base.clone()
            });
        }
    }
    write_records(args.csv.as_deref(), &records).map_err(|e| Failure::Io(args.csv.clone().unwrap_or_default(), e))
}
