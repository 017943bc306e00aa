//! One binary over the whole toolkit: generate data, fit models, serve the
//! prediction oracle, run the attacks, and drive full campaigns. Every file
//! written gets a reproducibility manifest beside it.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use killchain::logging;
use killchain::manifest::{sha256_hex, RunManifest};
use killchain::report::{render, sniff_result, ExtractionDoc};
use killchain::scenario::{load_scenario, resolve, Scenario};
use killchain::sweep::{budget_sweep, sweep_to_csv, SweepAttack, SweepSpec};
use killchain_core::campaign::{run_campaign, CampaignReport};
use killchain_core::datagen::{
    dataset_from_csv, dataset_to_csv, gen_continuum, gen_gaussian_blobs,
};
use killchain_core::error::{Error, Result};
use killchain_core::extraction::{
    extract_blr, extract_mlp, extract_mlr, extract_tree, lowd_meek, FeatureDomain, FidelityEval,
    HyperplaneEstimate,
};
use killchain_core::inversion::inversion_against_clone;
use killchain_core::models::{
    train_blr, train_mlp, train_mlr, train_tree, BlrHyper, MlpHyper, MlrHyper, TargetModel,
    TreeHyper,
};
use killchain_core::oracle::wire::{serve, WireClient};
use killchain_core::oracle::{
    make_oracle, Oracle, OracleConfig, OracleMode, OracleResponse, QueryOracle,
};
use killchain_core::persist::{load_model, save_model, write_json_file, ModelDoc};
use killchain_core::rng::{sub_seed, uniform_points};

/// Uniform points behind each of the two extraction fidelity scores.
const EVAL_POINTS: usize = 1000;
/// Uniform probes spent hunting lowd-meek witnesses when none are given.
const WITNESS_PROBES: usize = 1000;

#[derive(Parser)]
#[command(
    name = "killchain",
    version,
    about = "Attack-side toolkit for prediction APIs: extraction, inversion, poisoning, and the staged kill chain",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled dataset as CSV.
    Gen(GenArgs),
    /// Fit a model on a CSV dataset and save it as JSON.
    Train(TrainArgs),
    /// Serve a saved model as a TCP prediction oracle until interrupted.
    ServeOracle(ServeOracleArgs),
    /// Run one extraction attack against an in-process or remote oracle.
    Extract(ExtractArgs),
    /// Maximize one class's confidence against a saved model.
    Invert(InvertArgs),
    /// Drive the staged campaign from a scenario file.
    Campaign(CampaignArgs),
    /// Render a result file as a human-readable table.
    Report(ReportArgs),
    /// Fidelity-versus-budget curve over repeated extraction trials.
    Sweep(SweepArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::ServeOracle(a) => cmd_serve_oracle(a),
        Cmd::Extract(a) => cmd_extract(a),
        Cmd::Invert(a) => cmd_invert(a),
        Cmd::Campaign(a) => cmd_campaign(a),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    }
}

// ---------------------------------------------------------------- gen

#[derive(Args, Serialize)]
struct GenArgs {
    /// Dataset family to draw.
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    seed: u64,
    /// Points per archetype class.
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    /// Feature count.
    #[arg(long, default_value_t = 4)]
    dims: usize,
    /// Class count (blobs only; the continuum is binary).
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Centre-to-centre distance between class blobs (blobs only).
    #[arg(long, default_value_t = 0.8)]
    separation: f64,
    /// Graded interpolants between the archetypes (continuum only).
    #[arg(long, default_value_t = 9)]
    variants: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GenKind {
    Blobs,
    Continuum,
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let csv = match a.kind {
        GenKind::Blobs => {
            let ds = gen_gaussian_blobs(a.seed, a.per_class, a.dims, a.classes, a.separation)?;
            dataset_to_csv(&ds, None)
        }
        GenKind::Continuum => {
            let c = gen_continuum(a.seed, a.per_class, a.variants, a.dims)?;
            dataset_to_csv(&c.base, Some(&c.grades))
        }
    };
    fs::write(&a.out, &csv)?;
    logging::info(&format!("wrote {}", a.out.display()));
    let mut m = RunManifest::new("gen", &a)?;
    m.seed("master", a.seed);
    m.output(&a.out)?;
    m.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Training dataset CSV with header `f0..f{d-1},label[,grade]`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Initialization seed (mlr and mlp only).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Learning-rate override.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// L2 penalty override.
    #[arg(long)]
    l2: Option<f64>,
    /// Hidden width (mlp only).
    #[arg(long)]
    hidden: Option<usize>,
    /// Depth cap (tree only).
    #[arg(long)]
    max_depth: Option<usize>,
    /// Smallest splittable node (tree only).
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyArg {
    Blr,
    Mlr,
    Mlp,
    Tree,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (ds, _grades) = dataset_from_csv(&fs::read_to_string(&a.data)?)?;
    let (model, doc) = match a.family {
        FamilyArg::Blr => {
            let mut h = BlrHyper::default();
            if let Some(v) = a.lr {
                h.lr = v;
            }
            if let Some(v) = a.epochs {
                h.epochs = v;
            }
            if let Some(v) = a.l2 {
                h.l2 = v;
            }
            let model = TargetModel::Blr(train_blr(&ds, &h)?);
            (model.clone(), ModelDoc::new(model).with_train_meta(a.seed, &h)?)
        }
        FamilyArg::Mlr => {
            let mut h = MlrHyper {
                seed: a.seed,
                ..MlrHyper::default()
            };
            if let Some(v) = a.lr {
                h.lr = v;
            }
            if let Some(v) = a.epochs {
                h.epochs = v;
            }
            if let Some(v) = a.l2 {
                h.l2 = v;
            }
            let model = TargetModel::Mlr(train_mlr(&ds, &h)?);
            (model.clone(), ModelDoc::new(model).with_train_meta(a.seed, &h)?)
        }
        FamilyArg::Mlp => {
            let mut h = MlpHyper {
                seed: a.seed,
                ..MlpHyper::default()
            };
            if let Some(v) = a.lr {
                h.lr = v;
            }
            if let Some(v) = a.epochs {
                h.epochs = v;
            }
            if let Some(v) = a.l2 {
                h.l2 = v;
            }
            if let Some(v) = a.hidden {
                h.hidden = v;
            }
            let model = TargetModel::Mlp(train_mlp(&ds, &h)?);
            (model.clone(), ModelDoc::new(model).with_train_meta(a.seed, &h)?)
        }
        FamilyArg::Tree => {
            let mut h = TreeHyper::default();
            if let Some(v) = a.max_depth {
                h.max_depth = v;
            }
            if let Some(v) = a.min_leaf {
                h.min_leaf = v;
            }
            let model = TargetModel::Tree(train_tree(&ds, &h)?);
            (model.clone(), ModelDoc::new(model).with_train_meta(a.seed, &h)?)
        }
    };
    save_model(&doc, &a.out)?;
    let hits = ds
        .points
        .iter()
        .zip(&ds.labels)
        .filter(|(x, &y)| model.predict_label(x).ok() == Some(y))
        .count();
    logging::info(&format!(
        "{} on {} points: train accuracy {:.4}, wrote {}",
        model.kind_name(),
        ds.points.len(),
        hits as f64 / ds.points.len() as f64,
        a.out.display()
    ));
    let mut m = RunManifest::new("train", &a)?;
    m.seed("master", a.seed);
    m.input(&a.data)?;
    m.output(&a.out)?;
    m.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------- serve-oracle

#[derive(Args, Serialize)]
struct ServeOracleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Confidence)]
    mode: ModeArg,
    /// Accepted-query budget; 0 means unlimited.
    #[arg(long, default_value_t = 0)]
    budget: u64,
    /// TCP port on 127.0.0.1; 0 picks an ephemeral port.
    #[arg(long)]
    port: u16,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stddev of Gaussian noise added to reported confidences.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Round confidences to this many decimals; negative means exact.
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    decimals: i32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Confidence,
    LabelOnly,
    TreeId,
}

impl From<ModeArg> for OracleMode {
    fn from(m: ModeArg) -> OracleMode {
        match m {
            ModeArg::Confidence => OracleMode::Confidence,
            ModeArg::LabelOnly => OracleMode::LabelOnly,
            ModeArg::TreeId => OracleMode::TreeId,
        }
    }
}

static SHUTDOWN: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_: libc::c_int) {
    SHUTDOWN.store(true, Ordering::SeqCst);
}

fn install_shutdown_handler() {
    let handler: extern "C" fn(libc::c_int) = on_signal;
    // SAFETY: the handler only stores to an atomic, which is signal-safe
    unsafe {
        libc::signal(libc::SIGINT, handler as libc::sighandler_t);
        libc::signal(libc::SIGTERM, handler as libc::sighandler_t);
    }
}

fn cmd_serve_oracle(a: ServeOracleArgs) -> Result<()> {
    let doc = load_model(&a.model)?;
    let oracle = make_oracle(
        doc.model,
        OracleConfig {
            mode: a.mode.into(),
            budget: a.budget,
            noise_sigma: a.noise_sigma,
            confidence_decimals: a.decimals,
            seed: a.seed,
        },
    )?;
    let server = serve(oracle, &format!("127.0.0.1:{}", a.port))?;
    // the bound address goes to stdout so wrappers can pick up port 0
    println!("{}", server.addr());
    install_shutdown_handler();
    logging::info("serving; stop with ctrl-c");
    while !SHUTDOWN.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    let oracle = server.stop()?;
    logging::info(&format!(
        "stopped after {} accepted / {} logged queries",
        oracle.accepted(),
        oracle.log().len()
    ));
    Ok(())
}

// ---------------------------------------------------------------- extract

#[derive(Args, Serialize)]
struct ExtractArgs {
    #[arg(long, value_enum)]
    attack: AttackArg,
    /// `inproc:<model.json>` or `net:<host:port>`.
    #[arg(long)]
    oracle: String,
    /// Query allowance handed to the attack.
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature count; required for net oracles, inferred in-process.
    #[arg(long)]
    dims: Option<usize>,
    /// Class count; required for net oracles with the mlr or mlp attack.
    #[arg(long)]
    classes: Option<usize>,
    /// Hidden-width guess (mlp attack only).
    #[arg(long, default_value_t = 8)]
    hidden: usize,
    /// Threshold-localization precision (tree and lowd-meek attacks).
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Model file to score the clone against. Defaults to the in-process
    /// target; over the network the scores read 0 unless this is given.
    #[arg(long)]
    eval_model: Option<PathBuf>,
    /// Positive lowd-meek witness, comma-separated; probed for if omitted.
    #[arg(long)]
    x_pos: Option<String>,
    /// Negative lowd-meek witness, comma-separated; probed for if omitted.
    #[arg(long)]
    x_neg: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AttackArg {
    Blr,
    Mlr,
    Mlp,
    Tree,
    LowdMeek,
}

impl AttackArg {
    fn name(self) -> &'static str {
        match self {
            AttackArg::Blr => "blr",
            AttackArg::Mlr => "mlr",
            AttackArg::Mlp => "mlp",
            AttackArg::Tree => "tree",
            AttackArg::LowdMeek => "lowd-meek",
        }
    }

    /// The response mode this attack needs from the oracle.
    fn mode(self) -> OracleMode {
        match self {
            AttackArg::Blr | AttackArg::Mlr | AttackArg::Mlp => OracleMode::Confidence,
            AttackArg::Tree => OracleMode::TreeId,
            AttackArg::LowdMeek => OracleMode::LabelOnly,
        }
    }
}

enum OracleRef {
    Inproc(PathBuf),
    Net(SocketAddr),
}

fn parse_oracle_ref(s: &str) -> Result<OracleRef> {
    match s.split_once(':') {
        Some(("inproc", path)) if !path.is_empty() => Ok(OracleRef::Inproc(PathBuf::from(path))),
        Some(("net", addr)) => addr
            .to_socket_addrs()?
            .next()
            .map(OracleRef::Net)
            .ok_or_else(|| Error::InvalidArgument(format!("{addr} resolves to no address"))),
        _ => Err(Error::InvalidArgument(format!(
            "oracle must be inproc:<model.json> or net:<host:port>, got {s}"
        ))),
    }
}

/// Either endpoint behind one oracle handle, so every attack runs unchanged.
enum EndOracle {
    Inproc(Box<Oracle>),
    Net(WireClient),
}

impl QueryOracle for EndOracle {
    fn query(&mut self, x: &[f64], source: &str) -> Result<OracleResponse> {
        match self {
            EndOracle::Inproc(o) => o.query(x, source),
            EndOracle::Net(c) => c.query(x, source),
        }
    }

    fn query_partial(
        &mut self,
        px: &killchain_core::PartialFeatureVector,
        source: &str,
    ) -> Result<OracleResponse> {
        match self {
            EndOracle::Inproc(o) => o.query_partial(px, source),
            EndOracle::Net(c) => c.query_partial(px, source),
        }
    }

    fn accepted(&self) -> u64 {
        match self {
            EndOracle::Inproc(o) => o.accepted(),
            EndOracle::Net(c) => c.accepted(),
        }
    }
}

fn parse_coords(s: &str, d: usize) -> Result<Vec<f64>> {
    let coords: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad coordinate in {s}: {e}")))?;
    if coords.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: coords.len(),
        });
    }
    Ok(coords)
}

/// Use the given witnesses, or probe seeded uniform points for one of each
/// label. Probes are metered like any other query.
fn witness_pair(
    a: &ExtractArgs,
    oracle: &mut EndOracle,
    d: usize,
    notes: &mut Vec<String>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match (&a.x_pos, &a.x_neg) {
        (Some(p), Some(n)) => return Ok((parse_coords(p, d)?, parse_coords(n, d)?)),
        (None, None) => {}
        _ => {
            return Err(Error::InvalidArgument(
                "provide both --x-pos and --x-neg, or neither".into(),
            ))
        }
    }
    let mut pos = None;
    let mut neg = None;
    let mut probes = 0u64;
    for x in uniform_points(sub_seed(a.seed, 5), WITNESS_PROBES, d) {
        let label = oracle
            .query(&x, "lowd-meek")?
            .label()
            .ok_or(Error::WrongMode)?;
        probes += 1;
        if label == 1 && pos.is_none() {
            pos = Some(x);
        } else if label == 0 && neg.is_none() {
            neg = Some(x);
        }
        if pos.is_some() && neg.is_some() {
            break;
        }
    }
    notes.push(format!("witnesses probed for: {probes} label queries"));
    match (pos, neg) {
        (Some(p), Some(n)) => Ok((p, n)),
        (p, _) => Err(Error::InvalidArgument(format!(
            "no {} witness among {WITNESS_PROBES} uniform probes; pass --x-pos/--x-neg",
            if p.is_none() { "positive" } else { "negative" }
        ))),
    }
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let mut manifest = RunManifest::new("extract", &a)?;
    manifest.seed("master", a.seed);
    for (name, salt) in [
        ("oracle", 1),
        ("eval_points", 2),
        ("eval_unif", 3),
        ("attack", 4),
        ("witness_probe", 5),
    ] {
        manifest.seed(name, sub_seed(a.seed, salt));
    }
    let mut cli_notes: Vec<String> = Vec::new();

    let (mut oracle, target) = match parse_oracle_ref(&a.oracle)? {
        OracleRef::Inproc(path) => {
            manifest.input(&path)?;
            let model = load_model(&path)?.model;
            let cfg = OracleConfig {
                mode: a.attack.mode(),
                budget: 0,
                noise_sigma: 0.0,
                confidence_decimals: -1,
                seed: sub_seed(a.seed, 1),
            };
            let oracle = make_oracle(model.clone(), cfg)?;
            (EndOracle::Inproc(Box::new(oracle)), Some(model))
        }
        OracleRef::Net(addr) => {
            logging::debug(&format!("connecting to {addr}"));
            (EndOracle::Net(WireClient::connect(&addr)?), None)
        }
    };

    let d = match (a.dims, &target) {
        (Some(d), _) => d,
        (None, Some(m)) => m.dim(),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "--dims is required for net oracles".into(),
            ))
        }
    };
    let class_count = |target: &Option<TargetModel>| -> Result<usize> {
        match (a.classes, target) {
            (Some(c), _) => Ok(c),
            (None, Some(m)) => Ok(m.class_count()),
            (None, None) => Err(Error::InvalidArgument(
                "--classes is required for net oracles".into(),
            )),
        }
    };

    let scoring = match (&a.eval_model, &target) {
        (Some(p), _) => {
            manifest.input(p)?;
            Some(load_model(p)?.model)
        }
        (None, Some(m)) => Some(m.clone()),
        (None, None) => None,
    };
    let eval = match &scoring {
        Some(m) => FidelityEval::vs_model(
            m,
            uniform_points(sub_seed(a.seed, 2), EVAL_POINTS, d),
            EVAL_POINTS,
            sub_seed(a.seed, 3),
        ),
        None => {
            cli_notes.push("no scoring basis over the network; r_test and r_unif read 0".into());
            FidelityEval::skip()
        }
    };

    let attack_seed = sub_seed(a.seed, 4);
    let mut hyperplane: Option<HyperplaneEstimate> = None;
    let result = match a.attack {
        AttackArg::Blr => extract_blr(&mut oracle, d, a.budget, attack_seed, &eval)?,
        AttackArg::Mlr => extract_mlr(
            &mut oracle,
            d,
            class_count(&target)?,
            a.budget,
            &MlrHyper {
                seed: attack_seed,
                ..MlrHyper::default()
            },
            &eval,
        )?,
        AttackArg::Mlp => extract_mlp(
            &mut oracle,
            d,
            class_count(&target)?,
            a.hidden,
            a.budget,
            &MlpHyper {
                hidden: a.hidden,
                seed: attack_seed,
                ..MlpHyper::default()
            },
            &eval,
        )?,
        AttackArg::Tree => {
            cli_notes.push("the tree attack probes until the structure is pinned; --budget is not consulted".into());
            extract_tree(&mut oracle, &vec![FeatureDomain::Continuous; d], a.eps, &eval)?
        }
        AttackArg::LowdMeek => {
            let (x_pos, x_neg) = witness_pair(&a, &mut oracle, d, &mut cli_notes)?;
            let (estimate, result) = lowd_meek(&mut oracle, &x_pos, &x_neg, a.eps, &eval)?;
            hyperplane = Some(estimate);
            result
        }
    };

    let mut notes = result.notes.clone();
    notes.extend(cli_notes);
    let doc = ExtractionDoc {
        attack: a.attack.name().into(),
        queries_used: result.queries_used,
        r_test: result.r_test,
        r_unif: result.r_unif,
        transcript_len: result.transcript.len(),
        transcript_sha256: sha256_hex(serde_json::to_string(&result.transcript)?.as_bytes()),
        hyperplane,
        notes,
        clone: result.clone,
    };
    write_json_file(&doc, &a.out)?;
    logging::info(&format!(
        "{}: {} queries, 1 - r_test {:.6}, 1 - r_unif {:.6}, wrote {}",
        doc.attack,
        doc.queries_used,
        1.0 - doc.r_test,
        1.0 - doc.r_unif,
        a.out.display()
    ));
    manifest.output(&a.out)?;
    manifest.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------- invert

#[derive(Args, Serialize)]
struct InvertArgs {
    /// Saved model (typically an extracted clone) to invert offline.
    #[arg(long)]
    model: PathBuf,
    /// Class whose confidence is maximized.
    #[arg(long)]
    class: usize,
    /// Grid points per axis.
    #[arg(long, default_value_t = 33)]
    grid: usize,
    /// Coordinate-ascent passes.
    #[arg(long, default_value_t = 10)]
    passes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("step,confidence\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v:.8e}\n"));
    }
    out
}

fn cmd_invert(a: InvertArgs) -> Result<()> {
    let doc = load_model(&a.model)?;
    let result = inversion_against_clone(&doc.model, a.class, a.grid, a.passes, a.seed)?;
    write_json_file(&result, &a.out)?;
    let trace_path = a.out.with_extension("trace.csv");
    fs::write(&trace_path, trace_csv(&result.trace))?;
    logging::info(&format!(
        "class {}: confidence {:.6} after {} passes, wrote {} and {}",
        a.class,
        result.achieved_confidence,
        result.passes,
        a.out.display(),
        trace_path.display()
    ));
    let mut m = RunManifest::new("invert", &a)?;
    m.seed("master", a.seed);
    m.input(&a.model)?;
    m.output(&a.out)?;
    m.output(&trace_path)?;
    m.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------- campaign

#[derive(Args, Serialize)]
struct CampaignArgs {
    /// Scenario file: campaign keys at the top level, plus [target].
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn drift_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,drift\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v:.8e}\n"));
    }
    out
}

fn record_campaign_seeds(m: &mut RunManifest, report: &CampaignReport) {
    let s = &report.seeds;
    m.seed("master", s.master);
    m.seed("oracle", s.oracle);
    m.seed("recon", s.recon);
    m.seed("weaponization", s.weaponization);
    m.seed("exploitation", s.exploitation);
    m.seed("installation", s.installation);
    m.seed("fidelity", s.fidelity);
    m.seed("drift", s.drift);
}

fn cmd_campaign(a: CampaignArgs) -> Result<()> {
    let scenario: Scenario = load_scenario(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("")).to_path_buf();
    let defender = scenario.target.build(&base)?;
    let report = run_campaign(&scenario.campaign, defender)?;

    write_json_file(&report, &a.out)?;
    let drift_path = a.out.with_extension("drift.csv");
    fs::write(&drift_path, drift_csv(&report.drift_trace))?;
    logging::info(&format!(
        "{:?} after {:?}: {} queries, {} alerts, wrote {} and {}",
        report.outcome,
        report.final_phase,
        report.total_queries,
        report.alerts.len(),
        a.out.display(),
        drift_path.display()
    ));

    let mut m = RunManifest::new("campaign", &scenario)?;
    record_campaign_seeds(&mut m, &report);
    m.input(&a.config)?;
    m.input(&resolve(&base, &scenario.target.data))?;
    if let Some(model) = &scenario.target.model {
        m.input(&resolve(&base, model))?;
    }
    m.output(&a.out)?;
    m.output(&drift_path)?;
    m.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Args, Serialize)]
struct ReportArgs {
    /// Result file to render (extraction, campaign, or inversion output).
    #[arg(long = "in")]
    input: PathBuf,
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let doc = sniff_result(&fs::read_to_string(&a.input)?)?;
    print!("{}", render(&doc));
    Ok(())
}

// ---------------------------------------------------------------- sweep

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_enum)]
    attack: SweepAttackArg,
    #[arg(long, default_value_t = 5)]
    dims: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Hidden width of mlp targets and clones.
    #[arg(long, default_value_t = 8)]
    hidden: usize,
    /// Comma-separated query budgets, one output row each, in this order.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SweepAttackArg {
    Blr,
    Mlr,
    Mlp,
}

impl From<SweepAttackArg> for SweepAttack {
    fn from(a: SweepAttackArg) -> SweepAttack {
        match a {
            SweepAttackArg::Blr => SweepAttack::Blr,
            SweepAttackArg::Mlr => SweepAttack::Mlr,
            SweepAttackArg::Mlp => SweepAttack::Mlp,
        }
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        attack: a.attack.into(),
        d: a.dims,
        c: a.classes,
        hidden: a.hidden,
    };
    let rows = budget_sweep(&spec, &a.budgets, a.trials, a.seed)?;
    fs::write(&a.out, sweep_to_csv(&rows))?;
    logging::info(&format!(
        "{} budgets x {} trials, wrote {}",
        a.budgets.len(),
        a.trials,
        a.out.display()
    ));
    let mut m = RunManifest::new("sweep", &a)?;
    m.seed("master", a.seed);
    m.output(&a.out)?;
    m.write_beside(&a.out)?;
    Ok(())
}
