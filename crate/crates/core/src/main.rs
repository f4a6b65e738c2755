use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dirhilbert::beta::{carleson_sup, random_lipschitz_graph, SampledGraph};
use dirhilbert::directional::{estimate_norm, random_field, DirectionalOperator, HilbertOp, LinearOperator};
use dirhilbert::family::{DirectionField, FamilySpec, LipschitzFamily};
use dirhilbert::frequency::lp_project;
use dirhilbert::kakeya::{counting_check, maximal_norm_estimate, random_counting_family, CandidateSet, KakeyaField};
use dirhilbert::knapp::{run_knapp, KnappConfig};
use dirhilbert::splitting::{commutator_decay_experiment, DecayConfig, Splitting};
use dirhilbert::tiles::{envelope_fit, vanishing_check, write_coefficients_csv, DirectionInterval, PacketBank, Tile};
use dirhilbert::{Error, Result, SampledField, TorusGrid};

#[derive(Parser)]
#[command(name = "dirhilbert", about = "Experiments with directional Hilbert transforms along Lipschitz curve families")]
struct Cli {
    #[command(flatten)]
    common: CommonFlags,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// Grid size per axis, a power of two.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// `identity`, `sinusoidal`, `shear`, or a JSON family spec.
    #[arg(long, global = true)]
    family: Option<String>,
    /// `zero`, `sin`, `step`, or a JSON direction field.
    #[arg(long, global = true)]
    u: Option<String>,
    /// Lipschitz constant of the family shorthands.
    #[arg(long, global = true)]
    b0: Option<f64>,
    /// Sets the amplitude of the `sin` and `step` shorthands to `c0 / b0`.
    #[arg(long, global = true)]
    c0: Option<f64>,
    /// Scale band `lo,hi`.
    #[arg(long, global = true, value_parser = parse_band)]
    band: Option<(i64, i64)>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; reports go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config whose keys override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Norms of H_v, H_v P_k, the main term and the commutator.
    NormSurvey,
    /// Decay of the commutator norms in l.
    Decay,
    /// The Knapp example on a plane patch.
    Knapp,
    /// Carleson sums of beta numbers over random Lipschitz graphs.
    BetaCarleson,
    /// Kakeya counting over random rectangle families.
    KakeyaCount,
    /// Wave packet checks for one tile bank.
    TilesCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::NormSurvey => "norm-survey",
            Command::Decay => "decay",
            Command::Knapp => "knapp",
            Command::BetaCarleson => "beta-carleson",
            Command::KakeyaCount => "kakeya-count",
            Command::TilesCheck => "tiles-check",
        }
    }
}

fn parse_band(s: &str) -> std::result::Result<(i64, i64), String> {
    let (a, b) = s.split_once(',').ok_or("band must be lo,hi")?;
    let lo = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct ExperimentConfig {
    n: usize,
    family: FamilySpec,
    u: DirectionField,
    band: (i64, i64),
    seed: u64,
    trials: usize,
    iterations: usize,
    knapp: KnappConfig,
    beta: BetaConfig,
    kakeya: KakeyaConfig,
    tiles: TilesConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 64,
            family: FamilySpec::Identity,
            u: DirectionField::zero(),
            band: (2, 4),
            seed: 0,
            trials: 2,
            iterations: 6,
            knapp: KnappConfig::default(),
            beta: BetaConfig::default(),
            kakeya: KakeyaConfig::default(),
            tiles: TilesConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct BetaConfig {
    graphs: usize,
    samples: usize,
    lip: f64,
    terms: usize,
    j0s: Vec<u32>,
}

impl Default for BetaConfig {
    fn default() -> Self {
        Self { graphs: 10, samples: 512, lip: 1.0, terms: 8, j0s: vec![1, 2, 4] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct KakeyaConfig {
    families: usize,
    delta: f64,
    lambda: f64,
    p: f64,
    width: f64,
    c: f64,
    attempts: usize,
}

impl Default for KakeyaConfig {
    fn default() -> Self {
        Self { families: 10, delta: 0.5, lambda: 0.5, p: 2.0, width: 1.0 / 32.0, c: 3.0, attempts: 400 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct TilesConfig {
    k: i64,
    l: u32,
    /// Direction interval containing this slope.
    slope: f64,
    pairs: usize,
}

impl Default for TilesConfig {
    fn default() -> Self {
        Self { k: 3, l: 1, slope: 0.3, pairs: 20 }
    }
}

fn shorthand_field(s: &str, amp: f64) -> Result<DirectionField> {
    match s {
        "zero" => Ok(DirectionField::zero()),
        "sin" => Ok(DirectionField::Sinusoidal { amp, freq: 1.0, phase: 0.0 }),
        "step" => Ok(DirectionField::Step { breaks: vec![0.0, 0.25, 0.5, 0.75], values: vec![amp, -amp, 0.5 * amp, 0.0] }),
        other => serde_json::from_str(other).map_err(|e| Error::Parse(format!("--u: {e}"))),
    }
}

fn shorthand_family(s: &str, b0: f64) -> Result<FamilySpec> {
    match s {
        "identity" => Ok(FamilySpec::Identity),
        "sinusoidal" => Ok(FamilySpec::Sinusoidal { b0, fx: 1.0, fy: 1.0 }),
        "shear" => Ok(FamilySpec::Shear { slope: b0 }),
        other => serde_json::from_str(other).map_err(|e| Error::Parse(format!("--family: {e}"))),
    }
}

fn build_config(flags: &CommonFlags) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let b0 = flags.b0.unwrap_or(0.01);
    let amp = flags.c0.map_or(0.05, |c0| c0 / b0);
    if let Some(n) = flags.n {
        cfg.n = n;
    }
    if let Some(f) = &flags.family {
        cfg.family = shorthand_family(f, b0)?;
    }
    if let Some(u) = &flags.u {
        cfg.u = shorthand_field(u, amp)?;
    }
    if let Some(b) = flags.band {
        cfg.band = b;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(path) = &flags.config {
        let text = fs::read_to_string(path)?;
        let over: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut base = serde_json::to_value(&cfg).map_err(|e| Error::Parse(e.to_string()))?;
        merge(&mut base, over);
        cfg = serde_json::from_value(base).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    }
    cfg.u.validate()?;
    LipschitzFamily::from_spec(&cfg.family)?;
    TorusGrid::new(cfg.n)?;
    if cfg.band.0 > cfg.band.1 {
        return Err(Error::Config(format!("empty band {:?}", cfg.band)));
    }
    Ok(cfg)
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // tagged enums are replaced whole
                    Some(slot) if slot.is_object() && v.is_object() && v.get("kind").is_none() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// A report, whether its checks passed, and optional CSV curves.
struct Outcome {
    report: Value,
    passed: bool,
    csv: Option<String>,
}

/// `H_v P_k`; `P_k` has a real symbol, so its adjoint is itself.
struct ProjectedHilbert<'a> {
    op: &'a DirectionalOperator,
    k: i64,
}

impl LinearOperator for ProjectedHilbert<'_> {
    fn grid(&self) -> TorusGrid {
        self.op.grid()
    }
    fn apply(&self, f: &SampledField) -> Result<SampledField> {
        self.op.apply_hv(&lp_project(f, self.k)?)
    }
    fn apply_adjoint(&self, f: &SampledField) -> Result<SampledField> {
        lp_project(&self.op.apply_hv_adjoint(f)?, self.k)
    }
    fn name(&self) -> String {
        format!("H_v P_{}", self.k)
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{name}: {e}")))
}

fn norm_survey(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = TorusGrid::new(cfg.n)?;
    let family = LipschitzFamily::from_spec(&cfg.family)?;
    let op = stage("operator", DirectionalOperator::new(grid, &family, &cfg.u))?;
    let (trials, iters, seed) = (cfg.trials, cfg.iterations, cfg.seed);
    let hv = stage("H_v", estimate_norm(&HilbertOp(&op), trials, iters, seed))?;
    let split = stage("splitting", Splitting::new(grid, &family, &cfg.u, cfg.band))?;
    let mut rows = Vec::new();
    let mut csv = String::from("scale,projected,main,commutator\n");
    for k in cfg.band.0..=cfg.band.1 {
        let pk = stage("H_v P_k", estimate_norm(&ProjectedHilbert { op: &op, k }, trials, iters, seed))?.estimate;
        let main = stage("main term", estimate_norm(&split.main_operator(k), trials, iters, seed))?.estimate;
        let comm = stage("commutator", estimate_norm(&split.commutator_operator(k), trials, iters, seed))?.estimate;
        csv.push_str(&format!("{k},{pk:.17e},{main:.17e},{comm:.17e}\n"));
        rows.push(json!({ "scale": k, "projected": pk, "main": main, "commutator": comm }));
    }
    let finite = hv.estimate.is_finite() && rows.iter().all(|r| ["projected", "main", "commutator"].iter().all(|c| r[c].as_f64().is_some_and(f64::is_finite)));
    Ok(Outcome { report: json!({ "hilbert": hv, "scales": rows }), passed: finite, csv: Some(csv) })
}

fn decay(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = TorusGrid::new(cfg.n)?;
    let family = LipschitzFamily::from_spec(&cfg.family)?;
    let split = stage("splitting", Splitting::new(grid, &family, &cfg.u, cfg.band))?;
    let dc = DecayConfig { l_min: cfg.band.0, l_max: cfg.band.1, trials: cfg.trials, iterations: cfg.iterations, seed: cfg.seed };
    let rep = stage("decay", commutator_decay_experiment(&split, &dc))?;
    let trivial = family.is_identity();
    let passed = if trivial { rep.rows.iter().all(|r| r.1 <= 1e-6) } else { rep.gamma_hat > 0.0 };
    let mut csv = Vec::new();
    rep.write_csv(&mut csv)?;
    Ok(Outcome { report: serde_json::to_value(&rep).expect("report"), passed, csv: Some(String::from_utf8(csv).expect("utf8")) })
}

fn knapp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rep = stage("knapp", run_knapp(&cfg.knapp))?;
    let passed = match cfg.knapp.source {
        dirhilbert::knapp::KnappSource::Zero => rep.squared_norms.iter().all(|&s| s == 0.0),
        _ => (rep.fitted_power + 1.0).abs() <= 0.15 && rep.increments.iter().all(|&d| d > 0.0),
    };
    let mut csv = String::from("radius,squared_norm\n");
    for (r, s) in rep.radii.iter().zip(&rep.squared_norms) {
        csv.push_str(&format!("{r},{s:.17e}\n"));
    }
    Ok(Outcome { report: serde_json::to_value(&rep).expect("report"), passed, csv: Some(csv) })
}

/// Fits the constant on the first half of `vals` and checks the rest stays
/// within twice that.
fn held_out(vals: &[f64]) -> (f64, bool) {
    let half = vals.len().div_ceil(2);
    let c = vals[..half].iter().cloned().fold(0.0, f64::max);
    (c, vals.iter().all(|v| v.is_finite()) && vals[half..].iter().all(|&v| v <= 2.0 * c))
}

fn beta_carleson(cfg: &ExperimentConfig) -> Result<Outcome> {
    let b = &cfg.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graphs: Vec<SampledGraph> = (0..b.graphs.max(2)).map(|_| random_lipschitz_graph(b.samples, b.lip, b.terms, &mut rng)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut growth = Vec::new();
    let mut csv = String::from("graph,j0,carleson_sup\n");
    for (i, a) in graphs.iter().enumerate() {
        let base = carleson_sup(a, 0)?;
        csv.push_str(&format!("{i},0,{base:.17e}\n"));
        let mut per = vec![(0u32, base)];
        for &j0 in &b.j0s {
            let s = carleson_sup(a, j0)?;
            csv.push_str(&format!("{i},{j0},{s:.17e}\n"));
            per.push((j0, s));
            if j0 > 1 && base > 0.0 {
                growth.push(s / base / (j0 as f64).powi(3));
            }
        }
        rows.push(json!({ "graph": i, "lipschitz": a.lipschitz(), "sups": per }));
    }
    let (c, passed) = held_out(&growth);
    Ok(Outcome { report: json!({ "graphs": rows, "growth_constant": c }), passed, csv: Some(csv) })
}

fn kakeya_count(cfg: &ExperimentConfig) -> Result<Outcome> {
    let kc = &cfg.kakeya;
    let grid = TorusGrid::new(cfg.n)?;
    let family = LipschitzFamily::from_spec(&cfg.family)?;
    let kf = stage("kakeya field", KakeyaField::new(grid, &family, &cfg.u))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ratios = Vec::new();
    let mut rows = Vec::new();
    let mut csv = String::from("family,rectangles,lhs,rhs,ratio\n");
    for i in 0..kc.families.max(2) {
        let fam = random_counting_family(&kf, kc.delta, kc.lambda, kc.width, kc.c, kc.attempts, &mut rng);
        let rep = stage("counting", counting_check(&kf, &fam, kc.p))?;
        csv.push_str(&format!("{i},{},{:.17e},{:.17e},{:.17e}\n", fam.rects.len(), rep.lhs, rep.rhs, rep.ratio));
        rows.push(json!({ "family": i, "rectangles": fam.rects.len(), "report": rep }));
        ratios.push(rep.ratio);
    }
    let (c, mut passed) = held_out(&ratios);
    // maximal-operator norm against 1/delta
    let tests: Vec<SampledField> = (0..2).map(|_| random_field(grid, &mut rng)).collect();
    let mut scaling = Vec::new();
    for delta in [0.5, 0.25, 0.125] {
        let cands = CandidateSet::dyadic(kc.width, 3, 4);
        let m = stage("maximal", maximal_norm_estimate(&kf, &tests, delta, &cands))?;
        scaling.push(json!({ "delta": delta, "norm": m, "normalized": m * delta }));
    }
    passed &= scaling.iter().all(|s| s["norm"].as_f64().is_some_and(f64::is_finite));
    Ok(Outcome { report: json!({ "families": rows, "fitted_constant": c, "scaling": scaling }), passed, csv: Some(csv) })
}

fn tiles_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let tc = &cfg.tiles;
    let grid = TorusGrid::new(cfg.n)?;
    let omega = DirectionInterval::containing(tc.l, -tc.slope).ok_or_else(|| Error::Config(format!("slope {} outside [-2, 2)", tc.slope)))?;
    let bank = stage("packets", PacketBank::new(grid, tc.k, omega))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = random_field(grid, &mut rng);
    let bessel = bank.bessel_ratio(&f)?;
    let tiles: Vec<Tile> = bank.tiles().collect();
    let pairs: Vec<(Tile, Tile)> = (0..tc.pairs).map(|i| (tiles[0], tiles[(7 * i + 1) % tiles.len()])).collect();
    let (_, envelope) = envelope_fit(&bank, &pairs);
    let family = LipschitzFamily::from_spec(&cfg.family)?;
    let op = stage("operator", DirectionalOperator::new(grid, &family, &cfg.u))?;
    let van = stage("vanishing", vanishing_check(&bank, &tiles[0], &op))?;
    let mut csv = Vec::new();
    write_coefficients_csv(&bank.coefficients(&f)?, &mut csv)?;
    let passed = bessel.is_finite() && bessel <= 2.0 * bank.kappa() && envelope.is_finite();
    let report = json!({
        "kappa": bank.kappa(),
        "tiles": bank.tile_count(),
        "bessel_ratio": bessel,
        "envelope_constant": envelope,
        "vanishing": { "ratio": van.ratio, "excluded_points": van.excluded_points, "passes": van.passes },
    });
    Ok(Outcome { report, passed, csv: Some(String::from_utf8(csv).expect("utf8")) })
}

fn write_outputs(dir: Option<&Path>, name: &str, doc: &Value, csv: Option<&str>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| Error::Parse(e.to_string()))?;
    match dir {
        None => println!("{text}"),
        Some(d) => {
            fs::create_dir_all(d)?;
            fs::write(d.join(format!("{name}.json")), text)?;
            if let Some(c) = csv {
                fs::write(d.join(format!("{name}.csv")), c)?;
            }
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = build_config(&cli.common)?;
    let out = match cli.cmd {
        Command::NormSurvey => norm_survey(&cfg)?,
        Command::Decay => decay(&cfg)?,
        Command::Knapp => knapp(&cfg)?,
        Command::BetaCarleson => beta_carleson(&cfg)?,
        Command::KakeyaCount => kakeya_count(&cfg)?,
        Command::TilesCheck => tiles_check(&cfg)?,
    };
    let name = cli.cmd.name();
    let doc = json!({ "experiment": name, "config": cfg, "passed": out.passed, "report": out.report });
    write_outputs(cli.common.out.as_deref(), name, &doc, out.csv.as_deref())?;
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: check failed", cli.cmd.name());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("{}: {e}", cli.cmd.name());
            ExitCode::from(2)
        }
    }
}
