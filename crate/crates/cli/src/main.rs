//! `ergopt`: command-line front end.
//!
//! Every command prints one JSON document (to stdout or `--out`). Exit
//! status is 0 on success, 1 on invalid input or a failed computation, and
//! 2 when the computation ran but a certificate failed.

mod output;
mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergopt::adapt::{adapt_report, AdaptConfig, Preconditioning};
use ergopt::birkhoff::{alpha_bracket, beta_bracket, upper_envelope, AlphaBracket, BetaBracket};
use ergopt::cocycle::{domination_report, jsr_bracket, spectrum_approx, subradius_bracket, DEFAULT_DOMINATION_DEPTHS, DEFAULT_KAPPA};
use ergopt::props::run_suites;
use ergopt::rotation::{default_directions, fish_approx_with, homoclinic_sum, rotation_approx, ConvexApprox, FISH_DIRECTIONS};
use ergopt::{Cocycle, Observable, OneStepCocycle, SymbolicSystem, ThetaSet, VectorObservable, Word};
use serde::Serialize;

use crate::svg::{angular_order, chamber_point, convex_hull, render_svg, P2};

#[derive(Parser)]
#[command(name = "ergopt", version, about = "Ergodic optimization of Birkhoff averages and Lyapunov exponents")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    top: Top,
}

#[derive(Args)]
struct Common {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also render a picture.
    #[arg(long, global = true, value_name = "FILE")]
    svg: Option<PathBuf>,
    /// Sequential reduction order (one worker).
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Top {
    #[command(flatten)]
    Direct(Command),
    /// Same commands, spelled `run <command>`.
    Run {
        #[command(subcommand)]
        command: Command,
    },
}

#[derive(Subcommand)]
enum Command {
    /// Bracket the maximal and minimal ergodic averages of an observable.
    Birkhoff(BirkhoffArgs),
    /// Inner hull and outer envelope of a rotation set.
    Rotation(RotationArgs),
    /// Rotation set of the circle inclusion under the doubling map.
    Fish(FishArgs),
    /// Joint spectral radius and subradius brackets.
    Jsr(JsrArgs),
    /// Domination verdicts and Lyapunov/Morse spectrum envelopes.
    Morse(MorseArgs),
    /// Adapted metric by recursive midpoints, with its certificates.
    Adapt(AdaptArgs),
    /// Partial homoclinic sum certifying a nonzero obstruction.
    Homoclinic(HomoclinicArgs),
    /// Seeded matrix-geometry property suites.
    Props(PropsArgs),
}

#[derive(Args)]
struct BirkhoffArgs {
    /// Built-in name or JSON table file.
    #[arg(long, default_value = "cos_angle", value_name = "NAME|FILE")]
    observable: String,
    /// Alphabet of the full shift for built-in symbolic observables.
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    #[arg(long, default_value_t = 8)]
    max_period: usize,
    #[arg(long, default_value_t = 12)]
    depth: usize,
}

#[derive(Args)]
struct RotationArgs {
    /// Comma-separated components, each a built-in name or JSON table file.
    #[arg(long, default_value = "cos_angle,sin_angle", value_name = "LIST")]
    observable: String,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    #[arg(long, default_value_t = 8)]
    max_period: usize,
    #[arg(long, default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = 64)]
    directions: usize,
    /// CSV table of vertices and support samples.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FishArgs {
    #[arg(long, default_value_t = 8)]
    max_period: usize,
    #[arg(long, default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = FISH_DIRECTIONS)]
    directions: usize,
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct JsrArgs {
    /// Cocycle JSON: {"dim", "matrices", "forbidden"}.
    #[arg(long, value_name = "FILE")]
    cocycle: PathBuf,
    #[arg(long, default_value_t = 12)]
    depth: usize,
}

#[derive(Args)]
struct MorseArgs {
    #[arg(long, value_name = "FILE")]
    cocycle: PathBuf,
    #[arg(long, default_value_t = 8)]
    max_period: usize,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long, default_value_t = 64)]
    directions: usize,
    /// Non-domination indices (comma-separated, may be empty); defaults to
    /// the indices without a domination verdict.
    #[arg(long, value_name = "LIST")]
    theta: Option<String>,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long, value_name = "FILE")]
    cocycle: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Seed for the sampled certificate words.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Inclusion tolerance; defaults to the envelope gap at depth N.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 64)]
    directions: usize,
    /// Start from the per-window orthogonalizing metric over windows of
    /// this length (d = 2 only); 0 starts from the identity.
    #[arg(long, default_value_t = 0, value_name = "L")]
    precondition: usize,
}

#[derive(Args)]
struct HomoclinicArgs {
    #[arg(long, default_value_t = 30)]
    terms: usize,
}

#[derive(Args)]
struct PropsArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
}

/// Why a run did not succeed.
#[derive(Debug)]
enum Failure {
    Input(String),
    Certificate(String),
}

impl From<ergopt::Error> for Failure {
    fn from(e: ergopt::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

/// JSON result plus an optional picture and the names of failed certificates.
struct Outcome {
    json: String,
    picture: Option<(Vec<P2>, Vec<P2>)>,
    csv: Option<(PathBuf, String)>,
    failed: Vec<String>,
}

impl Outcome {
    fn new<T: Serialize>(value: &T) -> Result<Self, Failure> {
        Ok(Outcome { json: output::to_json(value).map_err(|e| Failure::Input(e.to_string()))?, picture: None, csv: None, failed: vec![] })
    }

    fn check(mut self, ok: bool, name: &str) -> Self {
        if !ok {
            self.failed.push(name.to_string());
        }
        self
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Certificate(msg)) => {
            eprintln!("certificate failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let workers = if cli.common.deterministic { Some(1) } else { cli.common.workers };
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }
    let command = match cli.top {
        Top::Direct(c) | Top::Run { command: c } => c,
    };
    let wants_svg = cli.common.svg.is_some();
    let outcome = match command {
        Command::Birkhoff(a) => birkhoff(a, wants_svg)?,
        Command::Rotation(a) => rotation(a)?,
        Command::Fish(a) => fish(a)?,
        Command::Jsr(a) => jsr(a)?,
        Command::Morse(a) => morse(a)?,
        Command::Adapt(a) => adapt(a)?,
        Command::Homoclinic(a) => homoclinic(a)?,
        Command::Props(a) => props(a)?,
    };
    match &cli.common.out {
        Some(path) => write(path, &outcome.json)?,
        None => print!("{}", outcome.json),
    }
    if let Some((path, text)) = &outcome.csv {
        write(path, text)?;
    }
    if let Some(path) = &cli.common.svg {
        let (points, hull) = outcome.picture.clone().ok_or_else(|| Failure::Input("this command has no picture for its input".into()))?;
        write(path, &render_svg(&points, &hull))?;
    }
    if outcome.failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Certificate(outcome.failed.join(", ")))
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_cocycle(path: &Path) -> Result<OneStepCocycle, Failure> {
    Ok(OneStepCocycle::from_json(&read(path)?)?)
}

/// JSON table file: `{"alphabet": k, "forbidden": [[i, j], …], "values": {"01": 0.5, …}}`.
#[derive(serde::Deserialize)]
struct TableFile {
    alphabet: usize,
    #[serde(default)]
    forbidden: Vec<[usize; 2]>,
    values: BTreeMap<String, f64>,
}

fn load_observable(spec: &str, alphabet: usize) -> Result<Observable, Failure> {
    let path = Path::new(spec);
    if !path.is_file() {
        return Ok(Observable::builtin(spec, &SymbolicSystem::full_shift(alphabet)?)?);
    }
    let t: TableFile = serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{spec}: {e}")))?;
    let system = SymbolicSystem::sft(t.alphabet, &t.forbidden)?;
    let values = t.values.iter().map(|(w, &v)| Ok((Word::parse(w)?, v))).collect::<ergopt::Result<BTreeMap<_, _>>>()?;
    Ok(Observable::table(&system, &values)?)
}

#[derive(Serialize)]
struct BirkhoffOut {
    beta: BetaBracket,
    alpha: AlphaBracket,
}

fn birkhoff(a: BirkhoffArgs, wants_svg: bool) -> Result<Outcome, Failure> {
    let f = load_observable(&a.observable, a.alphabet)?;
    let beta = beta_bracket(&f, a.max_period, a.depth)?;
    let alpha = alpha_bracket(&f, a.max_period, a.depth)?;
    let ok_beta = beta.lower <= beta.upper + 1e-9;
    let ok_alpha = alpha.lower <= alpha.upper + 1e-9;
    let mut out = Outcome::new(&BirkhoffOut { beta, alpha })?.check(ok_beta, "beta bracket").check(ok_alpha, "alpha bracket");
    if wants_svg {
        // Envelope convergence: (n, (1/n) sup f^(n)).
        let pts = (1..=a.depth).map(|n| Ok([n as f64, upper_envelope(&f, n)?])).collect::<ergopt::Result<Vec<P2>>>()?;
        out.picture = Some((pts, vec![]));
    }
    Ok(out)
}

fn rotation_outcome(approx: &ConvexApprox, csv: Option<PathBuf>) -> Result<Outcome, Failure> {
    let mut out = Outcome::new(approx)?.check(approx.containment_slack() >= -1e-9, "inner hull inside outer envelope");
    if approx.dim == 2 {
        let pts: Vec<P2> = approx.inner.iter().map(|v| [v.point[0], v.point[1]]).collect();
        out.picture = Some((pts.clone(), angular_order(&pts)));
    }
    out.csv = csv.map(|p| (p, approx.to_csv()));
    Ok(out)
}

fn rotation(a: RotationArgs) -> Result<Outcome, Failure> {
    let parts = a.observable.split(',').map(|s| load_observable(s.trim(), a.alphabet)).collect::<Result<Vec<_>, _>>()?;
    let f = VectorObservable::new(parts)?;
    let approx = rotation_approx(&f, a.max_period, a.depth, &default_directions(f.dim(), a.directions)?)?;
    rotation_outcome(&approx, a.csv)
}

fn fish(a: FishArgs) -> Result<Outcome, Failure> {
    let approx = fish_approx_with(a.max_period, a.depth, a.directions)?;
    let sturmian = approx.inner.iter().all(|v| v.sturmian == Some(true));
    Ok(rotation_outcome(&approx, a.csv)?.check(sturmian, "Sturmian extreme points"))
}

#[derive(Serialize)]
struct JsrOut {
    lower: f64,
    upper: f64,
    witness: ergopt::Necklace,
    upper_length: usize,
    depth: usize,
    subradius: ergopt::cocycle::SubradiusBracket,
}

fn jsr(a: JsrArgs) -> Result<Outcome, Failure> {
    let f = load_cocycle(&a.cocycle)?;
    let b = jsr_bracket(&f, a.depth)?;
    let s = subradius_bracket(&f, a.depth)?;
    let ok = b.lower <= b.upper * (1.0 + 1e-12) && s.lower <= s.upper * (1.0 + 1e-12);
    let out = JsrOut { lower: b.lower, upper: b.upper, witness: b.witness, upper_length: b.upper_length, depth: b.depth, subradius: s };
    Ok(Outcome::new(&out)?.check(ok, "bracket order"))
}

fn parse_theta(dim: usize, text: &str) -> Result<ThetaSet, Failure> {
    let idx = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| Failure::Input(format!("theta entry {s:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ThetaSet::new(dim, idx)?)
}

#[derive(Serialize)]
struct MorseOut {
    domination: ergopt::cocycle::DominationReport,
    spectrum: ergopt::cocycle::SpectrumApprox,
}

fn morse(a: MorseArgs) -> Result<Outcome, Failure> {
    let f = load_cocycle(&a.cocycle)?;
    let depths: Vec<usize> = DEFAULT_DOMINATION_DEPTHS.iter().copied().filter(|&n| n <= a.depth.max(4)).collect();
    let domination = domination_report(&f, &depths, DEFAULT_KAPPA)?;
    let theta = match &a.theta {
        Some(t) => parse_theta(f.dim(), t)?,
        None => domination.theta.clone(),
    };
    let spectrum = spectrum_approx(&f, a.max_period, a.depth, &theta, &default_directions(f.dim(), a.directions)?)?;
    let inside = spectrum.lplus_slack() >= -1e-6;
    let ordered = spectrum.inner.iter().zip(&spectrum.outer).all(|(i, o)| i.bound <= o.bound + 1e-9);
    let pts: Option<Vec<P2>> = spectrum.lplus.iter().map(|(v, _)| chamber_point(v.as_slice())).collect();
    let mut out = Outcome::new(&MorseOut { domination, spectrum })?.check(inside, "periodic vectors inside outer envelope").check(ordered, "inner below outer");
    out.picture = pts.map(|p| {
        let hull = convex_hull(&p);
        (p, hull)
    });
    Ok(out)
}

fn adapt(a: AdaptArgs) -> Result<Outcome, Failure> {
    let f = load_cocycle(&a.cocycle)?;
    let preconditioning = match a.precondition {
        0 => Preconditioning::None,
        window => Preconditioning::Orthogonal { window },
    };
    let cfg = AdaptConfig { k: a.k, samples: a.samples, seed: a.seed, epsilon: a.epsilon, directions: a.directions, preconditioning };
    let rep = adapt_report(&f, &cfg)?;
    let pts: Option<Vec<P2>> = rep.sigma1_g.iter().map(|v| chamber_point(v.as_slice())).collect();
    let oba = rep.oba_worst_slack >= -ergopt::adapt::OBA_TOL;
    let tel = rep.telescoping_worst_slack.iter().all(|&s| s >= -ergopt::adapt::OBA_TOL);
    let gaps = rep.one_step_gaps.values().all(|g| g.positive);
    let mut out = Outcome::new(&rep)?
        .check(oba, "oba slack")
        .check(tel, "telescoping slack")
        .check(rep.inclusion.pass, "inclusion")
        .check(gaps, "one-step domination");
    out.picture = pts.map(|p| {
        let hull = convex_hull(&p);
        (p, hull)
    });
    Ok(out)
}

fn homoclinic(a: HomoclinicArgs) -> Result<Outcome, Failure> {
    let c = homoclinic_sum(a.terms)?;
    Ok(Outcome::new(&c)?.check(c.nonzero, "nonzero homoclinic sum"))
}

fn props(a: PropsArgs) -> Result<Outcome, Failure> {
    let r = run_suites(a.seed, a.cases)?;
    let mut out = Outcome::new(&r)?;
    out.failed = r.suites.iter().filter(|s| !s.pass).map(|s| s.name.clone()).collect();
    Ok(out)
}
