//! Command-line front end: argument parsing, parallel drivers, JSON reports
//! and CSV profiles on top of `matball-core`.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use matball_core::bsverify::{self, chamber_points};
use matball_core::cherednik::{dirac_chain_op, MDeltaFamily};
use matball_core::ggdist::{dirac_candidates, dirac_report, measure_dirac, gg_integral, DiracProbe, GGSpec};
use matball_core::jets::{bump, Bump};
use matball_core::quadrature::QuadratureSpec;
use matball_core::radon1::{self, Plane, RadialBump};
use matball_core::special::z_delta;
use matball_core::{domain_params, DomainParams, Error as CoreError, RootData, VerificationReport};

/// Exit code of a run whose checks all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit code of a run with at least one failed check.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for invalid parameters.
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Failed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            _ => EXIT_FAIL,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(_)
            | CoreError::Domain(_)
            | CoreError::Pole { .. }
            | CoreError::Divergent(_)
            | CoreError::OrderExceeded { .. } => CliError::Invalid(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "matball", version, about = "Verify Cherednik, Bernstein-Sato and Radon inversion identities")]
pub struct Cli {
    /// Write the payload here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Payload format; reports are always JSON.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Domain parameters and derived constants.
    Constants(DomainArgs),
    /// Run one verification and print its report.
    Verify {
        /// Replace the check's default tolerance.
        #[arg(long, global = true)]
        tolerance: Option<f64>,
        #[command(subcommand)]
        check: Check,
    },
    /// Garding-Gindikin integral of a bump.
    Gg(GgArgs),
    /// Rank-one spherical function profile.
    Spherical(SphericalArgs),
    /// Plane transform of a radial bump on H^3 as a function of the plane's distance.
    RadonSample(RadonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DomainArgs {
    #[arg(long)]
    pub a: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    #[arg(long)]
    pub rprime: u32,
}

#[derive(Args, Debug, Clone)]
pub struct RootArgs {
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Multiplicity 2b of the short roots.
    #[arg(long, default_value_t = 2.0)]
    pub b2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub iota: f64,
}

impl RootArgs {
    pub fn root_data(&self) -> CliResult<RootData> {
        Ok(RootData::new(self.rank, self.a, self.b2, self.iota)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct PointwiseArgs {
    #[command(flatten)]
    pub root: RootArgs,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub delta: f64,
    #[command(flatten)]
    pub sample: SampleArgs,
}

#[derive(Subcommand, Debug)]
pub enum Check {
    /// `M_delta |SH|^delta = m_delta |SH|^(delta-2)` at random chamber points.
    BsSinh(PointwiseArgs),
    /// The `CH^delta` companion identity.
    BsCosh(PointwiseArgs),
    /// The two scalar rank-zero-multiplicity identities.
    BsFlat {
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        delta: f64,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Both partial-product ladder formulas.
    Ladder {
        #[command(flatten)]
        args: PointwiseArgs,
        /// Only this index (1-based); all by default.
        #[arg(long)]
        j: Option<usize>,
    },
    /// `[D_i, D_j] = 0` on a non-invariant probe.
    Commute {
        #[command(flatten)]
        root: RootArgs,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Symmetry of `M_delta` under the radial measure.
    Adjoint {
        #[command(flatten)]
        args: PointwiseArgs,
        #[arg(long, default_value_t = 40)]
        nodes: usize,
        #[arg(long, default_value_t = 16)]
        panels: usize,
    },
    /// Recursion and continuation of the zeta distribution on a bump.
    Zeta {
        #[command(flatten)]
        root: RootArgs,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 40)]
        nodes: usize,
        #[arg(long, default_value_t = 16)]
        panels: usize,
    },
    /// Dirac limit of the chain functional at the origin.
    Dirac {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 40)]
        nodes: usize,
        /// Outer Gauss-Legendre panels per ray [default: 32 in rank one, 16 otherwise].
        #[arg(long)]
        panels: Option<usize>,
    },
    /// Constancy of the rank-one inversion symbol.
    InversionSpectral {
        #[arg(long)]
        a: u32,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        rprime: u32,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
        lambdas: Vec<f64>,
    },
    /// `M R^t R f = c f` on H^3 by brute-force plane geometry.
    InversionGeometric {
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 600)]
        points: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct GgArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 60)]
    pub nodes: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SphericalArgs {
    #[arg(long)]
    pub a: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 5.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
}

#[derive(Args, Debug, Clone)]
pub struct RadonArgs {
    /// Plane distances from the origin.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    pub h: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Report(VerificationReport),
    Json(Value),
    Table { header: Vec<String>, rows: Vec<Vec<f64>> },
}

impl Payload {
    /// Exit code implied by the payload alone.
    pub fn exit_code(&self) -> i32 {
        match self {
            Payload::Report(r) if !r.pass => EXIT_FAIL,
            _ => EXIT_PASS,
        }
    }

    /// Serialized payload with a trailing newline.
    pub fn render(&self, format: Option<Format>) -> CliResult<String> {
        match (self, format) {
            (Payload::Report(r), None | Some(Format::Json)) => Ok(serde_json::to_string_pretty(r)? + "\n"),
            (Payload::Json(v), None | Some(Format::Json)) => Ok(serde_json::to_string_pretty(v)? + "\n"),
            (Payload::Table { header, rows }, None | Some(Format::Csv)) => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
                w.write_record(header)?;
                for row in rows {
                    w.write_record(row.iter().map(|v| v.to_string()))?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
                Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
            }
            (Payload::Table { header, rows }, Some(Format::Json)) => {
                let objs: Vec<Value> = rows
                    .iter()
                    .map(|row| Value::Object(header.iter().cloned().zip(row.iter().map(|&v| json!(v))).collect()))
                    .collect();
                Ok(serde_json::to_string_pretty(&objs)? + "\n")
            }
            (_, Some(Format::Csv)) => Err(CliError::Invalid("csv output is only available for profiles".into())),
        }
    }
}

/// Size the global thread pool from `CR_THREADS` (unset or empty: rayon's default).
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("CR_THREADS") else { return Ok(()) };
    if v.trim().is_empty() {
        return Ok(());
    }
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Invalid(format!("CR_THREADS must be a positive integer (got {v:?})")))?;
    // a second initialization (tests) is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> CliResult<Payload> {
    let start = Instant::now();
    let mut payload = match &cli.command {
        Command::Constants(d) => Payload::Json(constants_json(&domain(d)?)?),
        Command::Verify { tolerance, check } => {
            let mut rep = run_check(check)?;
            if let Some(t) = tolerance {
                if !(*t > 0.0) {
                    return Err(CliError::Invalid(format!("tolerance must be positive (got {t})")));
                }
                rep.params.insert("tolerance".into(), *t);
                rep.refresh();
            }
            Payload::Report(rep)
        }
        Command::Gg(g) => Payload::Json(gg_json(g)?),
        Command::Spherical(s) => spherical_table(s)?,
        Command::RadonSample(r) => radon_table(r)?,
    };
    if let Payload::Report(r) = &mut payload {
        r.runtime_ms = start.elapsed().as_millis() as u64;
    }
    Ok(payload)
}

fn domain(d: &DomainArgs) -> CliResult<DomainParams> {
    Ok(domain_params(d.a, d.n, d.r, d.rprime)?)
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{name} must be positive and finite (got {v})")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{name} must be at least {min} (got {v})")))
    }
}

/// `constants` payload.
pub fn constants_json(dp: &DomainParams) -> CliResult<Value> {
    let rd = dp.root_data();
    let mut cands = Map::new();
    for c in dirac_candidates(dp) {
        cands.insert(c.name.to_string(), json!(c.value));
    }
    let mut z = Vec::new();
    // poles (Gamma arguments at non-positive integers) show up as null
    for k in 0..=4 * (dp.l + 1) {
        let delta = dp.delta0 + 0.5 * k as f64;
        let v = z_delta(&rd, delta).ok();
        z.push(json!({ "delta": delta, "z": v }));
    }
    Ok(json!({
        "a": dp.a,
        "n": dp.n,
        "r": dp.r,
        "rprime": dp.r_prime,
        "delta0": dp.delta0,
        "iota": dp.iota,
        "two_b": dp.two_b,
        "rho": dp.rho,
        "l": dp.l,
        "lambda": dp.lambdas,
        "c0": dp.c0,
        "c1": dp.constants.c1,
        "radon_prefactor": dp.constants.radon_prefactor,
        "pair_jacobian": dp.constants.pair_jacobian,
        "candidates": cands,
        "z_delta": z,
    }))
}

/// Pointwise check over seeded chamber points, split across the pool.
/// Chunk reports are merged in order, so the result does not depend on the
/// number of threads.
pub fn par_points<F>(rank: usize, sample: &SampleArgs, check: F) -> CliResult<VerificationReport>
where
    F: Fn(&[Vec<f64>]) -> matball_core::Result<VerificationReport> + Sync,
{
    at_least("samples", sample.samples, 1)?;
    let points = chamber_points(rank, sample.samples, sample.seed);
    let chunk = points.len().div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
    let parts: Vec<VerificationReport> = points.par_chunks(chunk).map(|c| check(c)).collect::<Result<_, _>>()?;
    let mut it = parts.into_iter();
    let mut rep = it.next().expect("at least one chunk");
    for p in it {
        rep.merge(&p);
    }
    Ok(rep)
}

fn run_check(check: &Check) -> CliResult<VerificationReport> {
    match check {
        Check::BsSinh(p) => {
            let rd = p.root.root_data()?;
            let op = MDeltaFamily::new(&rd)?.at(p.delta)?;
            par_points(rd.rank, &p.sample, |pts| bsverify::verify_bs_sinh_with(&op, &rd, p.delta, pts, p.sample.seed))
        }
        Check::BsCosh(p) => {
            let rd = p.root.root_data()?;
            let op = MDeltaFamily::new(&rd)?.at(p.delta)?;
            par_points(rd.rank, &p.sample, |pts| bsverify::verify_bs_cosh_with(&op, &rd, p.delta, pts, p.sample.seed))
        }
        Check::BsFlat { delta, sample } => {
            at_least("samples", sample.samples, 1)?;
            Ok(bsverify::verify_bs_flat(*delta, sample.samples, sample.seed)?)
        }
        Check::Ladder { args, j } => {
            let rd = args.root.root_data()?;
            if let Some(j) = j {
                if *j == 0 || *j > rd.rank {
                    return Err(CliError::Invalid(format!("ladder index must satisfy 1 <= j <= rank = {} (got {j})", rd.rank)));
                }
            }
            let js: Vec<usize> = j.map(|j| vec![j]).unwrap_or_else(|| (1..=rd.rank).collect());
            let mut rep: Option<VerificationReport> = None;
            for j in js {
                let one = par_points(rd.rank, &args.sample, |pts| {
                    bsverify::verify_ladder_with(&rd, args.delta, j, pts, args.sample.seed)
                })?;
                let acc = rep.get_or_insert_with(|| {
                    let mut r = one.clone();
                    r.measured_constants.clear();
                    r.params.remove("j");
                    r.samples = 0;
                    r.max_abs_err = 0.0;
                    r.max_rel_err = 0.0;
                    r
                });
                for (k, v) in &one.measured_constants {
                    acc.constant(&format!("{k}[j={j}]"), *v);
                }
                acc.merge(&one);
            }
            let mut rep = rep.expect("rank >= 1");
            if let Some(j) = j {
                rep = rep.param("j", *j as f64);
            }
            Ok(rep)
        }
        Check::Commute { root, sample } => {
            at_least("samples", sample.samples, 1)?;
            Ok(bsverify::verify_commute(&root.root_data()?, sample.samples, sample.seed)?)
        }
        Check::Adjoint { args, nodes, panels } => {
            at_least("nodes", *nodes, 4)?;
            at_least("panels", *panels, 1)?;
            let spec = QuadratureSpec { nodes: *nodes, panels: *panels, ..QuadratureSpec::default() };
            Ok(bsverify::verify_adjoint(&args.root.root_data()?, args.delta, &spec, args.sample.seed)?)
        }
        Check::Zeta { root, delta, steps, radius, nodes, panels } => {
            positive("radius", *radius)?;
            at_least("nodes", *nodes, 4)?;
            at_least("panels", *panels, 1)?;
            let rd = root.root_data()?;
            let spec = QuadratureSpec { nodes: *nodes, panels: *panels, ..QuadratureSpec::default() };
            verify_zeta(&rd, *delta, *steps, &bump(rd.rank, *radius), &spec)
        }
        Check::Dirac { domain: d, nodes, panels } => {
            at_least("nodes", *nodes, 4)?;
            let dp = domain(d)?;
            let panels = panels.unwrap_or(dirac_default_panels(&dp));
            at_least("panels", panels, 1)?;
            let quad = QuadratureSpec { nodes: *nodes, panels, ..QuadratureSpec::default() };
            verify_dirac_parallel(&dp, &quad)
        }
        Check::InversionSpectral { a, n, rprime, lambdas } => {
            let dp = domain_params(*a, *n, 1, *rprime)?;
            if lambdas.is_empty() || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(CliError::Invalid("lambdas must be a nonempty list of finite values >= 0".into()));
            }
            Ok(radon1::verify_inversion_spectral(&dp, lambdas)?)
        }
        Check::InversionGeometric { radius, points } => {
            positive("radius", *radius)?;
            let f = RadialBump { radius: *radius, amplitude: 1.0 };
            Ok(radon1::verify_inversion_geometric(&f, *points)?.report)
        }
    }
}

/// The zeta checks available at `delta`.
///
/// In the convergent range: `zeta_continued(delta, steps) = zeta(delta)` and,
/// when `delta - 2` also converges, the weak recursion. Below it the value is a
/// genuine continuation and is checked against one more continuation step.
pub fn verify_zeta(rd: &RootData, delta: f64, steps: usize, f: &Bump, spec: &QuadratureSpec) -> CliResult<VerificationReport> {
    let floor = -1.0 - rd.iota - rd.two_b;
    let mut rep = VerificationReport::new("zeta", bsverify::QUADRATURE_TOL)
        .param("rank", rd.rank as f64)
        .param("a", rd.a)
        .param("two_b", rd.two_b)
        .param("iota", rd.iota)
        .param("delta", delta)
        .param("steps", steps as f64);
    if delta > floor {
        at_least("steps", steps, 1)?;
        let overlap = bsverify::verify_zeta_overlap(rd, delta, f, steps, spec)?;
        for (k, v) in &overlap.measured_constants {
            rep.constant(k, *v);
        }
        rep.merge(&overlap);
        if delta - 2.0 > floor {
            let rec = bsverify::verify_zeta_recursion(rd, delta, f, spec)?;
            for (k, v) in &rec.measured_constants {
                rep.constant(k, *v);
            }
            rep.merge(&rec);
        }
    } else {
        let need = ((floor - delta) / 2.0).floor() as usize + 1;
        if steps < need {
            return Err(CliError::Invalid(format!(
                "continuation needs delta + 2 steps > -1 - iota - 2b = {floor}: at least {need} steps for delta = {delta}"
            )));
        }
        let a = bsverify::zeta_continued(rd, delta, f, steps, spec)?;
        let b = bsverify::zeta_continued(rd, delta, f, steps + 1, spec)?;
        rep.constant("zeta_continued", a);
        rep.constant("zeta_continued[steps+1]", b);
        rep.record((a - b).abs(), a.abs().max(b.abs()));
    }
    Ok(rep)
}

/// Outer panels for the Dirac chain: rank one is cheap enough to resolve the
/// support edge generously.
pub fn dirac_default_panels(dp: &DomainParams) -> usize {
    if dp.r == 1 {
        32
    } else {
        16
    }
}

/// The probe family of the Dirac check: several radii, shapes and one
/// function vanishing at the origin.
pub fn dirac_probe_family(rank: usize) -> Vec<(String, Bump)> {
    let mut out = vec![
        ("R=1".to_string(), bump(rank, 1.0)),
        ("R=0.7".to_string(), bump(rank, 0.7)),
        ("R=1.3,p1=0.5".to_string(), bump(rank, 1.3).with_prefactor(1.0, 0.5)),
    ];
    if rank > 1 {
        out.push(("R=1.1,kappa=0.6".to_string(), bump(rank, 1.1).with_kappa(0.6)));
    } else {
        out.push(("R=1.1,p1=-0.4".to_string(), bump(rank, 1.1).with_prefactor(1.0, -0.4)));
    }
    out.push(("null".to_string(), bump(rank, 1.0).with_prefactor(0.0, 1.0)));
    out
}

/// Sup of `|f|` for a radial-profile bump, by sampling the level parameter.
fn bump_sup(b: &Bump) -> f64 {
    (0..2000)
        .map(|i| {
            let s = i as f64 / 2000.0;
            (b.amplitude * (b.p0 + b.p1 * s) * (-1.0 / (1.0 - s)).exp()).abs()
        })
        .fold(0.0, f64::max)
}

/// [`matball_core::ggdist::verify_dirac`] on [`dirac_probe_family`] with the probes in parallel.
pub fn verify_dirac_parallel(dp: &DomainParams, quad: &QuadratureSpec) -> CliResult<VerificationReport> {
    let chain = dirac_chain_op(dp)?;
    let family = dirac_probe_family(dp.r as usize);
    let ms = family
        .par_iter()
        .map(|(label, b)| {
            let probe = DiracProbe { f: b, at_origin: b.at_origin(), sup: bump_sup(b), label: label.clone() };
            measure_dirac(dp, &chain, &probe, quad)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rep = dirac_report(dp, &ms)?;
    rep.params.insert("nodes".into(), quad.nodes as f64);
    rep.params.insert("panels".into(), quad.panels as f64);
    Ok(rep)
}

fn gg_json(g: &GgArgs) -> CliResult<Value> {
    positive("radius", g.radius)?;
    at_least("nodes", g.nodes, 4)?;
    if !(g.a >= 0.0) {
        return Err(CliError::Invalid(format!("a must be >= 0 (got {})", g.a)));
    }
    let f = bump(g.rank, g.radius);
    let quad = QuadratureSpec { nodes: g.nodes, ..QuadratureSpec::default() };
    let v = gg_integral(&GGSpec { a: g.a, rank: g.rank, lambda: g.lambda, f: &f }, &quad)?;
    Ok(json!({
        "a": g.a,
        "rank": g.rank,
        "lambda": g.lambda,
        "radius": g.radius,
        "f_at_origin": f.at_origin(),
        "value": v,
    }))
}

fn spherical_table(s: &SphericalArgs) -> CliResult<Payload> {
    positive("tmax", s.tmax)?;
    positive("step", s.step)?;
    if ![1, 2, 4, 8].contains(&s.a) || s.n < 2 {
        return Err(CliError::Invalid(format!("need a in {{1, 2, 4, 8}} and n >= 2 (got a = {}, n = {})", s.a, s.n)));
    }
    let a = s.a as f64;
    let rd = RootData::new(1, a, a * (s.n as f64 - 2.0), a - 1.0)?;
    let phi = radon1::spherical(&rd, s.lambda, s.tmax)?;
    let count = (s.tmax / s.step).floor() as usize;
    let rows = (0..=count)
        .map(|i| {
            let t = (i as f64 * s.step).min(s.tmax);
            let (v, d1, d2) = phi.eval(t)?;
            Ok(vec![t, v, d1, d2])
        })
        .collect::<matball_core::Result<Vec<_>>>()?;
    Ok(Payload::Table { header: vec!["t".into(), "phi".into(), "dphi".into(), "d2phi".into()], rows })
}

fn radon_table(r: &RadonArgs) -> CliResult<Payload> {
    positive("radius", r.radius)?;
    if r.h.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(CliError::Invalid("plane distances must be finite and >= 0".into()));
    }
    let f = RadialBump { radius: r.radius, amplitude: 1.0 };
    let rows = r
        .h
        .par_iter()
        .map(|&h| {
            let plane = Plane::at_distance(h, [0.0, 0.0, 1.0])?;
            Ok(vec![h, radon1::radon_plane(&f, &plane)?])
        })
        .collect::<matball_core::Result<Vec<_>>>()?;
    Ok(Payload::Table { header: vec!["h".into(), "radon".into()], rows })
}

/// Fixed JSON schema of every report.
pub fn report_schema() -> &'static str {
    r#"{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "VerificationReport",
  "type": "object",
  "additionalProperties": false,
  "required": ["check", "params", "samples", "max_abs_err", "max_rel_err", "measured_constants", "pass", "seed", "runtime_ms"],
  "properties": {
    "check": { "type": "string" },
    "params": { "type": "object", "additionalProperties": { "type": "number" } },
    "samples": { "type": "integer", "minimum": 0 },
    "max_abs_err": { "type": "number" },
    "max_rel_err": { "type": "number" },
    "measured_constants": { "type": "object", "additionalProperties": { "type": "number" } },
    "pass": { "type": "boolean" },
    "seed": { "type": "integer", "minimum": 0 },
    "runtime_ms": { "type": "integer", "minimum": 0 }
  }
}
"#
}

/// Parse, run and write; returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let outcome = init_threads().and_then(|_| run(&cli)).and_then(|p| {
        let text = p.render(cli.format)?;
        match &cli.output {
            Some(path) => std::fs::write(path, text.as_bytes())?,
            None => stdout.write_all(text.as_bytes())?,
        }
        Ok(p)
    });
    match outcome {
        Ok(p) => {
            if let Payload::Report(r) = &p {
                if !r.pass {
                    let _ = writeln!(stderr, "check {} failed: max_rel_err = {:e}", r.check, r.max_rel_err);
                }
            }
            p.exit_code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
