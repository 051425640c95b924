//! Dispatch from a command to the matching `scalelab` suite.

use scalelab::automorphisms::orbit_to_boundary;
use scalelab::domains::{normalize_at, ray_boundary_point};
use scalelab::kobayashi::{exact, metric_upper, oracle_agreement, AGREEMENT_TOL};
use scalelab::lemmas::{
    ball_convergence_check, blaschke_family, disc_lemma_check, empirical_delta,
    localization_suite_with, main_theorem_pipeline, nested_configs, nested_configs_at,
    polynomial_perturbation, surjectivity_radius, SelfMapFamily,
};
use scalelab::linalg::{basis, norm};
use scalelab::sampling::{uniform_ball, unit_sphere};
use scalelab::scaling::{
    build_stage, scaling_diagnostics, synthetic_stages, Pipeline, ScalingState,
};
use scalelab::{CVector, DomainKind, DomainSpec, Entry, Report, Streams, Table};

use crate::config::{to_vector, DomainConfig, ExperimentConfig, FamilyKind, OrbitConfig};
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    /// Nested-domain distance and metric estimates.
    Esti,
    /// Self-maps of the disc with derivative near 1 at the origin.
    Disc,
    /// Convergence of ball self-maps to the identity.
    Ball,
    /// Inversion of perturbations of the identity by iteration.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyLemma(Lemma),
    KobayashiEval,
    ScaleRun,
    TheoremReplay,
}

impl Command {
    /// File stem of the emitted artifacts.
    pub fn slug(self) -> &'static str {
        match self {
            Command::VerifyLemma(Lemma::Esti) => "verify-lemma-esti",
            Command::VerifyLemma(Lemma::Disc) => "verify-lemma-disc",
            Command::VerifyLemma(Lemma::Ball) => "verify-lemma-ball",
            Command::VerifyLemma(Lemma::Final) => "verify-lemma-final",
            Command::KobayashiEval => "kobayashi-eval",
            Command::ScaleRun => "scale-run",
            Command::TheoremReplay => "theorem-replay",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            Command::VerifyLemma(Lemma::Esti) => 1,
            Command::VerifyLemma(Lemma::Disc) => 2,
            Command::VerifyLemma(Lemma::Ball) => 3,
            Command::VerifyLemma(Lemma::Final) => 4,
            Command::KobayashiEval => 5,
            Command::ScaleRun => 6,
            Command::TheoremReplay => 7,
        }
    }
}

/// Validates `config` and runs `command`. Configuration problems are
/// returned as errors; failures inside a suite become a failed `error`
/// entry, with the message recorded among the artifacts.
pub fn run(config: &ExperimentConfig, command: Command) -> Result<Report, ConfigError> {
    config.validate()?;
    let streams = Streams::new(config.seed).child(command.stream_tag());
    let result = match command {
        Command::VerifyLemma(Lemma::Esti) => esti(config, &streams),
        Command::VerifyLemma(Lemma::Disc) => disc(config, &streams),
        Command::VerifyLemma(Lemma::Ball) => ball(config, &streams),
        Command::VerifyLemma(Lemma::Final) => final_(config, &streams),
        Command::KobayashiEval => kobayashi_eval(config, &streams),
        Command::ScaleRun => scale_run(config, &streams)?,
        Command::TheoremReplay => {
            theorem_preconditions(config)?;
            main_theorem_pipeline(&config.theorem_config(), &streams)
        }
    };
    Ok(result.unwrap_or_else(|e| {
        let mut rep = Report::new(command.slug());
        rep.push(Entry::flag("error", false));
        rep.artifacts.push(format!("error: {e}"));
        rep
    }))
}

fn invalid(field: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn esti(config: &ExperimentConfig, streams: &Streams) -> scalelab::Result<Report> {
    let e = &config.lemmas.esti;
    let n = config.dimension;
    let cfgs = match (e.a, e.b) {
        (Some(a), Some(b)) => nested_configs_at(n, a, b, e.configs, streams)?,
        _ => nested_configs(n, e.configs, streams)?,
    };
    localization_suite_with(n, &cfgs, e.directions, streams)
}

fn disc(config: &ExperimentConfig, streams: &Streams) -> scalelab::Result<Report> {
    let d = &config.lemmas.disc;
    let family = blaschke_family(d.delta, d.budget, streams);
    let mut table = Table::new("disc", &["member", "f_prime_0", "sup_deviation"]);
    let mut worst: f64 = 0.0;
    for (i, f) in family.iter().enumerate() {
        let r = disc_lemma_check(f, d.delta, d.eps)?;
        let sup = r.value("sup_deviation").unwrap_or(f64::NAN);
        worst = worst.max(sup);
        table.push(vec![
            i as f64,
            r.value("f_prime_0").unwrap_or(f64::NAN),
            sup,
        ]);
    }
    let mut rep = Report::new("disc_lemma");
    rep.push(Entry::info("delta", d.delta));
    rep.push(Entry::info("eps", d.eps));
    rep.push(Entry::info("members", family.len() as f64));
    rep.push(Entry::check("sup_deviation_max", worst, d.eps - worst, 0.0));
    rep.push(Entry::info(
        "empirical_delta",
        empirical_delta(d.eps, d.budget, streams)?,
    ));
    rep.tables.push(table);
    Ok(rep)
}

fn ball(config: &ExperimentConfig, streams: &Streams) -> scalelab::Result<Report> {
    let b = &config.lemmas.ball;
    let family = match b.family {
        FamilyKind::Linear => SelfMapFamily::linear(config.dimension, b.members),
        FamilyKind::Multiplier => SelfMapFamily::multiplier(config.dimension, b.members),
    };
    let mut rep = ball_convergence_check(&family, b.radius, b.samples, streams)?;
    let sup = rep.value("sup_final").unwrap_or(f64::INFINITY);
    rep.push(Entry::check("sup_target", sup, b.sup_target - sup, 0.0));
    Ok(rep)
}

fn final_(config: &ExperimentConfig, streams: &Streams) -> scalelab::Result<Report> {
    let f = &config.lemmas.final_;
    let n = config.dimension;
    let u = basis(n, 0);
    let w = (basis(n, 0) + basis(n, 1)).unscale(2f64.sqrt());
    let psi = polynomial_perturbation(&u, &w, f.gamma, f.power);
    surjectivity_radius(&psi, &u, f.radius, f.eps, f.samples, streams)
}

fn is_unit_ball(domain: &DomainSpec) -> bool {
    matches!(domain.kind(), DomainKind::Ball { center, radius } if norm(center) == 0.0 && *radius == 1.0)
}

/// Closed-form comparison on the unit ball; elsewhere the bracket
/// `metric_lower ≤ metric_upper` at interior points of a Euclidean ball around
/// the basepoint, with the gap to the exact metric where one is known.
fn kobayashi_eval(config: &ExperimentConfig, streams: &Streams) -> scalelab::Result<Report> {
    let k = &config.kobayashi;
    let n = config.dimension;
    let domain = config.domain.build(n);
    if is_unit_ball(&domain) {
        return oracle_agreement(n, k.pairs, streams);
    }
    let mut rng = streams.stream(0x4b0e);
    let base = domain.basepoint();
    let mut points = Vec::with_capacity(k.pairs);
    let mut tries = 0;
    while points.len() < k.pairs && tries < 100 * k.pairs {
        tries += 1;
        let x = base + uniform_ball(n, k.radius, &mut rng);
        if domain.contains(&x) {
            points.push(x);
        }
    }
    let mut table = Table::new("kobayashi", &["point", "lower", "upper", "rel_width"]);
    let (mut undercut, mut width_max, mut gap_max): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let has_exact = exact::has_exact(&domain);
    for (i, x) in points.iter().enumerate() {
        let v = unit_sphere(n, &mut rng);
        let est = metric_upper(&domain, x, &v, k.degree, k.budget)?;
        let rel = (est.upper - est.lower) / est.lower;
        undercut = undercut.max(-rel);
        width_max = width_max.max(rel);
        if has_exact {
            gap_max = gap_max.max(rel.abs());
        }
        table.push(vec![i as f64, est.lower, est.upper, rel]);
    }
    let mut rep = Report::new("kobayashi_eval");
    rep.push(Entry::info("dim", n as f64));
    rep.push(Entry::info("points", points.len() as f64));
    rep.push(Entry::check("bracket_undercut", undercut, -undercut, 1e-9));
    rep.push(Entry::info("rel_width_max", width_max));
    if has_exact {
        rep.push(Entry::check(
            "exact_rel_gap_max",
            gap_max,
            AGREEMENT_TOL - gap_max,
            0.0,
        ));
    }
    rep.tables.push(table);
    Ok(rep)
}

fn orbit_ends(
    config: &ExperimentConfig,
    domain: &DomainSpec,
) -> Result<scalelab::Result<(CVector, CVector)>, ConfigError> {
    let n = config.dimension;
    let (q, p) = match &config.orbit {
        OrbitConfig::Automorphism { q, p, .. } => (q.as_ref(), p.as_ref()),
        OrbitConfig::Synthetic { p, .. } | OrbitConfig::Points { p, .. } => (None, p.as_ref()),
    };
    let q = match q {
        Some(q) => to_vector("orbit.q", q, n)?,
        None => domain.basepoint().clone(),
    };
    if !domain.contains(&q) {
        return Err(invalid("orbit.q", "must be an interior point"));
    }
    let p = match p {
        Some(p) => Ok(to_vector("orbit.p", p, n)?),
        None => ray_boundary_point(domain, &q).map(|hit| hit.point),
    };
    Ok(p.map(|p| (q, p)))
}

fn scale_run(
    config: &ExperimentConfig,
    streams: &Streams,
) -> Result<scalelab::Result<Report>, ConfigError> {
    let n = config.dimension;
    let domain = config.domain.build(n);
    if let OrbitConfig::Automorphism { rate, .. } = &config.orbit {
        if !matches!(config.domain, DomainConfig::Ball | DomainConfig::Siegel) {
            return Err(invalid("orbit.kind", "automorphism orbits exist for the ball and the Siegel domain; use synthetic or points"));
        }
        let rate = *rate;
        let ends = orbit_ends(config, &domain)?;
        return Ok(ends.and_then(|(q, p)| {
            let orbit = orbit_to_boundary(&domain, &q, &p, rate, config.j_max)?;
            let pipe = Pipeline::new(&domain, &p, &q, config.scaling.clone())?;
            let state = ScalingState::build(pipe, &orbit, streams)?;
            scaling_diagnostics(&state, &config.diagnostics, &streams.child(1))
        }));
    }
    let ends = orbit_ends(config, &domain)?;
    Ok(ends.and_then(|(_, p)| {
        let nd = normalize_at(&domain, &p)?;
        let stages = match &config.orbit {
            OrbitConfig::Synthetic { rate, offset, .. } => {
                synthetic_stages(&nd, *rate, *offset, config.j_max)?
            }
            OrbitConfig::Points { points, .. } => points
                .iter()
                .enumerate()
                .map(|(i, pt)| {
                    let q = to_vector("orbit.points", pt, n).expect("validated");
                    build_stage(&nd, &q, i + 1)
                })
                .collect::<scalelab::Result<Vec<_>>>()?,
            OrbitConfig::Automorphism { .. } => unreachable!("handled above"),
        };
        let samples = config.diagnostics.hausdorff_samples.max(1);
        scalelab::scaling::hausdorff_to_siegel(&nd, &stages, samples, streams)
    }))
}

fn theorem_preconditions(config: &ExperimentConfig) -> Result<(), ConfigError> {
    if config.domain != DomainConfig::Ball {
        return Err(invalid("domain.tag", "theorem-replay runs on the ball"));
    }
    match &config.orbit {
        OrbitConfig::Automorphism {
            q: None, p: None, ..
        } => Ok(()),
        OrbitConfig::Automorphism { .. } => {
            Err(invalid("orbit.q", "theorem-replay uses q = 0 and p = e_1"))
        }
        _ => Err(invalid(
            "orbit.kind",
            "theorem-replay needs an automorphism orbit",
        )),
    }
}
