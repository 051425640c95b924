//! The experiment configuration: one JSON document, every field optional.

use std::path::Path;

use num_complex::Complex64;
use scalelab::lemmas::TheoremConfig;
use scalelab::scaling::{DiagnosticsConfig, ScalingConfig};
use scalelab::{CVector, DomainSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ConfigError;

/// A complex coordinate written as `[re, im]`.
pub type Coord = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Complex dimension `N`.
    pub dimension: usize,
    pub domain: DomainConfig,
    pub orbit: OrbitConfig,
    /// Number of scaling stages, and the last stage of the replay.
    pub j_max: usize,
    pub seed: u64,
    /// Output directory for the report and CSV tables.
    pub output: String,
    pub kobayashi: KobayashiConfig,
    pub lemmas: LemmaConfig,
    pub theorem: TheoremSection,
    pub scaling: ScalingConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dimension: 8,
            domain: DomainConfig::Ball,
            orbit: OrbitConfig::default(),
            j_max: 32,
            seed: 7,
            output: "scalelab-out".into(),
            kobayashi: KobayashiConfig::default(),
            lemmas: LemmaConfig::default(),
            theorem: TheoremSection::default(),
            scaling: ScalingConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

/// Catalog domain, tagged by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    /// The unit ball of `C^N`.
    Ball,
    /// `Σ w_k |z_k|² < 1`; unlisted trailing weights are 1.
    Ellipsoid { weights: Vec<f64> },
    /// `Re z_1 > ‖z'‖²`.
    Siegel,
    /// `‖z‖² − 1 + β Re(z_2)|z_2|² < 0`.
    PerturbedBall { beta: f64 },
}

impl DomainConfig {
    pub fn build(&self, n: usize) -> DomainSpec {
        match self {
            DomainConfig::Ball => DomainSpec::unit_ball(n),
            DomainConfig::Ellipsoid { weights } => DomainSpec::ellipsoid_padded(n, weights),
            DomainConfig::Siegel => DomainSpec::siegel(n),
            DomainConfig::PerturbedBall { beta } => DomainSpec::perturbed_ball(n, *beta),
        }
    }
}

/// How the stages are driven: by a genuine automorphism orbit (ball and
/// Siegel domain), by the synthetic orbit `rate^j (e_1 + offset·e_2)` in
/// normalized coordinates, or by an explicit list of normalized points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OrbitConfig {
    Automorphism {
        rate: f64,
        /// Base point; defaults to the domain's basepoint.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<Coord>>,
        /// Boundary target; defaults to the end of the `e_1` ray from `q`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Coord>>,
    },
    Synthetic {
        rate: f64,
        #[serde(default)]
        offset: f64,
        /// Boundary point at which the domain is normalized; defaults to the
        /// end of the `e_1` ray from the basepoint.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Coord>>,
    },
    Points {
        points: Vec<Vec<Coord>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Coord>>,
    },
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig::Automorphism {
            rate: 0.5,
            q: None,
            p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KobayashiConfig {
    /// Random `(x, v)` / `(x, q)` pairs.
    pub pairs: usize,
    /// Polynomial degree of the searched discs.
    pub degree: usize,
    /// Shape evaluations per disc search.
    pub budget: usize,
    /// Euclidean radius around the basepoint from which interior points are
    /// drawn on domains other than the unit ball.
    pub radius: f64,
}

impl Default for KobayashiConfig {
    fn default() -> Self {
        KobayashiConfig {
            pairs: 1000,
            degree: 4,
            budget: 2000,
            radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub esti: EstiConfig,
    pub disc: DiscConfig,
    pub ball: BallConfig,
    #[serde(rename = "final")]
    pub final_: FinalConfig,
}

/// Nested-domain estimates. With both `a` and `b` set every configuration
/// uses them; otherwise they are drawn per configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstiConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub configs: usize,
    pub directions: usize,
}

impl Default for EstiConfig {
    fn default() -> Self {
        EstiConfig {
            a: None,
            b: None,
            configs: 1000,
            directions: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscConfig {
    pub delta: f64,
    pub eps: f64,
    /// Maps per Blaschke family.
    pub budget: usize,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig {
            delta: 1e-4,
            eps: 0.05,
            budget: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Linear,
    Multiplier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallConfig {
    pub family: FamilyKind,
    /// Members `j = 2..=members`, with `a_j = 1/j`.
    pub members: usize,
    pub radius: f64,
    pub samples: usize,
    /// Bound on `sup ‖g_j − I‖` at the last member.
    pub sup_target: f64,
}

impl Default for BallConfig {
    fn default() -> Self {
        BallConfig {
            family: FamilyKind::Multiplier,
            members: 50,
            radius: 0.9,
            samples: 10_000,
            sup_target: 0.02,
        }
    }
}

/// `ψ(z) = z + γ ⟨z, e_1⟩^power w` with `w = (e_1 + e_2)/√2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinalConfig {
    pub gamma: f64,
    pub power: i32,
    pub radius: f64,
    pub eps: f64,
    pub samples: usize,
}

impl Default for FinalConfig {
    fn default() -> Self {
        FinalConfig {
            gamma: 0.05,
            power: 2,
            radius: 0.8,
            eps: 0.1,
            samples: 1000,
        }
    }
}

/// Replay parameters not already fixed by the top level (dimension,
/// `j_max`, orbit rate, scaling and diagnostics settings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremSection {
    pub a: f64,
    pub radius: f64,
    pub sup_target: f64,
    pub samples: usize,
    pub surjectivity_radius: f64,
    pub surjectivity_eps: f64,
    pub surjectivity_samples: usize,
    pub qa_samples: usize,
}

impl Default for TheoremSection {
    fn default() -> Self {
        let t = TheoremConfig::default();
        TheoremSection {
            a: t.a,
            radius: t.radius,
            sup_target: t.sup_target,
            samples: t.samples,
            surjectivity_radius: t.surjectivity_radius,
            surjectivity_eps: t.surjectivity_eps,
            surjectivity_samples: t.surjectivity_samples,
            qa_samples: t.qa_samples,
        }
    }
}

fn bad<T>(field: &str, reason: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    })
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

pub fn to_vector(field: &str, coords: &[Coord], n: usize) -> Result<CVector, ConfigError> {
    if coords.len() != n {
        return bad(
            field,
            format!("expected {n} coordinates, found {}", coords.len()),
        );
    }
    if coords.iter().flatten().any(|c| !c.is_finite()) {
        return bad(field, "coordinates must be finite");
    }
    Ok(CVector::from_iterator(
        n,
        coords.iter().map(|c| Complex64::new(c[0], c[1])),
    ))
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::Invalid {
                field: if field == "." { "<root>".into() } else { field },
                reason: e.into_inner().to_string(),
            }
        })
    }

    /// Hex SHA-256 of the canonical JSON form, excluding the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.clear();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn orbit_rate(&self) -> Option<f64> {
        match &self.orbit {
            OrbitConfig::Automorphism { rate, .. } | OrbitConfig::Synthetic { rate, .. } => {
                Some(*rate)
            }
            OrbitConfig::Points { .. } => None,
        }
    }

    /// Replay configuration assembled from the top level and `theorem`.
    pub fn theorem_config(&self) -> TheoremConfig {
        let t = &self.theorem;
        TheoremConfig {
            dim: self.dimension,
            rate: self.orbit_rate().unwrap_or(0.5),
            j_max: self.j_max,
            a: t.a,
            radius: t.radius,
            sup_target: t.sup_target,
            samples: t.samples,
            surjectivity_radius: t.surjectivity_radius,
            surjectivity_eps: t.surjectivity_eps,
            surjectivity_samples: t.surjectivity_samples,
            qa_samples: t.qa_samples,
            scaling: self.scaling.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Checks every invariant that does not depend on the command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.dimension;
        if n < 2 {
            return bad("dimension", "must be at least 2");
        }
        if self.j_max < 2 {
            return bad("j_max", "must be at least 2");
        }
        match &self.domain {
            DomainConfig::Ellipsoid { weights } => {
                if weights.len() > n {
                    return bad("domain.weights", format!("at most {n} weights"));
                }
                if !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
                    return bad("domain.weights", "weights must be positive");
                }
            }
            DomainConfig::PerturbedBall { beta } if !beta.is_finite() => {
                return bad("domain.beta", "must be finite")
            }
            _ => {}
        }
        match &self.orbit {
            OrbitConfig::Automorphism { rate, q, p } => {
                if !in_unit(*rate) {
                    return bad("orbit.rate", "must lie in (0, 1)");
                }
                if let Some(q) = q {
                    to_vector("orbit.q", q, n)?;
                }
                if let Some(p) = p {
                    to_vector("orbit.p", p, n)?;
                }
            }
            OrbitConfig::Synthetic { rate, offset, p } => {
                if !in_unit(*rate) {
                    return bad("orbit.rate", "must lie in (0, 1)");
                }
                if !offset.is_finite() {
                    return bad("orbit.offset", "must be finite");
                }
                if let Some(p) = p {
                    to_vector("orbit.p", p, n)?;
                }
            }
            OrbitConfig::Points { points, p } => {
                if let Some(p) = p {
                    to_vector("orbit.p", p, n)?;
                }
                if points.is_empty() {
                    return bad("orbit.points", "need at least one point");
                }
                for (i, pt) in points.iter().enumerate() {
                    to_vector(&format!("orbit.points[{i}]"), pt, n)?;
                }
            }
        }

        let k = &self.kobayashi;
        if k.pairs == 0 {
            return bad("kobayashi.pairs", "must be positive");
        }
        if k.degree == 0 || k.budget == 0 {
            return bad("kobayashi.degree", "degree and budget must be positive");
        }
        if !(k.radius > 0.0 && k.radius.is_finite()) {
            return bad("kobayashi.radius", "must be positive");
        }

        let e = &self.lemmas.esti;
        if let Some(a) = e.a {
            if !(a >= 0.0 && a.is_finite()) {
                return bad("lemmas.esti.a", "must be nonnegative");
            }
        }
        match (e.a, e.b) {
            (Some(a), Some(b)) if !(b > a) => {
                return bad(
                    "lemmas.esti.b",
                    format!("must exceed lemmas.esti.a (b = {b}, a = {a})"),
                )
            }
            (Some(_), None) | (None, Some(_)) => {
                return bad("lemmas.esti", "set both a and b, or neither")
            }
            _ => {}
        }
        if e.configs == 0 || e.directions == 0 {
            return bad(
                "lemmas.esti.configs",
                "configs and directions must be positive",
            );
        }

        let d = &self.lemmas.disc;
        if !(d.delta > 0.0 && d.delta < 1.0) {
            return bad("lemmas.disc.delta", "must lie in (0, 1)");
        }
        if !in_unit(d.eps) {
            return bad("lemmas.disc.eps", "must lie in (0, 1)");
        }
        if d.budget == 0 {
            return bad("lemmas.disc.budget", "must be positive");
        }

        let b = &self.lemmas.ball;
        if b.members < 2 {
            return bad("lemmas.ball.members", "must be at least 2");
        }
        if !in_unit(b.radius) {
            return bad("lemmas.ball.radius", "must lie in (0, 1)");
        }
        if b.samples == 0 {
            return bad("lemmas.ball.samples", "must be positive");
        }
        if !(b.sup_target > 0.0) {
            return bad("lemmas.ball.sup_target", "must be positive");
        }

        let f = &self.lemmas.final_;
        if !(f.gamma >= 0.0 && f.gamma.is_finite()) {
            return bad("lemmas.final.gamma", "must be nonnegative");
        }
        if f.power < 1 {
            return bad("lemmas.final.power", "must be at least 1");
        }
        if !in_unit(f.radius) {
            return bad("lemmas.final.radius", "must lie in (0, 1)");
        }
        if !(f.eps > 0.0 && (1.0 + 2.0 * f.eps) * f.radius < 1.0) {
            return bad(
                "lemmas.final.eps",
                "need eps > 0 and (1 + 2 eps) radius < 1",
            );
        }
        if f.samples == 0 {
            return bad("lemmas.final.samples", "must be positive");
        }

        let s = &self.scaling;
        if !(s.u_radius > 0.0) {
            return bad("scaling.u_radius", "must be positive");
        }
        if s.radius_grid.is_empty()
            || s.radius_grid[0] <= 0.0
            || s.radius_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return bad(
                "scaling.radius_grid",
                "must be positive and strictly increasing",
            );
        }
        if s.localization_samples == 0 || s.image_samples == 0 {
            return bad("scaling.image_samples", "sample counts must be positive");
        }
        if self.diagnostics.sandwich_samples == 0 {
            return bad("diagnostics.sandwich_samples", "must be positive");
        }

        self.theorem_config().validate().or_else(|err| match err {
            scalelab::Error::InvalidArgument(msg) => {
                let (field, why) = msg.split_once(": ").unwrap_or(("", msg.as_str()));
                let path = match field {
                    "dim" => "dimension".to_string(),
                    "rate" => "orbit.rate".to_string(),
                    "j_max" => "j_max".to_string(),
                    f => format!("theorem.{f}"),
                };
                bad(&path, why)
            }
            other => bad("theorem", other.to_string()),
        })
    }
}
