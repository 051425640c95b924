use std::sync::Arc;

use num_complex::Complex64;

use super::{DefiningFunction, Neighborhood, Orientation};
use crate::automorphisms::Mobius;
use crate::holomap::Holomorphic;
use crate::linalg::{basis, norm_sqr, CVector};

/// Catalog entry with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// `‖z − c‖² < R²`.
    Ball {
        center: CVector,
        radius: f64,
    },
    /// `Σ w_k |z_k|² < 1`, all `w_k > 0`.
    Ellipsoid {
        weights: Vec<f64>,
    },
    /// `Re z_1 > ‖z'‖²`.
    Siegel,
    /// `‖z‖² − 1 + β Re(z_2)|z_2|² < 0` inside `‖z‖ < 1.5`.
    PerturbedBall {
        beta: f64,
    },
    /// Kobayashi ball `{d_B(z, c) < R}` of the unit ball, i.e. `φ_c(tanh R · B)`.
    KobayashiBall {
        center: CVector,
        radius: f64,
    },
    /// `Σ w_k |z_k − c_k|² + α Re z_1 − κ < 0` with arbitrary real weights.
    Quadric {
        weights: Vec<f64>,
        center: CVector,
        linear: f64,
        constant: f64,
    },
    Custom,
}

impl DomainKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DomainKind::Ball { .. } => "ball",
            DomainKind::Ellipsoid { .. } => "ellipsoid",
            DomainKind::Siegel => "siegel",
            DomainKind::PerturbedBall { .. } => "perturbed-ball",
            DomainKind::KobayashiBall { .. } => "kobayashi-ball",
            DomainKind::Quadric { .. } => "quadric",
            DomainKind::Custom => "custom",
        }
    }
}

/// A domain with its defining function, interior basepoint and the
/// orientation of the `e_1` ray used to reach its distinguished boundary.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    kind: DomainKind,
    rho: Arc<dyn DefiningFunction>,
    basepoint: CVector,
    outward: Orientation,
}

impl DomainSpec {
    pub fn unit_ball(n: usize) -> Self {
        Self::ball(CVector::zeros(n), 1.0)
    }

    pub fn ball(center: CVector, radius: f64) -> Self {
        let n = center.len();
        let rho = QuadricRho {
            weights: vec![1.0; n],
            center: center.clone(),
            linear: 0.0,
            constant: radius * radius,
            nbhd: Neighborhood {
                center: center.clone(),
                radius: 3.0 * radius,
            },
        };
        DomainSpec {
            kind: DomainKind::Ball {
                center: center.clone(),
                radius,
            },
            rho: Arc::new(rho),
            basepoint: center,
            outward: Orientation::PlusE1,
        }
    }

    pub fn ellipsoid(weights: &[f64]) -> Self {
        let n = weights.len();
        let wmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(wmin > 0.0, "ellipsoid weights must be positive");
        let rho = QuadricRho {
            weights: weights.to_vec(),
            center: CVector::zeros(n),
            linear: 0.0,
            constant: 1.0,
            nbhd: Neighborhood {
                center: CVector::zeros(n),
                radius: 3.0 / wmin.sqrt(),
            },
        };
        DomainSpec {
            kind: DomainKind::Ellipsoid {
                weights: weights.to_vec(),
            },
            rho: Arc::new(rho),
            basepoint: CVector::zeros(n),
            outward: Orientation::PlusE1,
        }
    }

    /// Ellipsoid in `C^n` whose leading weights are `lead`, remaining weights 1.
    pub fn ellipsoid_padded(n: usize, lead: &[f64]) -> Self {
        let mut w = vec![1.0; n];
        for (slot, &x) in w.iter_mut().zip(lead) {
            *slot = x;
        }
        Self::ellipsoid(&w)
    }

    pub fn siegel(n: usize) -> Self {
        let mut weights = vec![1.0; n];
        weights[0] = 0.0;
        let rho = QuadricRho {
            weights,
            center: CVector::zeros(n),
            linear: -1.0,
            constant: 0.0,
            nbhd: Neighborhood::global(n),
        };
        DomainSpec {
            kind: DomainKind::Siegel,
            rho: Arc::new(rho),
            basepoint: basis(n, 0),
            outward: Orientation::MinusE1,
        }
    }

    pub fn perturbed_ball(n: usize, beta: f64) -> Self {
        assert!(n >= 2, "perturbed ball needs a second coordinate");
        DomainSpec {
            kind: DomainKind::PerturbedBall { beta },
            rho: Arc::new(PerturbedBallRho { dim: n, beta }),
            basepoint: CVector::zeros(n),
            outward: Orientation::PlusE1,
        }
    }

    /// Kobayashi ball of radius `radius` about `center` in the unit ball.
    pub fn kobayashi_ball(center: &CVector, radius: f64) -> crate::Result<Self> {
        let mobius = Mobius::new(center.clone())?;
        let s = radius.tanh();
        Ok(DomainSpec {
            kind: DomainKind::KobayashiBall {
                center: center.clone(),
                radius,
            },
            rho: Arc::new(KobayashiBallRho { mobius, s2: s * s }),
            basepoint: center.clone(),
            outward: Orientation::PlusE1,
        })
    }

    pub fn quadric(
        weights: &[f64],
        center: CVector,
        linear: f64,
        constant: f64,
        basepoint: CVector,
    ) -> Self {
        let n = weights.len();
        let rho = QuadricRho {
            weights: weights.to_vec(),
            center: center.clone(),
            linear,
            constant,
            nbhd: Neighborhood::global(n),
        };
        DomainSpec {
            kind: DomainKind::Quadric {
                weights: weights.to_vec(),
                center,
                linear,
                constant,
            },
            rho: Arc::new(rho),
            basepoint,
            outward: if linear < 0.0 {
                Orientation::MinusE1
            } else {
                Orientation::PlusE1
            },
        }
    }

    pub fn custom(
        rho: Arc<dyn DefiningFunction>,
        basepoint: CVector,
        outward: Orientation,
    ) -> Self {
        DomainSpec {
            kind: DomainKind::Custom,
            rho,
            basepoint,
            outward,
        }
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn tag(&self) -> &'static str {
        self.kind.tag()
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn defining(&self) -> &dyn DefiningFunction {
        self.rho.as_ref()
    }

    pub fn defining_arc(&self) -> Arc<dyn DefiningFunction> {
        self.rho.clone()
    }

    pub fn rho(&self, z: &CVector) -> f64 {
        self.rho.value(z)
    }

    pub fn neighborhood(&self) -> Neighborhood {
        self.rho.neighborhood()
    }

    pub fn contains(&self, z: &CVector) -> bool {
        self.neighborhood().contains(z) && self.rho(z) < 0.0
    }

    pub fn basepoint(&self) -> &CVector {
        &self.basepoint
    }

    pub fn outward(&self) -> Orientation {
        self.outward
    }

    /// Euclidean ball `B(c, R) ⊇ Ω ∩ U`, when one is known.
    pub fn enclosing_ball(&self) -> Option<(CVector, f64)> {
        let n = self.dim();
        match &self.kind {
            DomainKind::Ball { center, radius } => Some((center.clone(), *radius)),
            DomainKind::Ellipsoid { weights } => {
                let wmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
                Some((CVector::zeros(n), 1.0 / wmin.sqrt()))
            }
            DomainKind::PerturbedBall { beta } => {
                perturbed_enclosing_radius(*beta).map(|r| (CVector::zeros(n), r))
            }
            DomainKind::KobayashiBall { .. } => Some((CVector::zeros(n), 1.0)),
            DomainKind::Quadric {
                weights,
                center,
                linear,
                constant,
            } => {
                let wmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
                if wmin > 0.0 && *linear == 0.0 && *constant > 0.0 {
                    Some((center.clone(), (constant / wmin).sqrt()))
                } else {
                    None
                }
            }
            DomainKind::Siegel | DomainKind::Custom => None,
        }
    }
}

/// Radius `R ∈ (1, 1.5)` with `R² − |β|R³ = 1`; beyond it `ρ > 0` inside `U`.
fn perturbed_enclosing_radius(beta: f64) -> Option<f64> {
    let b = beta.abs();
    let g = |r: f64| r * r - b * r * r * r - 1.0;
    if b == 0.0 {
        return Some(1.0);
    }
    if g(1.5) <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (1.0, 1.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[derive(Debug, Clone)]
struct QuadricRho {
    weights: Vec<f64>,
    center: CVector,
    linear: f64,
    constant: f64,
    nbhd: Neighborhood,
}

impl DefiningFunction for QuadricRho {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, z: &CVector) -> f64 {
        let mut s = self.linear * z[0].re - self.constant;
        for k in 0..z.len() {
            s += self.weights[k] * (z[k] - self.center[k]).norm_sqr();
        }
        s
    }

    fn neighborhood(&self) -> Neighborhood {
        self.nbhd.clone()
    }

    fn complex_gradient(&self, z: &CVector) -> CVector {
        let mut a = CVector::from_iterator(
            z.len(),
            (0..z.len()).map(|k| (z[k] - self.center[k]).conj() * self.weights[k]),
        );
        a[0] += Complex64::new(0.5 * self.linear, 0.0);
        a
    }

    fn second_differential(&self, _z: &CVector, v: &CVector, w: &CVector) -> f64 {
        2.0 * (0..v.len())
            .map(|k| self.weights[k] * (v[k] * w[k].conj()).re)
            .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
struct PerturbedBallRho {
    dim: usize,
    beta: f64,
}

impl DefiningFunction for PerturbedBallRho {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &CVector) -> f64 {
        norm_sqr(z) - 1.0 + self.beta * z[1].re * z[1].norm_sqr()
    }

    fn neighborhood(&self) -> Neighborhood {
        Neighborhood {
            center: CVector::zeros(self.dim),
            radius: 1.5,
        }
    }

    fn complex_gradient(&self, z: &CVector) -> CVector {
        let mut a = z.map(|c| c.conj());
        // ∂/∂z (x|z|²) = |z|²/2 + x z̄
        let z2 = z[1];
        a[1] += (Complex64::new(0.5 * z2.norm_sqr(), 0.0) + z2.conj() * z2.re) * self.beta;
        a
    }

    fn second_differential(&self, z: &CVector, v: &CVector, w: &CVector) -> f64 {
        let base = 2.0 * (0..v.len()).map(|k| (v[k] * w[k].conj()).re).sum::<f64>();
        // x³ + x y² has Hessian [[6x, 2y], [2y, 2x]]
        let (x, y) = (z[1].re, z[1].im);
        let (vx, vy, wx, wy) = (v[1].re, v[1].im, w[1].re, w[1].im);
        let cubic = 6.0 * x * vx * wx + 2.0 * y * (vx * wy + vy * wx) + 2.0 * x * vy * wy;
        base + self.beta * cubic
    }
}

#[derive(Debug, Clone)]
struct KobayashiBallRho {
    mobius: Mobius,
    s2: f64,
}

impl DefiningFunction for KobayashiBallRho {
    fn dim(&self) -> usize {
        self.mobius.center().len()
    }

    fn value(&self, z: &CVector) -> f64 {
        match self.mobius.eval(z) {
            Ok(w) => norm_sqr(&w) - self.s2,
            Err(_) => f64::INFINITY,
        }
    }

    fn neighborhood(&self) -> Neighborhood {
        Neighborhood {
            center: CVector::zeros(self.dim()),
            radius: 1.0,
        }
    }

    fn complex_gradient(&self, z: &CVector) -> CVector {
        match (self.mobius.eval(z), self.mobius.jacobian(z)) {
            (Ok(w), Ok(j)) => j.transpose() * w.map(|c| c.conj()),
            _ => super::fd_complex_gradient(self, z),
        }
    }
}
