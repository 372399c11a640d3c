use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::{Observable, UnitTangentState};
use crate::geometry::{octagon, Bump, BumpField};

/// Word budget for test-function bump sums.
const BUDGET: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub constant: f64,
    pub scalar: Vec<Bump>,
    pub dipole: Vec<Bump>,
    pub quadrupole: Vec<Bump>,
}

/// A smooth Γ-invariant function on the unit tangent bundle,
///
/// ```text
/// f(z, θ) = c + h₀(z) + D_θh₁(z) + (D_θh₂(z))²,
/// D_θh = ((1 − |z|²)/2)(cos θ ∂_u h + sin θ ∂_v h),
/// ```
///
/// with `h_i` Γ-periodic bump sums. `D_θh` is the derivative of `h` along
/// the hyperbolic unit vector at conformal angle `θ`, which is invariant
/// under deck transformations, so `f` is a well-defined function on `SM`
/// that is not invariant under the flow.
#[derive(Clone)]
pub struct TestFunction {
    spec: TestFunctionSpec,
    fields: Arc<[BumpField; 3]>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({:?})", self.spec)
    }
}

impl TestFunction {
    pub fn new(spec: TestFunctionSpec) -> Result<Self> {
        let fields = [
            BumpField::new(&spec.scalar, BUDGET)?,
            BumpField::new(&spec.dipole, BUDGET)?,
            BumpField::new(&spec.quadrupole, BUDGET)?,
        ];
        Ok(Self {
            spec,
            fields: Arc::new(fields),
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(TestFunctionSpec {
            constant: c,
            scalar: vec![],
            dipole: vec![],
            quadrupole: vec![],
        })
        .expect("constant test function")
    }

    /// Two bumps per component with centres in the fundamental domain.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bumps = |scale: f64| -> Vec<Bump> {
            (0..2)
                .map(|_| {
                    let c = loop {
                        let c = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
                        if octagon().contains(num_complex::Complex64::new(c[0], c[1])) {
                            break c;
                        }
                    };
                    Bump {
                        center: c,
                        radius: rng.gen_range(0.7..1.4),
                        amplitude: scale * rng.gen_range(-1.0..1.0),
                    }
                })
                .collect()
        };
        let scalar = bumps(1.0);
        let dipole = bumps(1.0);
        let quadrupole = bumps(0.5);
        let constant = rng.gen_range(-0.5..0.5);
        Self::new(TestFunctionSpec {
            constant,
            scalar,
            dipole,
            quadrupole,
        })
        .expect("radii below half the systole")
    }

    pub fn spec(&self) -> &TestFunctionSpec {
        &self.spec
    }

    pub fn is_constant(&self) -> bool {
        self.fields.iter().all(|f| f.is_empty())
    }

    pub fn evaluate(&self, s: &UnitTangentState) -> Result<f64> {
        let z = s.z();
        let w = (1.0 - z.norm_sqr()) / 2.0;
        let (sn, cs) = s.theta.sin_cos();
        let [h0, h1, h2] = &*self.fields;
        let a = h0.gradient(z)?;
        let b = h1.gradient(z)?;
        let c = h2.gradient(z)?;
        let d2 = w * (cs * c[1] + sn * c[2]);
        Ok(self.spec.constant + a[0] + w * (cs * b[1] + sn * b[2]) + d2 * d2)
    }

    /// Exact chart gradient `(∂_u f, ∂_v f, ∂_θ f)`.
    pub fn chart_gradient(&self, s: &UnitTangentState) -> Result<[f64; 3]> {
        let z = s.z();
        let (u, v) = (z.re, z.im);
        let w = (1.0 - z.norm_sqr()) / 2.0;
        let (sn, cs) = s.theta.sin_cos();
        let [h0, h1, h2] = &*self.fields;
        let a = h0.jet(z)?;
        let b = h1.jet(z)?;
        let c = h2.jet(z)?;
        // D_θh and its chart derivatives
        let d = |j: &crate::jet::Jet2| -> [f64; 4] {
            let lin = cs * j.du + sn * j.dv;
            [
                w * lin,
                -u * lin + w * (cs * j.duu + sn * j.duv),
                -v * lin + w * (cs * j.duv + sn * j.dvv),
                w * (-sn * j.du + cs * j.dv),
            ]
        };
        let db = d(&b);
        let dc = d(&c);
        Ok([
            a.du + db[1] + 2.0 * dc[0] * dc[1],
            a.dv + db[2] + 2.0 * dc[0] * dc[2],
            db[3] + 2.0 * dc[0] * dc[3],
        ])
    }

    /// As an observable; evaluation failures become NaN.
    pub fn observable(&self) -> Observable {
        let f = self.clone();
        Observable::custom(move |s| f.evaluate(s).unwrap_or(f64::NAN))
    }
}

/// Named functions for manifests and the command line: `one`, `curvature`,
/// `r_minus`, `bump:<seed>` (a random [`TestFunction`]) or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionId {
    Constant(f64),
    Curvature,
    RMinus,
    Random(u64),
}

impl FunctionId {
    pub fn observable(&self) -> Observable {
        match *self {
            Self::Constant(c) if c == 1.0 => Observable::One,
            Self::Constant(c) => Observable::custom(move |_| c),
            Self::Curvature => Observable::Curvature,
            Self::RMinus => Observable::RMinus,
            Self::Random(seed) => TestFunction::random(seed).observable(),
        }
    }
}

impl FromStr for FunctionId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Self::Constant(1.0)),
            "curvature" | "K" => Ok(Self::Curvature),
            "r_minus" | "r-" => Ok(Self::RMinus),
            other => {
                if let Some(seed) = other.strip_prefix("bump:") {
                    return seed
                        .parse()
                        .map(Self::Random)
                        .map_err(|_| LabError::InvalidArgument(format!("bad seed in '{other}'")));
                }
                other
                    .parse()
                    .map(Self::Constant)
                    .map_err(|_| LabError::InvalidArgument(format!("unknown function '{other}'")))
            }
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) if *c == 1.0 => write!(f, "one"),
            Self::Constant(c) => write!(f, "{c}"),
            Self::Curvature => write!(f, "curvature"),
            Self::RMinus => write!(f, "r_minus"),
            Self::Random(seed) => write!(f, "bump:{seed}"),
        }
    }
}
