use std::fmt;
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::flow::{Observable, Stage, UnitTangentState};
use crate::geometry::SurfaceModel;
use crate::riccati::{hopf_minus, DEFAULT_TOL};

use super::{observe_node, Node};

/// A potential `V` on the unit tangent bundle, written as `c·r_- + W` with a
/// fixed coefficient `c` and an explicitly evaluable remainder `W`.
#[derive(Clone)]
pub enum PotentialSpec {
    Zero,
    RMinus,
    HalfRMinus,
    Constant(f64),
    Custom(Observable),
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            other => write!(f, "{}", other.id()),
        }
    }
}

impl PotentialSpec {
    pub fn custom(f: impl Fn(&UnitTangentState) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Observable::custom(f))
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::RMinus => "r_minus",
            Self::HalfRMinus => "half_r_minus",
            Self::Constant(_) | Self::Custom(_) => "custom",
        }
    }

    /// Coefficient of `r_-` in `V`.
    pub fn r_weight(&self) -> f64 {
        match self {
            Self::RMinus => 1.0,
            Self::HalfRMinus => 0.5,
            _ => 0.0,
        }
    }

    /// `true` when evaluation along orbits needs the transported `r_-`.
    pub(crate) fn needs_r(&self) -> bool {
        self.r_weight() != 0.0 || matches!(self, Self::Custom(Observable::RMinus))
    }

    /// `true` when `U_-(V) = 0` identically.
    pub fn is_horocyclically_constant(&self) -> bool {
        matches!(self, Self::Zero | Self::Constant(_))
    }

    /// `V` at a flow stage, given the transported value `r` of `r_-` there.
    #[inline]
    pub(crate) fn at_stage(&self, st: &Stage, r: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::RMinus => r,
            Self::HalfRMinus => 0.5 * r,
            Self::Constant(c) => *c,
            Self::Custom(Observable::Custom(f)) => match UnitTangentState::from_chart(st.z, st.theta) {
                Ok(s) => f(&s),
                Err(_) => f64::NAN,
            },
            Self::Custom(Observable::Curvature) => st.curvature(),
            Self::Custom(Observable::RMinus) => r,
            Self::Custom(Observable::One) => 1.0,
        }
    }

    /// `V` at a node of an orbit table.
    #[inline]
    pub(crate) fn at_node(&self, n: &Node) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::RMinus => n.r,
            Self::HalfRMinus => 0.5 * n.r,
            Self::Constant(c) => *c,
            Self::Custom(obs) => observe_node(obs, n),
        }
    }

    /// Pointwise value, with `r_-` from its Hopf limit at tolerance 1e-6.
    pub fn evaluate(&self, model: &SurfaceModel, s: &UnitTangentState) -> Result<f64> {
        Ok(match self {
            Self::Zero => 0.0,
            Self::RMinus => hopf_minus(model, s, DEFAULT_TOL)?.value,
            Self::HalfRMinus => 0.5 * hopf_minus(model, s, DEFAULT_TOL)?.value,
            Self::Constant(c) => *c,
            Self::Custom(Observable::Custom(f)) => f(s),
            Self::Custom(Observable::Curvature) => model.curvature_at(&s.base)?,
            Self::Custom(Observable::RMinus) => hopf_minus(model, s, DEFAULT_TOL)?.value,
            Self::Custom(Observable::One) => 1.0,
        })
    }
}

impl FromStr for PotentialSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(Self::Zero),
            "r-" | "r_minus" | "r-minus" => Ok(Self::RMinus),
            "half-r-" | "half_r_minus" | "half-r-minus" => Ok(Self::HalfRMinus),
            other => other
                .parse::<f64>()
                .map(Self::Constant)
                .map_err(|_| LabError::InvalidArgument(format!("unknown potential '{other}'"))),
        }
    }
}
