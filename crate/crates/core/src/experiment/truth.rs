use serde::{Deserialize, Serialize};

use crate::oracle::{ErrorBoundParams, MeanExpansion, Oracle, Prediction};
use crate::rigid_body::{BodyState, Mat3x6, Mat6, Vec3, Vec6};

/// Closed-form disturbances acting on the simulated plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disturbance {
    /// `f = [0, 0, 2 sin x₁ + exp(−5x₂²) − 9.81]`,
    /// `f_ω = [2 exp(−x₁² − x₂²) + ω₁ cos²x₂, 0, 0]`.
    #[default]
    WindField,
    /// `f = [0, 0, −9.81]`, `f_ω = 0`.
    GravityOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TruthModel {
    pub disturbance: Disturbance,
}

impl TruthModel {
    pub fn new(disturbance: Disturbance) -> Self {
        TruthModel { disturbance }
    }

    pub fn force(&self, x: &Vec6) -> Vec3 {
        match self.disturbance {
            Disturbance::WindField => Vec3::new(0.0, 0.0, 2.0 * x[0].sin() + (-5.0 * x[1] * x[1]).exp() - 9.81),
            Disturbance::GravityOnly => Vec3::new(0.0, 0.0, -9.81),
        }
    }

    pub fn torque(&self, s: &BodyState) -> Vec3 {
        match self.disturbance {
            Disturbance::WindField => {
                let (x1, x2) = (s.p.x, s.p.y);
                let c = x2.cos();
                Vec3::new(2.0 * (-x1 * x1 - x2 * x2).exp() + s.omega.x * c * c, 0.0, 0.0)
            }
            Disturbance::GravityOnly => Vec3::zeros(),
        }
    }

    /// `[f(x); f_ω(s)]`
    pub fn output(&self, s: &BodyState) -> Vec6 {
        let f = self.force(&s.x());
        let t = self.torque(s);
        Vec6::new(f.x, f.y, f.z, t.x, t.y, t.z)
    }

    /// Analytic expansion of `f` around `x`.
    pub fn expansion(&self, s: &BodyState) -> MeanExpansion {
        let mut exp = MeanExpansion::constant(self.output(s));
        if self.disturbance == Disturbance::WindField {
            let (x1, x2) = (s.p.x, s.p.y);
            let g = (-5.0 * x2 * x2).exp();
            let mut jac = Mat3x6::zeros();
            jac[(2, 0)] = 2.0 * x1.cos();
            jac[(2, 1)] = -10.0 * x2 * g;
            let mut h = Mat6::zeros();
            h[(0, 0)] = -2.0 * x1.sin();
            h[(1, 1)] = (100.0 * x2 * x2 - 10.0) * g;
            exp.jac_f = jac;
            exp.hess_f[2] = h;
        }
        exp
    }
}

/// The exact disturbance as an oracle with zero uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TruthOracle(pub TruthModel);

impl Oracle for TruthOracle {
    fn predict(&self, s: &BodyState) -> Prediction {
        Prediction {
            mean: self.0.output(s),
            var: Vec6::zeros(),
        }
    }

    fn expand(&self, s: &BodyState) -> MeanExpansion {
        self.0.expansion(s)
    }

    fn error_bound(&self, _s: &BodyState, _ebp: &ErrorBoundParams) -> f64 {
        0.0
    }
}
