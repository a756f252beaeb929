//! Non-linear gluing that tracks the optimal linear stack.
//!
//! Given the linear minimiser `g0 = Σ θ*_j f_j` and an activation `σ` with
//! `σ'(z0) ≠ 0`, the scaled network
//!
//! ```text
//! g_ε(x) = L1(σ(L0(x))),   L0(x) = g0(x)/M0 + z0,   L1(y) = M0 τ'(y0) (y − y0)
//! ```
//!
//! squeezes every record into a window `(z0 − γ, z0 + γ)` where `σ` is
//! almost affine, then undoes the squeeze with the first-order inverse.
//! The constants below bound the second-order Taylor remainder of the
//! inverse `τ` so that `|g_ε − g0| < M0 M1 γ² < ε` on every record.
//!
//! [`select_epsilon`] picks an `ε` small enough that the wrapped network
//! keeps two thirds of the linear stack's improvement over the best
//! single component.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::{sse, OutputVector};
use crate::error::{Error, Result};
use crate::stacker::{combine, StackSolution};

/// Grid resolution for the suprema over the closed window.
pub const GRID_POINTS: usize = 1024;

/// Multiplier applied to grid maxima before they are used as bounds.
pub const SAFETY_FACTOR: f64 = 2.0;

/// An activation together with the anchor `z0` and the half-width `γ0` of
/// the window on which it is inverted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationProfile {
    pub activation: Activation,
    pub z0: f64,
    pub y0: f64,
    pub gamma0: f64,
}

impl ActivationProfile {
    /// Anchor at `z0 = 0` with `γ0 = 1`.
    pub fn new(activation: Activation) -> Result<Self> {
        Self::with_anchor(activation, 0.0, 1.0)
    }

    /// Anchor where `|σ''|` is largest, with `γ0 = 1`. Away from the
    /// inflection point `τ''(y0) ≠ 0`, so the scaled network keeps a
    /// second-order non-linear term instead of a third-order one.
    pub fn curved(activation: Activation) -> Result<Self> {
        let peak = (2.0 + 3f64.sqrt()).ln();
        let z0 = match activation {
            Activation::Identity => 0.0,
            Activation::Logistic => peak,
            Activation::Tanh => (1.0 / 3f64.sqrt()).atanh(),
            Activation::ScaledLogistic => 500.0 * peak,
        };
        Self::with_anchor(activation, z0, 1.0)
    }

    pub fn with_anchor(activation: Activation, z0: f64, gamma0: f64) -> Result<Self> {
        if !(z0.is_finite() && gamma0.is_finite() && gamma0 > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "anchor {z0} and half-width {gamma0} must be finite, half-width positive"
            )));
        }
        let slope = activation.derivative(z0);
        if slope == 0.0 || !slope.is_finite() {
            return Err(Error::InvalidProfile(format!(
                "{activation} has zero derivative at z0 = {z0}"
            )));
        }
        let mut profile = Self {
            activation,
            z0,
            y0: activation.eval(z0),
            gamma0,
        };
        // Shrink until σ' keeps its sign on the window (never triggers for
        // the built-in activations).
        while profile.grid().any(|z| activation.derivative(z) * slope <= 0.0) {
            profile.gamma0 /= 2.0;
            if profile.gamma0 < 1e-12 {
                return Err(Error::InvalidProfile(format!(
                    "{activation} is not monotone near z0 = {z0}"
                )));
            }
        }
        Ok(profile)
    }

    /// Evenly spaced points covering the closed window `[z0 − γ0, z0 + γ0]`.
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let lo = self.z0 - self.gamma0;
        let step = 2.0 * self.gamma0 / (GRID_POINTS - 1) as f64;
        (0..GRID_POINTS).map(move |i| lo + step * i as f64)
    }

    pub fn tau(&self, y: f64) -> f64 {
        self.activation.inverse(y)
    }

    pub fn tau_prime(&self, y: f64) -> f64 {
        self.activation.inverse_derivative(y)
    }

    pub fn tau_second(&self, y: f64) -> f64 {
        self.activation.inverse_second_derivative(y)
    }

    /// `max{1, sup 2((σ(z) − σ(z0))/(z − z0))²}` over the window.
    fn difference_quotient_bound(&self) -> f64 {
        let act = self.activation;
        let sup = self
            .grid()
            .map(|z| {
                let q = if (z - self.z0).abs() < 1e-12 {
                    act.derivative(self.z0)
                } else {
                    act.delta(z, self.z0) / (z - self.z0)
                };
                2.0 * q * q
            })
            .fold(0.0, f64::max);
        (SAFETY_FACTOR * sup).max(1.0)
    }

    /// `max{1, sup |τ''(σ(z))|}` over the window.
    fn inverse_curvature_bound(&self) -> f64 {
        let sup = self
            .grid()
            .map(|z| self.tau_second(self.activation.eval(z)).abs())
            .fold(0.0, f64::max);
        (SAFETY_FACTOR * sup).max(1.0)
    }
}

/// Constants and affine maps of one scaled network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledPlan {
    pub activation: Activation,
    pub z0: f64,
    pub y0: f64,
    pub m_g: f64,
    pub m_sigma: f64,
    pub m_tau: f64,
    pub m_gamma: i32,
    pub gamma0: f64,
    pub gamma: f64,
    pub m0: f64,
    pub m1: f64,
    pub epsilon: f64,
    /// Coefficients of `L0` over the stacked outputs (bias first, `z0` included).
    pub l0: Vec<f64>,
    pub l1_slope: f64,
    pub l1_intercept: f64,
}

impl ScaledPlan {
    /// `M0 M1 γ²`, the proven pointwise deviation bound.
    pub fn deviation_bound(&self) -> f64 {
        self.m0 * self.m1 * self.gamma * self.gamma
    }

    /// `L1(σ(z))`, with the `σ` difference taken relative to `z0`.
    pub fn output_map(&self, z: f64) -> f64 {
        self.l1_slope * self.activation.delta(z, self.z0) + (self.l1_slope * self.y0 + self.l1_intercept)
    }

    /// `L1(y)` as an affine map of the activation output.
    pub fn l1(&self, y: f64) -> f64 {
        self.l1_slope * y + self.l1_intercept
    }
}

/// Builds the scaled network that stays within `epsilon` of the linear stack
/// `g0` on every record of `outputs`.
pub fn build_scaled_plan(
    g0: &StackSolution,
    outputs: &[OutputVector],
    profile: &ActivationProfile,
    epsilon: f64,
) -> Result<ScaledPlan> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if g0.theta.len() != outputs.len() {
        return Err(Error::Dimension {
            what: "stacked outputs",
            expected: g0.theta.len(),
            got: outputs.len(),
        });
    }
    let linear = combine(&g0.theta, outputs);

    let m_g = linear.iter().map(|g| 2.0 * g.abs()).fold(1.0, f64::max);
    let m_sigma = profile.difference_quotient_bound();
    let m_tau = profile.inverse_curvature_bound();
    let m_gamma = (m_g * m_sigma * m_tau / epsilon).log2().ceil() as i32 + 1;
    let gamma = profile.gamma0.min(2f64.powi(-m_gamma));
    let m0 = m_g / gamma;
    let m1 = m_sigma * m_tau;

    let mut l0: Vec<f64> = g0.theta.iter().map(|t| t / m0).collect();
    l0[0] += profile.z0;
    let tp = profile.tau_prime(profile.y0);
    let l1_slope = m0 * tp;
    let l1_intercept = -(l1_slope * profile.y0);

    let plan = ScaledPlan {
        activation: profile.activation,
        z0: profile.z0,
        y0: profile.y0,
        m_g,
        m_sigma,
        m_tau,
        m_gamma,
        gamma0: profile.gamma0,
        gamma,
        m0,
        m1,
        epsilon,
        l0,
        l1_slope,
        l1_intercept,
    };

    let scaled = evaluate_scaled(&plan, outputs)?;
    for (record, (a, b)) in scaled.iter().zip(&linear).enumerate() {
        let deviation = (a - b).abs();
        if deviation >= epsilon {
            return Err(Error::ApproximationFailed {
                record,
                deviation,
                epsilon,
            });
        }
    }
    Ok(plan)
}

/// Evaluates `L1(σ(L0(·)))` on every record.
pub fn evaluate_scaled(plan: &ScaledPlan, outputs: &[OutputVector]) -> Result<OutputVector> {
    if plan.l0.len() != outputs.len() {
        return Err(Error::Dimension {
            what: "stacked outputs",
            expected: plan.l0.len(),
            got: outputs.len(),
        });
    }
    let hidden = combine(&plan.l0, outputs);
    let (lo, hi) = (plan.z0 - plan.gamma, plan.z0 + plan.gamma);
    let mut out = Vec::with_capacity(hidden.len());
    for (record, &z) in hidden.iter().enumerate() {
        if !(z > lo && z < hi) {
            return Err(Error::EscapedInterval {
                record,
                value: z,
                lo,
                hi,
            });
        }
        out.push(plan.output_map(z));
    }
    OutputVector::new(out)
}

/// The approximation budget that keeps the wrapped network strictly better
/// than the best single component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    /// Largest absolute residual of the linear stack.
    pub m2: f64,
    pub epsilon: f64,
    /// `(E(f_j*) + 2 E(g0)) / 3`.
    pub target_loss_bound: f64,
    pub g0_loss: f64,
    pub best_component_loss: f64,
    pub n: usize,
}

/// `ε = (E(f_j*) − E(g0)) / (4N(2M2 + 1))`.
// Negated comparisons also reject NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn select_epsilon(g0_loss: f64, best_component_loss: f64, g0_residual_max: f64, n: usize) -> Result<EpsilonBudget> {
    if !(g0_loss < best_component_loss) {
        return Err(Error::NoImprovement {
            composite: g0_loss,
            best: best_component_loss,
        });
    }
    if n == 0 || !(g0_residual_max >= 0.0) {
        return Err(Error::Config(
            "budget needs N ≥ 1 and a non-negative residual bound".into(),
        ));
    }
    let gap = best_component_loss - g0_loss;
    Ok(EpsilonBudget {
        m2: g0_residual_max,
        epsilon: gap / (4.0 * n as f64 * (2.0 * g0_residual_max + 1.0)),
        target_loss_bound: (best_component_loss + 2.0 * g0_loss) / 3.0,
        g0_loss,
        best_component_loss,
        n,
    })
}

/// Budget for a solved stack: reads `M2` off the residuals of `g0`.
pub fn epsilon_budget(g0: &StackSolution, outputs: &[OutputVector], targets: &[f64]) -> Result<EpsilonBudget> {
    let linear = combine(&g0.theta, outputs);
    let m2 = linear
        .iter()
        .zip(targets)
        .map(|(g, y)| (g - y).abs())
        .fold(0.0, f64::max);
    select_epsilon(g0.sse, g0.best_unit_sse, m2, targets.len())
}

/// A scaled network built with the budgeted `ε` (capped at 1), together with
/// its measured loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrappedStack {
    pub plan: ScaledPlan,
    pub budget: EpsilonBudget,
    pub sse: f64,
}

/// Wraps the linear stack `g0` in `activation` so that the result is still
/// strictly better than every single output.
pub fn wrap_stack(
    g0: &StackSolution,
    outputs: &[OutputVector],
    targets: &[f64],
    activation: Activation,
) -> Result<WrappedStack> {
    wrap_stack_with(g0, outputs, targets, &ActivationProfile::new(activation)?)
}

/// [`wrap_stack`] with an explicit activation profile.
pub fn wrap_stack_with(
    g0: &StackSolution,
    outputs: &[OutputVector],
    targets: &[f64],
    profile: &ActivationProfile,
) -> Result<WrappedStack> {
    let budget = epsilon_budget(g0, outputs, targets)?;
    let plan = build_scaled_plan(g0, outputs, profile, budget.epsilon.min(1.0))?;
    let sse = sse(&evaluate_scaled(&plan, outputs)?, targets);
    Ok(WrappedStack { plan, budget, sse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stacker::stack;

    fn ov(v: &[f64]) -> OutputVector {
        OutputVector::new(v.to_vec()).unwrap()
    }

    fn small_instance() -> (Vec<OutputVector>, Vec<f64>) {
        let y = vec![1.0, 2.5, -0.5, 0.75, 3.0];
        let outputs = vec![
            OutputVector::ones(5),
            ov(&[0.9, 2.0, 0.1, 1.0, 2.0]),
            ov(&[1.5, 2.0, -1.0, 0.0, 3.5]),
        ];
        (outputs, y)
    }

    #[test]
    fn logistic_anchor_at_zero() {
        let profile = ActivationProfile::new(Activation::Logistic).unwrap();
        assert_eq!(profile.y0, 0.5);
        assert!((profile.tau_prime(0.5) - 4.0).abs() < 1e-15);
        let (outputs, y) = small_instance();
        let g0 = stack(&outputs, &y).unwrap();
        let plan = build_scaled_plan(&g0, &outputs, &profile, 0.5).unwrap();
        assert!((plan.l1_slope - 4.0 * plan.m0).abs() < 1e-9 * plan.m0);
        assert!((plan.l1_intercept + 2.0 * plan.m0).abs() < 1e-9 * plan.m0);
        assert!((plan.l1(0.5)).abs() < 1e-9 * plan.m0);
    }

    #[test]
    fn identity_reproduces_linear_stack() {
        let (outputs, y) = small_instance();
        let g0 = stack(&outputs, &y).unwrap();
        let profile = ActivationProfile::new(Activation::Identity).unwrap();
        let plan = build_scaled_plan(&g0, &outputs, &profile, 0.1).unwrap();
        assert_eq!(plan.m_tau, 1.0);
        let out = evaluate_scaled(&plan, &outputs).unwrap();
        for (a, b) in out.iter().zip(combine(&g0.theta, &outputs)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_only_plan_is_constant() {
        let y = [1.0, 2.0, 4.0];
        let outputs = [OutputVector::ones(3)];
        let g0 = stack(&outputs, &y).unwrap();
        let profile = ActivationProfile::new(Activation::Tanh).unwrap();
        let plan = build_scaled_plan(&g0, &outputs, &profile, 0.1).unwrap();
        let out = evaluate_scaled(&plan, &outputs).unwrap();
        assert!(out.iter().all(|v| *v == out[0]));
        assert_eq!(out, evaluate_scaled(&plan, &outputs).unwrap());
    }

    #[test]
    fn budget_by_substitution() {
        let b = select_epsilon(6.0, 10.0, 2.0, 10).unwrap();
        assert!((b.epsilon - 0.02).abs() < 1e-15);
        assert!((b.target_loss_bound - 22.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            select_epsilon(10.0, 10.0, 2.0, 10),
            Err(Error::NoImprovement { .. })
        ));
    }

    #[test]
    fn rejects_bad_epsilon_and_flat_anchor() {
        let (outputs, y) = small_instance();
        let g0 = stack(&outputs, &y).unwrap();
        let profile = ActivationProfile::new(Activation::Logistic).unwrap();
        assert!(matches!(
            build_scaled_plan(&g0, &outputs, &profile, 0.0),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(matches!(
            build_scaled_plan(&g0, &outputs, &profile, 1.5),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(ActivationProfile::with_anchor(Activation::Tanh, 1e3, 1.0).is_err());
    }

    #[test]
    fn escaped_value_is_an_error() {
        let (outputs, y) = small_instance();
        let g0 = stack(&outputs, &y).unwrap();
        let profile = ActivationProfile::new(Activation::Logistic).unwrap();
        let mut plan = build_scaled_plan(&g0, &outputs, &profile, 0.5).unwrap();
        plan.l0[0] += 1.0;
        assert!(matches!(
            evaluate_scaled(&plan, &outputs),
            Err(Error::EscapedInterval { .. })
        ));
    }

    #[test]
    fn tau_inverts_sigma_on_the_window() {
        for act in Activation::ALL {
            let profile = ActivationProfile::new(act).unwrap();
            for z in profile.grid() {
                assert!((profile.tau(act.eval(z)) - z).abs() < 1e-10);
            }
        }
    }
}
