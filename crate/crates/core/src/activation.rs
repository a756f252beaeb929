//! Activation functions and their local inverses.
//!
//! Besides `σ` and `σ'`, each activation exposes its inverse `τ` with the
//! first two derivatives, and a cancellation-free difference
//! `σ(z) - σ(z0)`. The scaled construction evaluates `σ` on an interval of
//! width ~1e-9 around an anchor, where the naive subtraction loses every
//! significant digit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Half-range and input scale of the scaled logistic `S(z) = 2000/(1+e^{-z/500}) - 1000`.
const SCALED_RANGE: f64 = 1000.0;
const SCALED_WIDTH: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Logistic,
    Tanh,
    ScaledLogistic,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `logistic(a) - logistic(b)` without cancellation.
fn logistic_delta(a: f64, b: f64) -> f64 {
    -logistic(a) * logistic(-b) * (-(a - b)).exp_m1()
}

fn logit(y: f64) -> f64 {
    (y / (1.0 - y)).ln()
}

fn logit_prime(y: f64) -> f64 {
    1.0 / (y * (1.0 - y))
}

fn logit_second(y: f64) -> f64 {
    let q = y * (1.0 - y);
    (2.0 * y - 1.0) / (q * q)
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Identity,
        Activation::Logistic,
        Activation::Tanh,
        Activation::ScaledLogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
            Activation::ScaledLogistic => "scaled_logistic",
        }
    }

    pub fn is_identity(self) -> bool {
        self == Activation::Identity
    }

    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Logistic => logistic(z),
            Activation::Tanh => z.tanh(),
            Activation::ScaledLogistic => 2.0 * SCALED_RANGE * logistic(z / SCALED_WIDTH) - SCALED_RANGE,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Logistic => {
                let s = logistic(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::ScaledLogistic => {
                let s = logistic(z / SCALED_WIDTH);
                2.0 * SCALED_RANGE / SCALED_WIDTH * s * (1.0 - s)
            }
        }
    }

    /// `σ(z) - σ(anchor)`, accurate when `z` is close to `anchor`.
    pub fn delta(self, z: f64, anchor: f64) -> f64 {
        match self {
            Activation::Identity => z - anchor,
            Activation::Logistic => logistic_delta(z, anchor),
            Activation::Tanh => (z - anchor).sinh() / (z.cosh() * anchor.cosh()),
            Activation::ScaledLogistic => 2.0 * SCALED_RANGE * logistic_delta(z / SCALED_WIDTH, anchor / SCALED_WIDTH),
        }
    }

    /// Local inverse `τ` with `τ(σ(z)) = z`.
    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Activation::Identity => y,
            Activation::Logistic => logit(y),
            Activation::Tanh => y.atanh(),
            Activation::ScaledLogistic => SCALED_WIDTH * logit((y + SCALED_RANGE) / (2.0 * SCALED_RANGE)),
        }
    }

    pub fn inverse_derivative(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Logistic => logit_prime(y),
            Activation::Tanh => 1.0 / (1.0 - y * y),
            Activation::ScaledLogistic => {
                let p = (y + SCALED_RANGE) / (2.0 * SCALED_RANGE);
                SCALED_WIDTH / (2.0 * SCALED_RANGE) * logit_prime(p)
            }
        }
    }

    pub fn inverse_second_derivative(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 0.0,
            Activation::Logistic => logit_second(y),
            Activation::Tanh => {
                let q = 1.0 - y * y;
                2.0 * y / (q * q)
            }
            Activation::ScaledLogistic => {
                let p = (y + SCALED_RANGE) / (2.0 * SCALED_RANGE);
                let s = 2.0 * SCALED_RANGE;
                SCALED_WIDTH / (s * s) * logit_second(p)
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            "tanh" => Ok(Activation::Tanh),
            "scaled_logistic" | "scaled-logistic" => Ok(Activation::ScaledLogistic),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips_near_the_origin() {
        for act in Activation::ALL {
            for k in -20..=20 {
                let z = k as f64 * 0.05;
                let back = act.inverse(act.eval(z));
                assert!((back - z).abs() < 1e-10, "{act}: {z} -> {back}");
            }
        }
    }

    #[test]
    fn delta_matches_naive_difference_away_from_anchor() {
        for act in Activation::ALL {
            for (z, a) in [(0.7, -0.2), (-1.5, 0.3), (2.0, 2.5)] {
                let naive = act.eval(z) - act.eval(a);
                assert!((act.delta(z, a) - naive).abs() < 1e-12 * (1.0 + naive.abs()) * 1e3);
            }
        }
    }

    #[test]
    fn delta_keeps_precision_for_tiny_offsets() {
        let z: f64 = 3e-12;
        // logistic(z) - 1/2 = tanh(z/2)/2.
        let expected = 0.5 * (z / 2.0).tanh();
        let got = Activation::Logistic.delta(z, 0.0);
        assert!(((got - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        for act in Activation::ALL {
            for z in [-0.8, 0.0, 0.4] {
                let fd = (act.eval(z + h) - act.eval(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-6);
                let y = act.eval(z);
                let hy = 1e-6 * act.derivative(z);
                let fd1 = (act.inverse(y + hy) - act.inverse(y - hy)) / (2.0 * hy);
                assert!((fd1 - act.inverse_derivative(y)).abs() < 1e-5 * fd1.abs().max(1.0));
                let fd2 = (act.inverse_derivative(y + hy) - act.inverse_derivative(y - hy)) / (2.0 * hy);
                let exact = act.inverse_second_derivative(y);
                assert!((fd2 - exact).abs() < 1e-4 * exact.abs().max(1e-6), "{act} {z}");
            }
        }
    }

    #[test]
    fn scaled_logistic_has_unit_slope_at_zero() {
        assert_eq!(Activation::ScaledLogistic.eval(0.0), 0.0);
        assert!((Activation::ScaledLogistic.derivative(0.0) - 1.0).abs() < 1e-15);
    }
}
