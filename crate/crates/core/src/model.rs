//! Longitudinal double-integrator vehicles sampled with a zero-order hold.
//!
//! Consensus is analysed in a frame moving at the target velocity `r`:
//! `p = x - k*T*r`, `q = v - r`. The sampled dynamics have the same form in
//! both frames, so the same stepping rule serves either.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite state or input (x={x}, v={v}, u={u})")]
    NonFinite { x: f64, v: f64, u: f64 },
    #[error("sampling period must be positive and finite (got {0})")]
    BadPeriod(f64),
}

/// Position (m) and velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub v: f64,
}

/// Position and velocity relative to the moving reference `k*T*r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedState {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Sampling period `T` in seconds.
    pub sample_period: f64,
    /// Target velocity `r` in m/s.
    pub target_velocity: f64,
}

impl ModelParams {
    pub fn new(sample_period: f64, target_velocity: f64) -> Result<Self, ModelError> {
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(ModelError::BadPeriod(sample_period));
        }
        Ok(Self {
            sample_period,
            target_velocity,
        })
    }

    /// Position of the moving reference at step `k` (may be negative for
    /// the warm-up history before step 0).
    pub fn reference_position(&self, k: i64) -> f64 {
        k as f64 * self.sample_period * self.target_velocity
    }
}

fn advance(pos: f64, vel: f64, u: f64, period: f64) -> Result<(f64, f64), ModelError> {
    if !(pos.is_finite() && vel.is_finite() && u.is_finite()) {
        return Err(ModelError::NonFinite { x: pos, v: vel, u });
    }
    let next = (
        pos + period * vel + 0.5 * period * period * u,
        vel + period * u,
    );
    if !(next.0.is_finite() && next.1.is_finite()) {
        return Err(ModelError::NonFinite {
            x: next.0,
            v: next.1,
            u,
        });
    }
    Ok(next)
}

impl VehicleState {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    /// One sampling period under constant acceleration `u`.
    pub fn step(self, u: f64, period: f64) -> Result<Self, ModelError> {
        let (x, v) = advance(self.x, self.v, u, period)?;
        Ok(Self { x, v })
    }

    pub fn to_transformed(self, k: i64, params: &ModelParams) -> TransformedState {
        TransformedState {
            p: self.x - params.reference_position(k),
            q: self.v - params.target_velocity,
        }
    }
}

impl TransformedState {
    pub fn step(self, u: f64, period: f64) -> Result<Self, ModelError> {
        let (p, q) = advance(self.p, self.q, u, period)?;
        Ok(Self { p, q })
    }

    pub fn to_vehicle(self, k: i64, params: &ModelParams) -> VehicleState {
        VehicleState {
            x: self.p + params.reference_position(k),
            v: self.q + params.target_velocity,
        }
    }
}

/// Free-function form of [`VehicleState::step`].
pub fn step(state: VehicleState, u: f64, period: f64) -> Result<VehicleState, ModelError> {
    state.step(u, period)
}

pub fn to_transformed(state: VehicleState, k: i64, params: &ModelParams) -> TransformedState {
    state.to_transformed(k, params)
}

pub fn from_transformed(ts: TransformedState, k: i64, params: &ModelParams) -> VehicleState {
    ts.to_vehicle(k, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_examples() {
        let rest = VehicleState::new(0.0, 0.0);
        assert_eq!(rest.step(0.0, 0.01).unwrap(), rest);
        assert_eq!(
            VehicleState::new(0.0, 1.0).step(0.0, 0.01).unwrap(),
            VehicleState::new(0.01, 1.0)
        );
        let s = VehicleState::new(0.0, 1.0).step(2.0, 0.01).unwrap();
        assert!((s.x - 0.0101).abs() < 1e-15);
        assert!((s.v - 1.02).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(VehicleState::new(0.0, 0.0).step(f64::NAN, 0.01).is_err());
        assert!(VehicleState::new(f64::INFINITY, 0.0)
            .step(0.0, 0.01)
            .is_err());
        assert!(ModelParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn transform_examples() {
        let params = ModelParams::new(0.01, 100.0).unwrap();
        let t0 = VehicleState::new(100.0, 100.0).to_transformed(0, &params);
        assert_eq!(t0, TransformedState { p: 100.0, q: 0.0 });
        let t10 = VehicleState::new(110.0, 100.0).to_transformed(10, &params);
        assert!((t10.p - 100.0).abs() < 1e-12);
        assert_eq!(t10.q, 0.0);
    }

    #[test]
    fn drift_accumulates_linearly() {
        let period = 0.01;
        let mut s = VehicleState::new(3.0, 7.0);
        for k in 1..=1000 {
            s = s.step(0.0, period).unwrap();
            let exact = 3.0 + k as f64 * period * 7.0;
            assert!((s.x - exact).abs() <= 1e-12 * k as f64 * exact.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn transform_round_trips(x in -1e4..1e4f64, v in -200.0..200.0f64, k in 0i64..100_000) {
            let params = ModelParams::new(0.01, 100.0).unwrap();
            let back = VehicleState::new(x, v).to_transformed(k, &params).to_vehicle(k, &params);
            prop_assert!((back.x - x).abs() <= 1e-9 * (1.0 + x.abs() + k as f64));
            prop_assert!((back.v - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }

        #[test]
        fn transform_commutes_with_dynamics(
            x in -1e3..1e3f64, v in -200.0..200.0f64, u in -50.0..50.0f64, k in 0i64..10_000
        ) {
            let params = ModelParams::new(0.01, 100.0).unwrap();
            let s = VehicleState::new(x, v);
            let via_raw = s.step(u, params.sample_period).unwrap().to_transformed(k + 1, &params);
            let via_frame = s.to_transformed(k, &params).step(u, params.sample_period).unwrap();
            let scale = 1.0 + x.abs() + k as f64;
            prop_assert!((via_raw.p - via_frame.p).abs() <= 1e-12 * scale * 8.0);
            prop_assert!((via_raw.q - via_frame.q).abs() <= 1e-12 * (1.0 + v.abs()) * 8.0);
        }
    }
}
