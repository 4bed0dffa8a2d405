//! Shared fixtures for the `minerdyn-core` benchmarks in `benches/`.

use minerdyn_core::{ControllerSpec, ModelParams, RewardPolicy};

pub fn base() -> ModelParams {
    ModelParams::new(2, 2, 100.0).expect("valid parameters")
}

/// Narrow-band feedback (`x_bar = 0.26`, `eps = 0.005`).
pub fn narrow_feedback() -> RewardPolicy {
    RewardPolicy::Feedback(
        ControllerSpec::new(base(), 40.0, 0.26, 56.8125, 0.005).expect("valid spec"),
    )
}

/// Continuous feedback anchored at full participation.
pub fn wide_feedback() -> RewardPolicy {
    RewardPolicy::Feedback(ControllerSpec::new(base(), 40.0, 1.0, 10.1, 0.75).expect("valid spec"))
}
