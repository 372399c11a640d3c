use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::flow::UnitTangentState;
use crate::geometry::{octagon, Bump, SurfaceModel};

/// Two overlapping bumps, the larger of amplitude 0.05; the standard perturbed metric of the tests.
pub fn perturbed() -> SurfaceModel {
    SurfaceModel::new(
        vec![
            Bump { center: [0.1, 0.05], radius: 1.2, amplitude: 0.05 },
            Bump { center: [-0.3, 0.4], radius: 1.0, amplitude: 0.03 },
        ],
        6,
        0.0,
    )
    .unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng) -> UnitTangentState {
    loop {
        let z = Complex64::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
        if octagon().contains(z) {
            return UnitTangentState::new(z.re, z.im, rng.gen_range(0.0..std::f64::consts::TAU)).unwrap();
        }
    }
}

