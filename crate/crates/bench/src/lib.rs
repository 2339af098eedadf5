//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rand::{rngs::StdRng, Rng, SeedableRng};

use dynwin::groundstate::{find_ground_state, GroundStateConfig};
use dynwin::model::spin1_operators;
use dynwin::tensor::{Tensor, C64};
use dynwin::window::{init_window, WindowState};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = StdRng::seed_from_u64(seed);
    Tensor::from_fn(&[rows, cols], |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// `n`-site window around an `S+` quench at site 0, from the χ ground state.
pub fn quenched_window(chi: usize, n: usize) -> WindowState {
    let u = find_ground_state(&GroundStateConfig::new(chi)).expect("ground state");
    let mut w = init_window(Arc::new(u), n, -2 * (n as i64 / 4)).expect("window");
    w.apply_local_operator(0, &spin1_operators().sp).expect("quench");
    w
}
