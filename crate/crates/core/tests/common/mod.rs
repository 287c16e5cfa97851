#![allow(dead_code)]

use maintplan::model::{ComponentSpec, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random system: shapes 1-7, scales 1.5-6, corrective cost 3-27,
/// young components, sometimes an initially failed one, setup costs either
/// modest or dominant.
pub fn small_system(rng: &mut ChaCha8Rng, n: usize, horizon: u32) -> SystemSpec {
    let comps: Vec<_> = (0..n)
        .map(|i| {
            let c = ComponentSpec::new(
                rng.gen_range(1.0..7.0),
                rng.gen_range(1.5..6.0),
                1.0,
                rng.gen_range(3.0..27.0),
            )
            .with_initial_age(rng.gen_range(0..3));
            if i == 0 && rng.gen_bool(0.3) {
                c.failed()
            } else {
                c
            }
        })
        .collect();
    let d = if rng.gen_bool(0.5) {
        rng.gen_range(0.0..6.0)
    } else {
        rng.gen_range(5.0..100.0)
    };
    SystemSpec::new(comps, horizon, d).unwrap()
}

/// Instance generator used for the PHA-versus-exact comparison.
pub fn gap_instance(rng: &mut ChaCha8Rng) -> (SystemSpec, usize, u64) {
    let n = rng.gen_range(1..=3);
    let t = rng.gen_range(3..=6);
    let sys = small_system(rng, n, t);
    (sys, rng.gen_range(1..=8), rng.gen())
}

/// One cell of the 2^4 factorial design: bits (slowest first) select shape,
/// scale, setup cost and corrective cost level, 0 = high. Cases are 1..=16.
pub fn factorial_cell(case: usize) -> SystemSpec {
    let bit = |k: usize| ((case - 1) >> (3 - k)) & 1 == 1;
    let shapes = if bit(0) { [2.7, 2.8] } else { [6.5, 6.7] };
    let scales = if bit(1) { [4.4, 3.3] } else { [9.2, 7.9] };
    let d = if bit(2) { 5.0 } else { 100.0 };
    let cr = if bit(3) { [14.4, 11.4] } else { [25.4, 22.4] };
    let comps = (0..2)
        .map(|i| ComponentSpec::new(shapes[i], scales[i], 1.0, cr[i]))
        .collect();
    SystemSpec::new(comps, 10, d).unwrap()
}
