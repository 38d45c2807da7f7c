//! Named, independently reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream identifiers. A component seeded with `(seed, stream)` never shares
/// draws with another stream of the same seed.
pub mod stream {
    pub const TEACHER: u64 = 1;
    pub const POINTS: u64 = 2;
    pub const CORRUPTION: u64 = 3;
    pub const WITNESS: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SOLVER: u64 = 6;
    pub const BETA: u64 = 7;
}

/// A ChaCha8 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A direction drawn uniformly on the unit sphere of the coordinates in
/// `support`; every other coordinate is zero.
pub fn unit_on_support<R: rand::Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    support: std::ops::Range<usize>,
) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; d];
        for c in support.clone() {
            v[c] = StandardNormal.sample(rng);
        }
        let nrm = crate::par::norm(&v);
        if nrm > 1e-300 {
            v.iter_mut().for_each(|x| *x /= nrm);
            return v;
        }
    }
}

/// A point drawn uniformly from the unit ball in `d` dimensions.
pub fn in_unit_ball<R: rand::Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let dir = unit_on_support(rng, d, 0..d);
    let u: f64 = rand::Rng::random(rng);
    let radius = u.powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * radius).collect()
}
