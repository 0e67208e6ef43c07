//! Seeded Sobol' points in the unit hypercube.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sobol::params::JoeKuoD6;
use sobol::Sobol;

fn params() -> &'static JoeKuoD6 {
    static P: OnceLock<JoeKuoD6> = OnceLock::new();
    P.get_or_init(JoeKuoD6::minimal)
}

/// Sobol' sequence with a seeded digital shift. The all-zeros first point of
/// the unshifted sequence is skipped.
pub struct SobolSampler {
    seq: Sobol<u32>,
    shift: Vec<u32>,
}

impl SobolSampler {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims >= 1, "sobol sampler needs at least one dimension");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50b0_1cafe);
        let shift = (0..dims).map(|_| rng.random::<u32>()).collect();
        let mut seq = Sobol::<u32>::new(dims, params());
        seq.next();
        SobolSampler { seq, shift }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let p = self.seq.next().expect("sobol sequence exhausted");
        p.iter().zip(&self.shift).map(|(&v, &s)| ((v ^ s) as f64 + 0.5) / 4_294_967_296.0).collect()
    }

    pub fn take(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inside_unit_cube_and_seeded() {
        let a = SobolSampler::new(3, 7).take(64);
        let b = SobolSampler::new(3, 7).take(64);
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|&v| v > 0.0 && v < 1.0));
        assert_ne!(a, SobolSampler::new(3, 8).take(64));
    }

    #[test]
    fn stratifies_each_dimension() {
        // the first 2^k points form a net; with the zero point skipped the next
        // 2^k - 1 points still land in distinct 1/2^k bins
        let pts = SobolSampler::new(2, 3).take(15);
        for d in 0..2 {
            let mut bins = [0usize; 16];
            for p in &pts {
                bins[(p[d] * 16.0) as usize] += 1;
            }
            assert!(bins.iter().all(|&c| c <= 1));
        }
    }
}
