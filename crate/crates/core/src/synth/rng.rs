//! Pinned pseudo-random streams for scene generation.
//!
//! Each entity draws from its own SplitMix64 stream whose initial state is
//! `mix(seed) ^ mix(entity + 0x632BE59BD9B4E019)`, where `mix` is the
//! SplitMix64 output function. Uniforms take the top 53 bits; normals use
//! the cosine branch of Box-Muller on `(1 - u1, u2)`. Keeping this exact
//! algorithm makes scenes reproducible across implementations.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

/// Entity kinds; packed into the top byte of the entity id.
#[derive(Clone, Copy, Debug)]
#[repr(u8)]
pub enum Entity {
    PointNoise = 1,
    Dropout = 2,
    Camera = 3,
}

pub fn entity_id(kind: Entity, traversal: usize, index: usize) -> u64 {
    ((kind as u64) << 56) | ((traversal as u64 & 0xFF_FFFF) << 32) | (index as u64 & 0xFFFF_FFFF)
}

impl Stream {
    pub fn new(seed: u64, entity: u64) -> Self {
        Self {
            state: mix(seed) ^ mix(entity.wrapping_add(0x632B_E59B_D9B4_E019)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values_are_pinned() {
        // SplitMix64 output for state 0 after one increment
        assert_eq!(mix(GAMMA), 0xE220_A839_7B1D_CDAF);
        let mut s = Stream::new(7, entity_id(Entity::PointNoise, 1, 42));
        let first = s.next_u64();
        let mut again = Stream::new(7, entity_id(Entity::PointNoise, 1, 42));
        assert_eq!(again.next_u64(), first);
        assert_ne!(Stream::new(8, entity_id(Entity::PointNoise, 1, 42)).next_u64(), first);
    }

    #[test]
    fn normal_moments() {
        let mut s = Stream::new(1, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn uniform_range() {
        let mut s = Stream::new(3, 9);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
