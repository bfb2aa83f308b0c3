//! Seeded random stream for the agent engine.
//!
//! The generator is xoshiro256++ seeded through SplitMix64 (the published
//! `seed_from_u64` expansion). Both are fixed: seeds written into output
//! files must reproduce the same trajectories in every future version.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

/// A seeded generator that counts the 64-bit words it has produced.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    position: u64,
    inner: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            position: 0,
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Independent stream number `index` derived from a master seed.
    pub fn derive(seed: u64, index: u64) -> Self {
        Self::new(derive_seed(seed, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Restores the stream to `position` draws after its seed.
    pub fn at_position(seed: u64, position: u64) -> Self {
        let mut stream = Self::new(seed);
        for _ in 0..position {
            stream.next_u64();
        }
        stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.position += 1;
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// SplitMix64 finalizer applied to `seed + (index + 1) * golden gamma`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on `(0, 1)` with 53 random bits; zero is redrawn.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x = (rng.next_u64() >> 11) as f64 * TWO_POW_MINUS_53;
        if x > 0.0 {
            return x;
        }
    }
}

/// Uniform integer in `0..n` by multiply-and-reject, free of modulo bias.
#[inline]
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let wide = u128::from(rng.next_u64()) * u128::from(n);
        if (wide as u64) >= threshold {
            return (wide >> 64) as u64;
        }
    }
}
