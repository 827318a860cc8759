//! Counter-based deterministic random streams.
//!
//! Every stream is a pure function of (key, counter), so draws are
//! bit-reproducible across platforms and safe to shard: give each unit of work
//! its own stream id (or fork label) and never share a handle across threads.

/// 64-bit finalizer with full avalanche; the core of the generator.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A counter-based stream: output i is mix64(key ^ mix64(i)).
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

/// Derive the stream for (master_seed, stream_id). Distinct ids give
/// independent reproducible streams; same pair twice gives the same stream.
pub fn rng_stream(master_seed: u64, stream_id: u64) -> CounterRng {
    CounterRng {
        key: mix64(mix64(master_seed) ^ mix64(stream_id ^ 0x51DE_A77A_11CE_5EED)),
        counter: 0,
    }
}

impl CounterRng {
    /// Child stream addressed by `label`; independent of the parent's position.
    pub fn fork(&self, label: u64) -> CounterRng {
        CounterRng {
            key: mix64(self.key ^ mix64(label ^ 0xB5E1_05CA_FE4D_171E)),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key ^ mix64(self.counter));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]; ln stays finite
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }
}
