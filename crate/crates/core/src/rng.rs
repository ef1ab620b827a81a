//! Counter-based random streams.
//!
//! Every variate in a run is a pure function of `(seed, stream, substream,
//! block)`: the generator is Philox4x32-10, a keyed bijection on 128-bit
//! counters. Nothing is carried between calls except the counter, so a
//! particle's randomness at a given event can be reconstructed without
//! replaying anything that came before it.

use rand::RngCore;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Philox4x32 with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = u64::from(PHILOX_M0) * u64::from(c[0]);
        let p1 = u64::from(PHILOX_M1) * u64::from(c[2]);
        c = [
            ((p1 >> 32) as u32) ^ c[1] ^ k[0],
            p1 as u32,
            ((p0 >> 32) as u32) ^ c[3] ^ k[1],
            p0 as u32,
        ];
    }
    c
}

/// SplitMix64 finalizer; used to derive replica seeds from a master seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` under `master`. Independent of scheduling order.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0xA5A5_5A5A_0000_0001)))
}

/// A reproducible stream of 32-bit words keyed by (seed, stream id, substream).
///
/// Counter layout: `[block, substream, stream_lo, stream_hi]`. One stream is
/// meant to be used for a single purpose (one particle at one event, one
/// field cell, ...) and then dropped.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: [u32; 2],
    stream: u64,
    substream: u32,
    block: u32,
    buf: [u32; 4],
    used: usize,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64, substream: u32) -> Self {
        RngStream {
            key: [seed as u32, (seed >> 32) as u32],
            stream,
            substream,
            block: 0,
            buf: [0; 4],
            used: 4,
        }
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    fn refill(&mut self) {
        let ctr = [
            self.block,
            self.substream,
            self.stream as u32,
            (self.stream >> 32) as u32,
        ];
        self.buf = philox4x32_10(ctr, self.key);
        // 2^32 blocks per substream; wrapping would repeat the sequence.
        debug_assert!(self.block != u32::MAX, "rng substream exhausted");
        self.block = self.block.wrapping_add(1);
        self.used = 0;
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let w = self.buf[self.used];
        self.used += 1;
        w
    }

    fn next_u64(&mut self) -> u64 {
        if self.used <= 2 {
            let lo = u64::from(self.buf[self.used]);
            let hi = u64::from(self.buf[self.used + 1]);
            self.used += 2;
            return (hi << 32) | lo;
        }
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let w = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}
