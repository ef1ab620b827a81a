//! Lazily materialized Poisson field of initial positions.

use crate::rng::RngStream;
use crate::sampling::poisson_field;

/// Stream-id bit reserved for field cells; particle streams use ids below it.
pub const FIELD_STREAM_TAG: u64 = 1 << 63;
/// Bits of the particle id that index a particle within its cell.
pub const CELL_INDEX_BITS: u32 = 20;
/// Expected particles per cell.
const PARTICLES_PER_CELL: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub id: u64,
    pub origin: f64,
    pub pos: f64,
}

/// The initial configuration on (0, ∞), generated cell by cell.
///
/// Cell `c` covers (c·L, (c+1)·L] and is drawn from its own stream, so the
/// origins are a pure function of the seed: extending the frontier never
/// alters particles already handed out.
#[derive(Debug, Clone)]
pub struct ParticleField {
    seed: u64,
    lambda: f64,
    cell_len: f64,
    next_cell: u64,
}

impl ParticleField {
    pub fn new(seed: u64, lambda: f64) -> Self {
        assert!(lambda > 0.0);
        ParticleField { seed, lambda, cell_len: PARTICLES_PER_CELL / lambda, next_cell: 0 }
    }

    /// Coordinate up to which origins have been generated.
    pub fn frontier(&self) -> f64 {
        self.next_cell as f64 * self.cell_len
    }

    pub fn cell_len(&self) -> f64 {
        self.cell_len
    }

    /// Origins of one cell as (id, origin), ascending.
    pub fn cell(&self, c: u64) -> Vec<(u64, f64)> {
        let a = c as f64 * self.cell_len;
        let b = (c + 1) as f64 * self.cell_len;
        let mut rng = RngStream::new(self.seed, FIELD_STREAM_TAG | c, 0);
        let xs = poisson_field(self.lambda, a, b, &mut rng);
        assert!(xs.len() < 1 << CELL_INDEX_BITS, "cell {c} overflows the id space");
        xs.into_iter().enumerate().map(|(j, x)| ((c << CELL_INDEX_BITS) | j as u64, x)).collect()
    }

    /// Generates whole cells until the frontier is at least `target` and
    /// returns the new origins, ascending.
    pub fn extend_to(&mut self, target: f64) -> Vec<(u64, f64)> {
        let mut out = Vec::new();
        while self.frontier() < target {
            out.extend(self.cell(self.next_cell));
            self.next_cell += 1;
        }
        out
    }
}
