//! Seeded, hierarchically labelled random streams.
//!
//! A stream is identified by a root seed plus a path of `(name, index)`
//! components such as `repeat/3/fold/1/warm_start/0`. The same path always
//! yields the same draw sequence, independent of which thread asks for it or
//! in which order streams are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    path: Vec<(String, u64)>,
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            path: Vec::new(),
            key: splitmix64(seed),
        }
    }

    /// Derives a child stream. Children with different labels or indices are
    /// statistically independent of each other and of the parent.
    pub fn derive(&self, name: &str, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push((name.to_owned(), index));
        let key = splitmix64(self.key ^ splitmix64(fnv1a(name) ^ splitmix64(index)));
        RngStream {
            seed: self.seed,
            path,
            key,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> String {
        self.path
            .iter()
            .map(|(n, i)| format!("{n}/{i}"))
            .collect::<Vec<_>>()
            .join("/")
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}
