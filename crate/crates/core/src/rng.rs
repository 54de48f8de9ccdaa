//! Seeded random streams.
//!
//! Every replicate of a simulation draws from streams keyed by
//! `(master seed, component, replicate index)`, so a replicate's draws do not
//! depend on which worker ran it or on how many replicates ran before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// A fresh stream from a plain seed.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent parts of a replicate that consume randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Latents,
    Edges,
    Treatment,
    Units,
    Oracle,
}

impl Component {
    fn tag(self) -> u64 {
        match self {
            Component::Latents => 0x6c61_7465_6e74,
            Component::Edges => 0x6564_6765_7300,
            Component::Treatment => 0x7472_6561_7400,
            Component::Units => 0x756e_6974_7300,
            Component::Oracle => 0x6f72_6163_6c65,
        }
    }
}

/// Derives per-replicate streams from a master seed.
#[derive(Debug, Clone, Copy)]
pub struct StreamKey {
    master: u64,
}

impl StreamKey {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, component: Component, replicate: u64) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.master ^ component.tag()));
        rng.set_stream(replicate);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
