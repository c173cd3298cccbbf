//! Ephemeral, self-certifying chunk names.
//!
//! A name is an opaque service-options tag followed by a SHA-256 digest of
//! `payload || padding || version`. Rotating a chunk bumps its version and
//! re-draws the padding, so the new name shares nothing with the old one.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::time::SimTime;

pub const DIGEST_LEN: usize = 32;
pub const PADDING_LEN: usize = 8;
const MAX_OPTIONS_LEN: usize = 8;

/// Opaque tag carried in front of the digest. Forwarding ignores it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ServiceOptions {
    len: u8,
    bytes: [u8; MAX_OPTIONS_LEN],
}

impl ServiceOptions {
    pub const EMPTY: ServiceOptions = ServiceOptions { len: 0, bytes: [0; MAX_OPTIONS_LEN] };

    /// Returns `None` when the tag exceeds 8 bytes.
    pub fn new(tag: &[u8]) -> Option<Self> {
        if tag.len() > MAX_OPTIONS_LEN {
            return None;
        }
        let mut bytes = [0; MAX_OPTIONS_LEN];
        bytes[..tag.len()].copy_from_slice(tag);
        Some(ServiceOptions { len: tag.len() as u8, bytes })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContentId {
    pub service_options: ServiceOptions,
    pub digest: [u8; DIGEST_LEN],
}

impl ContentId {
    pub fn with_service_options(mut self, opts: ServiceOptions) -> Self {
        self.service_options = opts;
        self
    }

    pub fn to_hex(&self) -> String {
        let opts = self.service_options.as_bytes();
        if opts.is_empty() {
            hex::encode(self.digest)
        } else {
            format!("{}/{}", hex::encode(opts), hex::encode(self.digest))
        }
    }

    /// First 8 hex digits, for compact trace output.
    pub fn short(&self) -> String {
        hex::encode(&self.digest[..4])
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Identity of one named chunk version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChunkDescriptor {
    pub object_id: u32,
    pub chunk_index: u32,
    pub version: u32,
    pub padding: [u8; PADDING_LEN],
}

impl ChunkDescriptor {
    pub fn payload(&self) -> Vec<u8> {
        chunk_payload(self.object_id, self.chunk_index, self.version)
    }
}

/// Synthetic chunk body; distinct for every (object, chunk, version).
pub fn chunk_payload(object_id: u32, chunk_index: u32, version: u32) -> Vec<u8> {
    format!("object={object_id};chunk={chunk_index};version={version}").into_bytes()
}

fn digest(payload: &[u8], padding: &[u8], version: u32) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    h.update(payload);
    h.update(padding);
    h.update(u64::from(version).to_le_bytes());
    h.finalize().into()
}

/// Mints the name of a chunk version. `payload` must be non-empty.
pub fn mint_cid(d: &ChunkDescriptor, payload: &[u8]) -> ContentId {
    debug_assert!(!payload.is_empty(), "chunk payload must be non-empty");
    ContentId { service_options: ServiceOptions::EMPTY, digest: digest(payload, &d.padding, d.version) }
}

/// Checks that `payload` is what `id` names.
pub fn verify_cid(payload: &[u8], padding: &[u8], version: u32, id: &ContentId) -> bool {
    digest(payload, padding, version) == id.digest
}

/// Time until the next name rotation: `T_base / max(1, requests)`, floored
/// at `T_min`. Popular content rotates faster.
pub fn transition_interval(request_count_in_window: u64, t_base: SimTime, t_min: SimTime) -> SimTime {
    let scaled = SimTime(t_base.0 / request_count_in_window.max(1));
    scaled.max(t_min)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn desc(version: u32, padding: [u8; 8]) -> ChunkDescriptor {
        ChunkDescriptor { object_id: 3, chunk_index: 1, version, padding }
    }

    #[test]
    fn mint_is_deterministic() {
        let d = desc(0, [7; 8]);
        let p = chunk_payload(3, 1, 0);
        assert_eq!(mint_cid(&d, &p), mint_cid(&d, &p));
    }

    #[test]
    fn versions_get_distinct_names() {
        let (d0, d1) = (desc(0, [7; 8]), desc(1, [7; 8]));
        assert_ne!(mint_cid(&d0, &chunk_payload(3, 1, 0)), mint_cid(&d1, &chunk_payload(3, 1, 1)));
        // same payload bytes, only the counter differs
        let p = chunk_payload(3, 1, 0);
        assert_ne!(mint_cid(&d0, &p), mint_cid(&d1, &p));
    }

    #[test]
    fn thousand_random_descriptors_do_not_collide() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            let d = ChunkDescriptor {
                object_id: rng.random_range(0..50),
                chunk_index: rng.random_range(0..10),
                version: rng.random_range(0..5),
                padding: rng.random(),
            };
            let id = mint_cid(&d, &chunk_payload(d.object_id, d.chunk_index, d.version));
            seen.insert((d, id));
        }
        let distinct_desc: HashSet<_> = seen.iter().map(|(d, _)| *d).collect();
        let distinct_ids: HashSet<_> = seen.iter().map(|(_, id)| *id).collect();
        assert_eq!(distinct_desc.len(), distinct_ids.len());
    }

    #[test]
    fn verification() {
        let d = desc(4, [1, 2, 3, 4, 5, 6, 7, 8]);
        let p = chunk_payload(3, 1, 4);
        let id = mint_cid(&d, &p);
        assert!(verify_cid(&p, &d.padding, 4, &id));
        let mut flipped = p.clone();
        flipped[0] ^= 1;
        assert!(!verify_cid(&flipped, &d.padding, 4, &id));
        assert!(!verify_cid(&p, &d.padding, 5, &id));
    }

    #[test]
    fn interval_examples() {
        let s = SimTime::from_secs;
        assert_eq!(transition_interval(0, s(1000.0), s(1.0)), s(1000.0));
        assert_eq!(transition_interval(10, s(1000.0), s(1.0)), s(100.0));
        assert_eq!(transition_interval(1_000_000, s(1000.0), s(1.0)), s(1.0));
    }

    #[test]
    fn consecutive_chunks_share_no_prefix() {
        // 8-byte prefix collisions across a 2000-chunk catalog would be
        // astronomically unlikely for unstructured names
        let mut prefixes = HashSet::new();
        for chunk in 0..2000u32 {
            let d = ChunkDescriptor { object_id: 0, chunk_index: chunk, version: 0, padding: [0; 8] };
            let id = mint_cid(&d, &chunk_payload(0, chunk, 0));
            assert!(prefixes.insert(id.digest[..8].to_vec()));
        }
    }

    proptest! {
        #[test]
        fn verify_accepts_mint_and_rejects_perturbations(
            obj in 0u32..1000, chunk in 0u32..100, version in 0u32..1000,
            padding in any::<[u8; 8]>(), bit in 0usize..64,
        ) {
            let d = ChunkDescriptor { object_id: obj, chunk_index: chunk, version, padding };
            let p = chunk_payload(obj, chunk, version);
            let id = mint_cid(&d, &p);
            prop_assert!(verify_cid(&p, &padding, version, &id));
            let mut pad2 = padding;
            pad2[bit / 8] ^= 1 << (bit % 8);
            prop_assert!(!verify_cid(&p, &pad2, version, &id));
            prop_assert!(!verify_cid(&p, &padding, version.wrapping_add(1), &id));
            let mut p2 = p.clone();
            p2[bit % p.len()] ^= 0x20;
            prop_assert!(!verify_cid(&p2, &padding, version, &id));
        }

        #[test]
        fn interval_is_bounded_and_monotone(a in 0u64..100_000, b in 0u64..100_000, base in 1.0f64..5000.0, min in 0.01f64..1.0) {
            let (tb, tm) = (SimTime::from_secs(base), SimTime::from_secs(min));
            let (lo, hi) = (a.min(b), a.max(b));
            let (ilo, ihi) = (transition_interval(lo, tb, tm), transition_interval(hi, tb, tm));
            prop_assert!(ihi <= ilo);
            prop_assert!(ilo <= tb && ihi >= tm);
        }
    }
}
