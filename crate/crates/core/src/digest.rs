//! Stable digests of canonical serializations.

use alloc::string::String;
use sha2::{Digest, Sha256};

use crate::world::World;

pub fn sha256_hex(bytes: &[u8]) -> String {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    let d = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in d.iter() {
        s.push(HEX[(b >> 4) as usize] as char);
        s.push(HEX[(b & 15) as usize] as char);
    }
    s
}

/// Canonical serialization: compact JSON of the whole world. Every map in
/// the world is ordered, so equal worlds give equal bytes.
pub fn canonical_world(world: &World) -> alloc::vec::Vec<u8> {
    serde_json::to_vec(world).unwrap_or_default()
}

pub fn world_digest(world: &World) -> String {
    sha256_hex(&canonical_world(world))
}
