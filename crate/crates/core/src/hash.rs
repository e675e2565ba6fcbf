use sha2::{Digest, Sha256};

/// Platform- and release-stable 64-bit hash of a word sequence.
pub fn stable_hash(words: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for w in words {
        h.update(w.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

/// Hex SHA-256 of arbitrary bytes, used for content-addressed cache keys.
pub fn content_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
