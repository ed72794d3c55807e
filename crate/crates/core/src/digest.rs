//! Stable 64-bit FNV-1a hashing used for payload digests, run directory
//! names and animation state digests.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a hasher. Output is identical on every platform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Self(FNV_OFFSET)
    }
}

impl Fnv64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = Fnv64::new();
    h.write(bytes);
    h.finish()
}

/// Digest of a JSON payload over its compact serialization. Object keys are
/// emitted in sorted order, so equal values always digest equally.
pub fn payload_digest(value: &serde_json::Value) -> u64 {
    // Serializing a `Value` into a Vec cannot fail.
    let bytes = serde_json::to_vec(value).expect("json value serializes");
    fnv1a(&bytes)
}

pub fn to_hex(digest: u64) -> String {
    format!("{digest:016x}")
}

pub fn from_hex(s: &str) -> Option<u64> {
    if s.len() != 16 {
        return None;
    }
    u64::from_str_radix(s, 16).ok()
}
