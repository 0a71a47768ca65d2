//! Content digests used to tag curves, reports and transfer matrices.

use crate::attack::AttackSpec;
use crate::model::{write_weights, ModelWeights};
use sha2::{Digest, Sha256};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over the serialized weight file bytes, hex-encoded.
pub fn model_digest(weights: &ModelWeights) -> String {
    let mut buf = Vec::new();
    write_weights(weights, &mut buf).expect("in-memory serialization");
    hex(&Sha256::digest(&buf))
}

/// SHA-256 over the canonical JSON form of an attack spec.
pub fn attack_digest(spec: &AttackSpec) -> String {
    let json = serde_json::to_vec(spec).expect("attack spec serializes");
    hex(&Sha256::digest(&json))
}

/// SHA-256 of arbitrary bytes (input files in run manifests).
pub fn bytes_digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}
