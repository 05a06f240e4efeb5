use serde::{Deserialize, Serialize};
use spreadsurf_core::calibration::fnv1a64;

/// Volatile wall-clock data, isolated in one manifest field so that
/// everything else is byte-identical across reruns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub duration_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: String,
    pub config_hash: String,
    pub run_id: String,
    pub seed: u64,
    pub n_paths: usize,
    pub threads: usize,
    pub tolerance_profile: String,
    pub artifacts: Vec<String>,
    pub timing: Timing,
}

/// Canonical hash of a JSON config: parse, re-serialize with sorted keys
/// and no whitespace, hash. Stable under whitespace-only (and key-order)
/// edits of the file.
pub fn config_hash(text: &str) -> Result<String, spreadsurf_core::Error> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| spreadsurf_core::Error::Config(format!("config hash: {e}")))?;
    let canon = serde_json::to_string(&value)
        .map_err(|e| spreadsurf_core::Error::Config(format!("config hash: {e}")))?;
    Ok(format!("{:016x}", fnv1a64(canon.as_bytes())))
}

pub fn run_id(hash: &str, seed: u64) -> String {
    format!("{}-s{seed}", &hash[..12.min(hash.len())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_whitespace_and_key_order() {
        let a = r#"{"a": 1, "b": [1, 2]}"#;
        let b = "{ \"b\":[1,\n 2],  \"a\"\t:1 }";
        assert_eq!(config_hash(a).unwrap(), config_hash(b).unwrap());
        let c = r#"{"a": 2, "b": [1, 2]}"#;
        assert_ne!(config_hash(a).unwrap(), config_hash(c).unwrap());
    }
}
