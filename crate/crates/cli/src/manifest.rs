use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to re-run a command and check its outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: Command,
    pub files: Vec<FileDigest>,
    /// SHA-256 over the concatenated `name:sha256\n` lines of `files`.
    pub digest: String,
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: Command, outputs: &[(String, Vec<u8>)]) -> Self {
        let files: Vec<FileDigest> =
            outputs.iter().map(|(name, bytes)| FileDigest { name: name.clone(), sha256: hex(bytes) }).collect();
        let joined: String = files.iter().map(|f| format!("{}:{}\n", f.name, f.sha256)).collect();
        Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            files,
            digest: hex(joined.as_bytes()),
        }
    }
}
