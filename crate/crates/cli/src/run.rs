//! Run plumbing: exit-code classification, config resolution, manifests and
//! output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A failure, tagged with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed inputs, failed preconditions: exit 2.
    Usage(String),
    /// Anything else: exit 1.
    Internal(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl From<anongcn::Error> for Failure {
    fn from(e: anongcn::Error) -> Self {
        use anongcn::Error as E;
        match e {
            E::NonFinite(_) | E::NotSymmetric(_) | E::Io(_) => Failure::Internal(e.into()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(e.into())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// Reads an input file; a missing or unreadable input is a usage error.
pub fn read_input(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

pub fn load_graph(path: &Path) -> Outcome<anongcn::Graph> {
    let text = read_input(path)?;
    let file = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(anongcn::Graph::from_json(file)?)
}

/// Optional JSON config file with one object per command plus a top-level `seed`.
#[derive(Debug, Default)]
pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Outcome<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = read_input(path)?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(root)) => Ok(Self { root }),
            Ok(_) => Err(Failure::usage(format!(
                "{}: config must be a JSON object",
                path.display()
            ))),
            Err(e) => Err(Failure::usage(format!("{}: {e}", path.display()))),
        }
    }

    pub fn seed(&self) -> Outcome<Option<u64>> {
        match self.root.get("seed") {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Failure::usage("config seed must be a non-negative integer")),
        }
    }

    pub fn section(&self, name: &str) -> Option<&Value> {
        self.root.get(name)
    }
}

/// `defaults`, overlaid by the config-file section, overlaid by the flags
/// that were given. `flags` serializes with unset options skipped.
pub fn resolve<P, F>(defaults: P, section: Option<&Value>, flags: &F) -> Outcome<P>
where
    P: Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut merged = serde_json::to_value(defaults)?;
    let obj = merged.as_object_mut().expect("parameter records serialize to objects");
    if let Some(section) = section {
        let Value::Object(s) = section else {
            return Err(Failure::usage("config sections must be JSON objects"));
        };
        for (k, v) in s {
            if !obj.contains_key(k) {
                return Err(Failure::usage(format!("unknown config key {k:?}")));
            }
            obj.insert(k.clone(), v.clone());
        }
    }
    if let Value::Object(f) = serde_json::to_value(flags)? {
        obj.extend(f);
    }
    serde_json::from_value(merged).map_err(|e| Failure::usage(format!("invalid configuration: {e}")))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a Value,
    inputs: &'a Map<String, Value>,
    outputs: &'a [String],
    /// Seconds since the Unix epoch. The only field that differs between
    /// identical runs.
    timestamp: u64,
}

/// Output directory of one run. Files are recorded for the manifest as
/// they are written.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    seed: u64,
    inputs: Map<String, Value>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(dir: &Path, command: &'static str, seed: u64) -> Outcome<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            seed,
            inputs: Map::new(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn input(&mut self, name: &str, value: impl Into<Value>) {
        self.inputs.insert(name.to_string(), value.into());
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Outcome {
        fs::write(self.path(name), bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes outside the run directory, recording the path as given.
    pub fn write_to(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
        fs::write(path, bytes)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Outcome {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(self, config: &impl Serialize) -> Outcome {
        let config = serde_json::to_value(config)?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            tool: "anongcn",
            version: VERSION,
            command: self.command,
            seed: self.seed,
            config: &config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            timestamp,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Path as a manifest string, canonical when it exists so runs can be
/// matched on their inputs.
pub fn path_value(p: &Path) -> Value {
    let p = fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    Value::String(p.display().to_string())
}
