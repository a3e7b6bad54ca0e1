//! Dataset manifests: which instance files make up a dataset and how they
//! were generated.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use evsite::datasets::{default_network, generate_dataset, DatasetSpec};
use evsite::util::write_atomic;
use evsite::{DatasetKind, Instance, Network};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: DatasetKind,
    pub seed: u64,
    /// Network file, relative to the manifest.
    pub network: Option<String>,
    pub instances: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    /// Relative to the manifest.
    pub path: String,
    pub index: u32,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, dir))
    }

    pub fn load_instance(&self, dir: &Path, entry: &Entry) -> Result<Instance> {
        let path = dir.join(&entry.path);
        Instance::load(&path).with_context(|| format!("loading instance {}", path.display()))
    }
}

/// Generates `count` instances into `out_dir` and writes the manifest.
pub fn generate(
    kind: DatasetKind,
    network: Option<&Path>,
    seed: u64,
    count: usize,
    out_dir: &Path,
) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let net = match network {
        Some(p) => {
            Network::read_csv(p).with_context(|| format!("reading network {}", p.display()))?
        }
        None => default_network(seed)?,
    };
    let spec = DatasetSpec::new(kind, net, count, seed);
    let instances = generate_dataset(&spec)?;
    let network_file = if kind == DatasetKind::Tiny || count == 0 {
        None
    } else {
        let mut buf = Vec::new();
        spec.network.write_csv(&mut buf)?;
        write_atomic(&out_dir.join("network.csv"), &buf)?;
        Some("network.csv".to_string())
    };
    let mut entries = Vec::with_capacity(instances.len());
    for inst in &instances {
        let name = format!("{}-{:03}", kind.name(), inst.meta.index);
        let file = format!("{name}.json");
        write_atomic(&out_dir.join(&file), inst.to_json().as_bytes())?;
        entries.push(Entry {
            name,
            path: file,
            index: inst.meta.index,
        });
    }
    let manifest = Manifest {
        kind,
        seed,
        network: network_file,
        instances: entries,
    };
    write_atomic(
        &out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(manifest)
}
