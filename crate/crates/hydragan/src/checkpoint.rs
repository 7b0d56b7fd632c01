//! Binary parameter container and the checkpoint directory layout.
//!
//! Container layout, little endian throughout:
//!
//! ```text
//! magic "HGNN" | version u16 | network count u32
//! per network: layer count u32
//! per layer:   kind u8 (0 dense, 1 conv1d) | input u32 | output u32
//!              | kernel u32 | channels u32 | activation tag u8
//!              | weight rows u32 | weight cols u32 | weights f64*
//!              | bias len u32 | bias f64*
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hydragan_core::networks::{Discriminator, DiscriminatorRole, Generator};
use hydragan_core::numcore::{Activation, Layer, LayerKind, LayerSpec, Network, Tensor};
use hydragan_core::trainer::Agents;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"HGNN";
pub const FORMAT_VERSION: u16 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("dimension fits in u32").to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    put_u32(out, xs.len());
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode_networks(nets: &[&Network]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, nets.len());
    for net in nets {
        put_u32(&mut out, net.layers().len());
        for layer in net.layers() {
            let spec = layer.spec;
            let (kind, kernel, channels) = match spec.kind {
                LayerKind::Dense => (0u8, 0, 0),
                LayerKind::Conv1d {
                    kernel_size,
                    channels,
                } => (1u8, kernel_size, channels),
            };
            out.push(kind);
            put_u32(&mut out, spec.input_width);
            put_u32(&mut out, spec.output_width);
            put_u32(&mut out, kernel);
            put_u32(&mut out, channels);
            out.push(spec.activation.tag());
            let [r, c] = spec.weight_shape();
            put_u32(&mut out, r);
            put_u32(&mut out, c);
            for x in layer.weight.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
            put_f64s(&mut out, layer.bias.data());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CliError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> CliResult<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> CliResult<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| CliError::Checkpoint("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_networks(buf: &[u8]) -> CliResult<Vec<Network>> {
    let bad = |m: String| CliError::Checkpoint(m);
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(bad("not a parameter container (bad magic)".into()));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let n_nets = r.u32()?;
    let mut nets = Vec::with_capacity(n_nets.min(64));
    for _ in 0..n_nets {
        let n_layers = r.u32()?;
        let mut layers = Vec::with_capacity(n_layers.min(64));
        for _ in 0..n_layers {
            let kind = r.u8()?;
            let input_width = r.u32()?;
            let output_width = r.u32()?;
            let kernel_size = r.u32()?;
            let channels = r.u32()?;
            let tag = r.u8()?;
            let activation = Activation::from_tag(tag).ok_or_else(|| bad(format!("unknown activation tag {tag}")))?;
            let kind = match kind {
                0 => LayerKind::Dense,
                1 => LayerKind::Conv1d {
                    kernel_size,
                    channels,
                },
                k => return Err(bad(format!("unknown layer kind {k}"))),
            };
            let spec = LayerSpec {
                kind,
                input_width,
                output_width,
                activation,
            };
            spec.validate().map_err(|e| bad(e.to_string()))?;
            let rows = r.u32()?;
            let cols = r.u32()?;
            let weight = Tensor::matrix(rows, cols, r.f64s(rows.saturating_mul(cols))?)
                .map_err(|e| bad(e.to_string()))?;
            let n_bias = r.u32()?;
            let bias = Tensor::vector(r.f64s(n_bias)?).map_err(|e| bad(e.to_string()))?;
            layers.push(Layer::from_parts(spec, weight, bias).map_err(|e| bad(e.to_string()))?);
        }
        nets.push(Network::new(layers).map_err(|e| bad(e.to_string()))?);
    }
    if r.pos != buf.len() {
        return Err(bad(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(nets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k: usize,
    pub cluster_sizes: Vec<usize>,
    pub inertia_curve: Vec<(usize, f64)>,
    /// Cluster (head) index of every training row, in file order.
    pub assignments: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFiles {
    pub generator: String,
    pub critics: Vec<String>,
    pub reids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u16,
    pub config_hash: String,
    pub seed: u64,
    /// The run configuration as canonical key/value pairs.
    pub config: BTreeMap<String, String>,
    pub dataset: String,
    pub feature_names: Vec<String>,
    pub sensitive_index: usize,
    /// Raw `(min, max)` per feature, used to denormalize generated rows.
    pub bounds: Vec<(f64, f64)>,
    pub clustering: ClusteringSummary,
    pub epochs_trained: usize,
    pub reid_active: Vec<bool>,
    /// Last per-head EM estimate; `None` before the first epoch.
    pub per_head_em: Vec<Option<f64>>,
    pub agents: AgentFiles,
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::output(path, e))
}

/// Writes one container per agent and returns their file names.
pub fn save_agents(dir: &Path, agents: &Agents) -> CliResult<AgentFiles> {
    let g = &agents.generator;
    let mut gen_nets = vec![g.trunk()];
    gen_nets.extend(g.heads());
    let generator = String::from("generator.bin");
    write_file(&dir.join(&generator), &encode_networks(&gen_nets))?;
    let mut save = |d: &Discriminator| -> CliResult<String> {
        let name = format!("{}.bin", d.name());
        write_file(&dir.join(&name), &encode_networks(&[d.network()]))?;
        Ok(name)
    };
    let critics = agents.critics.iter().map(&mut save).collect::<CliResult<_>>()?;
    let reids = agents.reids.iter().map(&mut save).collect::<CliResult<_>>()?;
    Ok(AgentFiles {
        generator,
        critics,
        reids,
    })
}

fn read_nets(dir: &Path, name: &str) -> CliResult<Vec<Network>> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))?;
    decode_networks(&bytes).map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))
}

fn single(dir: &Path, name: &str) -> CliResult<Network> {
    let mut nets = read_nets(dir, name)?;
    if nets.len() != 1 {
        return Err(CliError::Checkpoint(format!("{name}: expected one network, found {}", nets.len())));
    }
    Ok(nets.remove(0))
}

pub fn load_agents(dir: &Path, files: &AgentFiles) -> CliResult<Agents> {
    let mut nets = read_nets(dir, &files.generator)?;
    if nets.len() < 2 {
        return Err(CliError::Checkpoint("generator needs a trunk and at least one head".into()));
    }
    let trunk = nets.remove(0);
    let generator = Generator::from_parts(trunk, nets)?;
    let load = |role: DiscriminatorRole, names: &[String]| -> CliResult<Vec<Discriminator>> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| Ok(Discriminator::from_parts(role, i, single(dir, n)?)?))
            .collect()
    };
    let critics = load(DiscriminatorRole::Realism, &files.critics)?;
    let reids = load(DiscriminatorRole::Reid, &files.reids)?;
    if critics.len() != generator.n_heads() {
        return Err(CliError::Checkpoint(format!(
            "{} critics for {} generator heads",
            critics.len(),
            generator.n_heads()
        )));
    }
    Ok(Agents {
        generator,
        critics,
        reids,
    })
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))?;
    if m.format_version != FORMAT_VERSION {
        return Err(CliError::Checkpoint(format!("unsupported manifest version {}", m.format_version)));
    }
    Ok(m)
}
