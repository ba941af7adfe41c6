//! File formats: edge lists, node tables, degree files and run manifests.
//!
//! Edge lists are TSV with one `source\ttarget` pair per line; undirected
//! edges are written once, smaller id first. Node tables are TSV with a
//! header `id weight x0 .. x{d-1}` and floats at 17 significant digits,
//! which round-trips every `f64` exactly. Lines starting with `#` are
//! ignored on input.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::generator::Graph;
use crate::model::{ModelConfig, Node};
use crate::{Error, Result};

pub const EDGES_FILE: &str = "edges.tsv";
pub const NODES_FILE: &str = "nodes.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_edge_list<W: Write>(edges: &[(usize, usize)], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for &(u, v) in edges {
        writeln!(out, "{u}\t{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Data lines with their 1-based line numbers, skipping blanks and comments.
fn data_lines<R: Read>(input: R) -> impl Iterator<Item = Result<(u64, String)>> {
    BufReader::new(input).lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok((i as u64 + 1, t.to_string())))
        }
    })
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: u64, what: &str) -> Result<T> {
    let field = field.ok_or_else(|| Error::Parse { line, message: format!("missing {what}") })?;
    field.parse().map_err(|_| Error::Parse { line, message: format!("invalid {what}: {field:?}") })
}

/// Reads `u\tv` lines (any whitespace separates). An input without edges is
/// an error.
pub fn read_edge_list<R: Read>(input: R) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for item in data_lines(input) {
        let (line, text) = item?;
        let mut fields = text.split_whitespace();
        let u = parse_field(fields.next(), line, "source id")?;
        let v = parse_field(fields.next(), line, "target id")?;
        if fields.next().is_some() {
            return Err(Error::Parse { line, message: "expected two columns".into() });
        }
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(Error::Parse { line: 1, message: "edge list is empty".into() });
    }
    Ok(edges)
}

pub fn write_node_table<W: Write>(nodes: &[Node], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let d = nodes.first().map_or(0, Node::dim);
    write!(out, "id\tweight")?;
    for k in 0..d {
        write!(out, "\tx{k}")?;
    }
    writeln!(out)?;
    for node in nodes {
        if node.dim() != d {
            return Err(Error::DimensionMismatch { left: d, right: node.dim() });
        }
        write!(out, "{}\t{:.16e}", node.id, node.weight)?;
        for x in &node.direction {
            write!(out, "\t{x:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_node_table<R: Read>(input: R) -> Result<Vec<Node>> {
    let mut lines = data_lines(input);
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, message: "node table is empty".into() })??;
    let cols: Vec<&str> = header.split_whitespace().collect();
    if cols.len() < 2 || cols[0] != "id" || cols[1] != "weight" {
        return Err(Error::Parse { line: hline, message: "expected header `id weight x0 ...`".into() });
    }
    let d = cols.len() - 2;
    let mut nodes = Vec::new();
    for item in lines {
        let (line, text) = item?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != d + 2 {
            return Err(Error::Parse { line, message: format!("expected {} columns, got {}", d + 2, fields.len()) });
        }
        let id = parse_field(Some(fields[0]), line, "id")?;
        let weight = parse_field(Some(fields[1]), line, "weight")?;
        let direction = fields[2..]
            .iter()
            .map(|f| parse_field(Some(f), line, "coordinate"))
            .collect::<Result<Vec<f64>>>()?;
        nodes.push(Node { id, weight, direction });
    }
    Ok(nodes)
}

/// One non-negative integer per line; with two columns the second is taken
/// (so `id\tdegree` files work too).
pub fn read_degrees<R: Read>(input: R) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for item in data_lines(input) {
        let (line, text) = item?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        let field = match fields.len() {
            1 => fields[0],
            2 => fields[1],
            k => return Err(Error::Parse { line, message: format!("expected 1 or 2 columns, got {k}") }),
        };
        out.push(parse_field(Some(field), line, "degree")?);
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 1, message: "degree file is empty".into() });
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub generation_seconds: f64,
    pub candidate_pairs: u64,
}

/// Everything needed to reproduce a `generate` run. `config.rule` holds the
/// threshold actually used; a calibration target, if any, is kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: ModelConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_edges: Option<f64>,
    pub edge_count: u64,
    /// File name -> sha256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    pub timing: Timing,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        m.config.validate()?;
        Ok(m)
    }

    /// Recompute the digest of every listed artifact under `dir`.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, digest) in &self.artifacts {
            let actual = sha256_file(&dir.join(name))?;
            if &actual != digest {
                return Err(Error::Validation(format!("digest mismatch for {name}")));
            }
        }
        Ok(())
    }
}

/// Write `nodes.tsv`, `edges.tsv` and `manifest.json` into `dir`.
pub fn write_run(graph: &Graph, dir: &Path, target_edges: Option<f64>) -> Result<RunManifest> {
    std::fs::create_dir_all(dir)?;
    let mut artifacts = BTreeMap::new();
    let nodes_path = dir.join(NODES_FILE);
    write_node_table(&graph.nodes, File::create(&nodes_path)?)?;
    artifacts.insert(NODES_FILE.to_string(), sha256_file(&nodes_path)?);
    let edges_path = dir.join(EDGES_FILE);
    write_edge_list(&graph.edges, File::create(&edges_path)?)?;
    artifacts.insert(EDGES_FILE.to_string(), sha256_file(&edges_path)?);
    let manifest = RunManifest {
        tool: "ftm".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: graph.config.seed,
        config: graph.config,
        target_edges,
        edge_count: graph.edges.len() as u64,
        artifacts,
        timing: Timing {
            generation_seconds: graph.stats.wall_time.as_secs_f64(),
            candidate_pairs: graph.stats.candidate_pairs,
        },
    };
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
