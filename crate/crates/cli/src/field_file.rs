//! Plain-text field files: a `key = value` header, a `---` separator, then
//! one value per line in lexicographic-ascending site order (first axis
//! slowest), written in shortest round-trip form.

use anyhow::{anyhow, bail, Context, Result};
use gridfield::{GridSpec, LatticeField, ModelParams};
use std::fmt::Write as _;

pub const FORMAT_VERSION: u32 = 1;
pub const ORDERING: &str = "lexicographic-ascending";
const MAGIC: &str = "# gridfield field";

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub params: ModelParams,
    /// Master seed and stream of the simulation, when the field was simulated.
    pub seed: Option<(u64, u64)>,
    pub field: LatticeField,
}

impl FieldFile {
    pub fn to_text(&self) -> String {
        let g = self.field.grid;
        let mut s = String::with_capacity(24 * g.size() + 256);
        let thetas: Vec<String> = self.params.thetas.iter().map(|t| format!("{t:e}")).collect();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "version = {FORMAT_VERSION}");
        let _ = writeln!(s, "d = {}", g.d);
        let _ = writeln!(s, "n = {}", g.n);
        let _ = writeln!(s, "phi = {:e}", self.params.phi);
        let _ = writeln!(s, "theta = {}", thetas.join(" "));
        match self.seed {
            Some((seed, stream)) => {
                let _ = writeln!(s, "seed = {seed}");
                let _ = writeln!(s, "stream = {stream}");
            }
            None => {
                let _ = writeln!(s, "seed = none");
            }
        }
        let _ = writeln!(s, "ordering = {ORDERING}");
        let _ = writeln!(s, "values = {}", g.size());
        let _ = writeln!(s, "---");
        for v in &self.field.values {
            let _ = writeln!(s, "{v:e}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => bail!("not a field file: first line must be {MAGIC:?}"),
        }
        let mut header = std::collections::BTreeMap::new();
        loop {
            let (no, line) = lines.next().ok_or_else(|| anyhow!("header is not terminated by ---"))?;
            let line = line.trim();
            if line == "---" {
                break;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            if header.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {:?}", no + 1, k.trim());
            }
        }
        let get = |k: &str| header.get(k).ok_or_else(|| anyhow!("header is missing {k:?}"));
        let version: u32 = get("version")?.parse().context("version")?;
        if version != FORMAT_VERSION {
            bail!("unsupported field file version {version}");
        }
        if get("ordering")? != ORDERING {
            bail!(
                "unsupported ordering {:?}; only {ORDERING:?} is understood",
                get("ordering")?
            );
        }
        let d: usize = get("d")?.parse().context("d")?;
        let n: usize = get("n")?.parse().context("n")?;
        let phi: f64 = get("phi")?.parse().context("phi")?;
        let thetas = get("theta")?
            .split_whitespace()
            .map(|t| t.parse::<f64>().with_context(|| format!("theta value {t:?}")))
            .collect::<Result<Vec<_>>>()?;
        if thetas.len() != d {
            bail!("header declares d = {d} but lists {} decay rates", thetas.len());
        }
        let seed = match get("seed")?.as_str() {
            "none" => None,
            s => {
                let stream = header
                    .get("stream")
                    .map(|v| v.parse::<u64>())
                    .transpose()
                    .context("stream")?;
                Some((s.parse::<u64>().context("seed")?, stream.unwrap_or(0)))
            }
        };
        let grid = GridSpec::new(n, d)?;
        let declared: usize = get("values")?.parse().context("values")?;
        if declared != grid.size() {
            bail!("header declares {declared} values but {n}^{d} = {} sites", grid.size());
        }
        let mut values = Vec::with_capacity(grid.size());
        for (no, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .with_context(|| format!("line {}: bad value {line:?}", no + 1))?;
            if !v.is_finite() {
                bail!("line {}: non-finite value", no + 1);
            }
            values.push(v);
        }
        if values.len() != grid.size() {
            bail!("expected {} values, found {}", grid.size(), values.len());
        }
        Ok(Self {
            params: ModelParams::new(phi, thetas)?,
            seed,
            field: LatticeField::new(grid, values)?,
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
