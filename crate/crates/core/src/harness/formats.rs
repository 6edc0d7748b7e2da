//! Dataset text formats and JSON model files.
//!
//! Binary datasets:
//!
//! ```text
//! #mpf-bin d=3 m=2
//! 010
//! 111 2.5
//! ```
//!
//! One state per line with an optional weight after a single space (omitted
//! when the weight is 1). `m` counts the state lines. Continuous datasets use
//! `#mpf-real d=<d> m=<m>` followed by comma-separated rows.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ContinuousDataset, DiscreteDataset};
use crate::error::{MpfError, Result};
use crate::model::{BinaryState, CouplingMatrix, IcaParameters, Support, SupportKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| MpfError::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn parse_header(line: &str, tag: &str) -> Result<(usize, usize)> {
    let bad = |msg: String| MpfError::Parse { line: 1, msg };
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(bad(format!("expected header starting with `{tag}`")));
    }
    let mut field = |key: &str| -> Result<usize> {
        let tok = parts.next().ok_or_else(|| bad(format!("missing `{key}=`")))?;
        tok.strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("malformed `{tok}`, expected `{key}=<count>`")))
    };
    let d = field("d")?;
    let m = field("m")?;
    Ok((d, m))
}

fn body_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().skip(1).map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

pub fn format_discrete(data: &DiscreteDataset) -> String {
    let mut out = format!("#mpf-bin d={} m={}\n", data.dim(), data.len());
    for (state, w) in data.iter() {
        if w == 1.0 {
            out.push_str(&format!("{state}\n"));
        } else {
            out.push_str(&format!("{state} {w}\n"));
        }
    }
    out
}

pub fn parse_discrete(text: &str) -> Result<DiscreteDataset> {
    let header = text.lines().next().ok_or(MpfError::Parse { line: 1, msg: "empty file".into() })?;
    let (d, m) = parse_header(header, "#mpf-bin")?;
    let mut entries = Vec::with_capacity(m);
    for (n, line) in body_lines(text) {
        let err = |msg: String| MpfError::Parse { line: n, msg };
        let (bits, weight) = match line.split_once(' ') {
            Some((b, w)) => (b, w.trim().parse::<f64>().map_err(|e| err(format!("weight: {e}")))?),
            None => (line.trim_end(), 1.0),
        };
        let state: BinaryState = bits.parse().map_err(|e| err(format!("{e}")))?;
        if state.dim() != d {
            return Err(err(format!("state has {} bits, header says d={d}", state.dim())));
        }
        entries.push((state, weight));
    }
    if entries.len() != m {
        return Err(MpfError::Parse { line: 1, msg: format!("header says m={m}, found {} lines", entries.len()) });
    }
    DiscreteDataset::from_weighted(d, entries)
}

pub fn format_continuous(data: &ContinuousDataset) -> String {
    let mut out = format!("#mpf-real d={} m={}\n", data.dim(), data.len());
    for row in data.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_continuous(text: &str) -> Result<ContinuousDataset> {
    let header = text.lines().next().ok_or(MpfError::Parse { line: 1, msg: "empty file".into() })?;
    let (d, m) = parse_header(header, "#mpf-real")?;
    let mut rows = Vec::with_capacity(m);
    for (n, line) in body_lines(text) {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| MpfError::Parse { line: n, msg: e.to_string() })?;
        if row.len() != d {
            return Err(MpfError::Parse { line: n, msg: format!("{} values, header says d={d}", row.len()) });
        }
        rows.push(row);
    }
    if rows.len() != m {
        return Err(MpfError::Parse { line: 1, msg: format!("header says m={m}, found {} rows", rows.len()) });
    }
    ContinuousDataset::new(d, rows)
}

/// Either kind of dataset, told apart by the header tag.
#[derive(Debug, Clone)]
pub enum AnyDataset {
    Binary(DiscreteDataset),
    Real(ContinuousDataset),
}

pub fn read_dataset(path: &Path) -> Result<AnyDataset> {
    let text = fs::read_to_string(path)?;
    if text.starts_with("#mpf-bin") {
        Ok(AnyDataset::Binary(parse_discrete(&text)?))
    } else if text.starts_with("#mpf-real") {
        Ok(AnyDataset::Real(parse_continuous(&text)?))
    } else {
        Err(MpfError::Parse { line: 1, msg: "unknown dataset header".into() })
    }
}

pub fn write_discrete(path: &Path, data: &DiscreteDataset) -> Result<()> {
    write_atomic(path, format_discrete(data).as_bytes())
}

pub fn write_continuous(path: &Path, data: &ContinuousDataset) -> Result<()> {
    write_atomic(path, format_continuous(data).as_bytes())
}

/// A model as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec {
    Ising {
        d: usize,
        support: SupportKind,
        /// `(i, j, J_ij)` for every support edge, `i < j`.
        couplings: Vec<(usize, usize, f64)>,
        bias: Vec<f64>,
    },
    Ica {
        d: usize,
        /// Row-major filter matrix.
        filters: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub model: ModelSpec,
}

impl ModelFile {
    pub fn from_couplings(j: &CouplingMatrix) -> Self {
        let couplings = j.support().edges().iter().zip(j.offdiag()).map(|(&(a, b), &v)| (a, b, v)).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSpec::Ising {
                d: j.dim(),
                support: j.support().kind().clone(),
                couplings,
                bias: j.diag().to_vec(),
            },
        }
    }

    pub fn from_ica(j: &IcaParameters) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSpec::Ica { d: j.dim(), filters: j.as_slice().to_vec() },
        }
    }

    pub fn to_couplings(&self) -> Result<CouplingMatrix> {
        let ModelSpec::Ising { d, support, couplings, bias } = &self.model else {
            return Err(MpfError::InvalidArgument("model file holds an ICA model, not an Ising model".into()));
        };
        let sup = match support {
            SupportKind::Lattice { rows, cols } => Support::lattice(*rows, *cols)?,
            SupportKind::Full => Support::full(*d)?,
            SupportKind::Custom => Support::from_edges(*d, couplings.iter().map(|&(i, j, _)| (i, j)))?,
        };
        if sup.dim() != *d {
            return Err(MpfError::InvalidArgument(format!("support dimension {} != d = {d}", sup.dim())));
        }
        let mut offdiag = vec![0.0; sup.n_edges()];
        for &(i, j, v) in couplings {
            let e = sup
                .edge_index(i, j)
                .ok_or_else(|| MpfError::Support(format!("coupling ({i}, {j}) is not in the declared support")))?;
            offdiag[e] = v;
        }
        CouplingMatrix::new(sup, offdiag, bias.clone())
    }

    pub fn to_ica(&self) -> Result<IcaParameters> {
        match &self.model {
            ModelSpec::Ica { d, filters } => IcaParameters::new(*d, filters.clone()),
            ModelSpec::Ising { .. } => Err(MpfError::InvalidArgument("model file holds an Ising model, not ICA".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        check_schema(file.schema_version)?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}

pub(crate) fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(MpfError::InvalidArgument(format!(
            "unsupported schema version {version} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_lattice_glass;
    use crate::samplers::{exact_sample, ica_sample};

    #[test]
    fn discrete_round_trip() {
        let j = random_lattice_glass(2, 3, 1.0, 1).unwrap();
        let data = exact_sample(j.model(), j.theta(), 500, 2).unwrap();
        assert_eq!(parse_discrete(&format_discrete(&data)).unwrap(), data);
        let weighted = data.scaled(0.37).unwrap();
        assert_eq!(parse_discrete(&format_discrete(&weighted)).unwrap(), weighted);
        let empty = DiscreteDataset::empty(4);
        assert_eq!(format_discrete(&empty), "#mpf-bin d=4 m=0\n");
        assert_eq!(parse_discrete("#mpf-bin d=4 m=0\n").unwrap(), empty);
    }

    #[test]
    fn discrete_parse_errors() {
        assert!(parse_discrete("#mpf-bin d=2 m=1\n012\n").is_err());
        assert!(parse_discrete("#mpf-bin d=2 m=2\n01\n").is_err());
        assert!(parse_discrete("#mpf-bin d=2\n01\n").is_err());
        assert!(parse_discrete("#mpf-bin d=2 m=1\n01 -1\n").is_err());
        assert!(parse_discrete("#mpf-real d=2 m=1\n01\n").is_err());
    }

    #[test]
    fn continuous_round_trip() {
        let data = ica_sample(&IcaParameters::random_well_conditioned(3, 4), 50, 1).unwrap();
        let back = parse_continuous(&format_continuous(&data)).unwrap();
        assert_eq!(back.rows(), data.rows());
    }

    #[test]
    fn model_round_trip() {
        for j in [random_lattice_glass(3, 2, 2.0, 5).unwrap(), crate::model::random_full_glass(4, 1.0, 1).unwrap()] {
            let file = ModelFile::from_couplings(&j);
            let text = serde_json::to_string(&file).unwrap();
            let back: ModelFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_couplings().unwrap().theta(), j.theta());
        }
        let ica = IcaParameters::random_well_conditioned(2, 3);
        assert_eq!(ModelFile::from_ica(&ica).to_ica().unwrap(), ica);
        assert!(ModelFile::from_ica(&ica).to_couplings().is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
