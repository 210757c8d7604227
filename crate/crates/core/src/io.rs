//! CSV datasets and JSON persistence of models and graphs.
//!
//! Floats are written in the shortest form that parses back to the same
//! bits, so save-then-load is exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circular::wrap;
use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::estimation::Method;
use crate::inference::{build_graph, Correction, EdgeTest, GraphStructure};
use crate::model::{FamilyKind, FamilyMask, Layout, TorusGraphParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Radians,
    Degrees,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Header present when any cell of the first row is not a number.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub units: Units,
    pub header: HeaderMode,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            units: Units::Radians,
            header: HeaderMode::Auto,
            delimiter: b',',
        }
    }
}

/// Angles in radians with channel names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub angles: AngleMatrix,
    pub channel_names: Vec<String>,
    pub source_path: Option<PathBuf>,
}

/// `ch01`, `ch02`, …
pub fn default_channel_names(d: usize) -> Vec<String> {
    let width = d.to_string().len().max(2);
    (1..=d).map(|i| format!("ch{i:0width$}")).collect()
}

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> TorusError {
    TorusError::Parse {
        row,
        column,
        message: message.into(),
    }
}

/// Reads trials × channels angles. Rows and columns in errors are 1-based
/// positions in the file.
pub fn read_csv<R: Read>(input: R, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(i + 1, 1, e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((i + 1, rec));
    }
    if records.is_empty() {
        return Err(parse_err(1, 1, "empty file"));
    }
    let first = &records[0].1;
    let has_header = match options.header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => first.iter().any(|c| c.parse::<f64>().is_err()),
    };
    let d = first.len();
    let (names, body) = if has_header {
        let names: Vec<String> = first.iter().map(str::to_string).collect();
        for (c, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(parse_err(records[0].0, c + 1, "empty channel name"));
            }
            if names[..c].contains(name) {
                return Err(parse_err(records[0].0, c + 1, format!("duplicate channel name '{name}'")));
            }
        }
        (names, &records[1..])
    } else {
        (default_channel_names(d), &records[..])
    };
    if body.is_empty() {
        return Err(parse_err(records[0].0 + 1, 1, "no data rows"));
    }
    let mut values = Vec::with_capacity(body.len() * d);
    for (line, rec) in body {
        if rec.len() != d {
            return Err(parse_err(
                *line,
                rec.len().min(d) + 1,
                format!("expected {d} columns, found {}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(*line, c + 1, format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(*line, c + 1, format!("'{cell}' is not finite")));
            }
            values.push(match options.units {
                Units::Radians => wrap(v),
                Units::Degrees => wrap(v.to_radians()),
            });
        }
    }
    Ok(Dataset {
        angles: AngleMatrix::from_row_major(body.len(), d, values)?,
        channel_names: names,
        source_path: None,
    })
}

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let mut ds = read_csv(File::open(path)?, options)?;
    ds.source_path = Some(path.to_path_buf());
    Ok(ds)
}

fn csv_err(e: csv::Error) -> TorusError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TorusError::Io(io),
        other => TorusError::Schema(format!("{other:?}")),
    }
}

/// Writes angles in radians with a header row of channel names.
pub fn write_angles_csv<W: Write>(out: W, angles: &AngleMatrix, names: &[String]) -> Result<()> {
    if names.len() != angles.d() {
        return Err(TorusError::Dimension {
            expected: angles.d(),
            got: names.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(names).map_err(csv_err)?;
    for row in angles.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingEntry {
    j: usize,
    k: usize,
    phi: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    schema_version: u32,
    d: usize,
    family: FamilyKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    zero_edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    marginals: Vec<[f64; 2]>,
    couplings: Vec<CouplingEntry>,
}

/// A persisted model: parameters plus optional provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub params: TorusGraphParams,
    pub channel_names: Option<Vec<String>>,
    pub method: Option<Method>,
    pub n: Option<usize>,
}

impl ModelFile {
    pub fn new(params: TorusGraphParams) -> Self {
        ModelFile {
            params,
            channel_names: None,
            method: None,
            n: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let p = &self.params;
        let layout = p.layout();
        let doc = ModelDoc {
            schema_version: SCHEMA_VERSION,
            d: p.d(),
            family: p.family().kind(),
            zero_edges: p.family().zero_edges().to_vec(),
            channel_names: self.channel_names.clone(),
            method: self.method,
            n: self.n,
            marginals: (0..p.d()).map(|j| p.marginal(j)).collect(),
            couplings: layout
                .edges()
                .map(|(j, k)| CouplingEntry {
                    j,
                    k,
                    phi: p.coupling(j, k),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(TorusError::Schema(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let d = doc.d;
        let layout = Layout::new(d);
        if doc.marginals.len() != d {
            return Err(TorusError::Schema(format!("expected {d} marginal blocks, found {}", doc.marginals.len())));
        }
        if doc.couplings.len() != layout.n_edges() {
            return Err(TorusError::Schema(format!(
                "expected {} coupling blocks, found {}",
                layout.n_edges(),
                doc.couplings.len()
            )));
        }
        if let Some(names) = &doc.channel_names {
            if names.len() != d {
                return Err(TorusError::Schema(format!("expected {d} channel names, found {}", names.len())));
            }
        }
        let mut phi = vec![0.0; layout.n_params()];
        for (j, m) in doc.marginals.iter().enumerate() {
            phi[2 * j..2 * j + 2].copy_from_slice(m);
        }
        let mut seen = vec![false; layout.n_edges()];
        for c in &doc.couplings {
            if c.j >= c.k || c.k >= d {
                return Err(TorusError::Schema(format!("invalid coupling edge ({}, {})", c.j, c.k)));
            }
            let e = layout.edge_index(c.j, c.k);
            if std::mem::replace(&mut seen[e], true) {
                return Err(TorusError::Schema(format!("duplicate coupling edge ({}, {})", c.j, c.k)));
            }
            let o = layout.coupling(c.j, c.k);
            phi[o..o + 4].copy_from_slice(&c.phi);
        }
        let family = FamilyMask::new(doc.family, d)
            .with_zero_edges(&doc.zero_edges)
            .map_err(|e| TorusError::Schema(e.to_string()))?;
        let params = TorusGraphParams::new(d, phi, family).map_err(|e| TorusError::Schema(e.to_string()))?;
        Ok(ModelFile {
            params,
            channel_names: doc.channel_names,
            method: doc.method,
            n: doc.n,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    schema_version: u32,
    d: usize,
    alpha: f64,
    correction: Correction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel_names: Option<Vec<String>>,
    edges: Vec<EdgeRecord>,
}

/// An edge test plus its thresholded decision. The last two fields are
/// recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    j: usize,
    k: usize,
    x2: f64,
    df: usize,
    p: f64,
    #[serde(default)]
    p_adjusted: Option<f64>,
    #[serde(default)]
    present: Option<bool>,
}

/// A persisted graph: the edge tests and the thresholding rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFile {
    pub graph: GraphStructure,
    pub channel_names: Option<Vec<String>>,
}

impl GraphFile {
    pub fn to_json(&self) -> Result<String> {
        let g = &self.graph;
        let doc = GraphDoc {
            schema_version: SCHEMA_VERSION,
            d: g.d,
            alpha: g.alpha,
            correction: g.correction,
            channel_names: self.channel_names.clone(),
            edges: g
                .tests
                .iter()
                .map(|t| EdgeRecord {
                    j: t.j,
                    k: t.k,
                    x2: t.x2,
                    df: t.df,
                    p: t.p,
                    p_adjusted: Some(g.corrected_p(t)),
                    present: Some(g.has_edge(t.j, t.k)),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(TorusError::Schema(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        if let Some(names) = &doc.channel_names {
            if names.len() != doc.d {
                return Err(TorusError::Schema(format!("expected {} channel names, found {}", doc.d, names.len())));
            }
        }
        let tests: Vec<EdgeTest> = doc
            .edges
            .iter()
            .map(|e| EdgeTest {
                j: e.j,
                k: e.k,
                x2: e.x2,
                df: e.df,
                p: e.p,
            })
            .collect();
        let graph = build_graph(doc.d, &tests, doc.alpha, doc.correction)
            .map_err(|e| TorusError::Schema(e.to_string()))?;
        Ok(GraphFile {
            graph,
            channel_names: doc.channel_names,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Square 0/1 adjacency matrix with channel names on both margins.
pub fn write_adjacency_csv<W: Write>(out: W, graph: &GraphStructure, names: &[String]) -> Result<()> {
    if names.len() != graph.d {
        return Err(TorusError::Dimension {
            expected: graph.d,
            got: names.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (j, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..graph.d).map(|k| if graph.has_edge(j, k) { "1" } else { "0" }.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use std::f64::consts::{PI, TAU};

    fn read(text: &str, options: &CsvOptions) -> Result<Dataset> {
        read_csv(text.as_bytes(), options)
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn wraps_on_load() {
        let ds = read("0,3.14159\n6.28319,1.5708\n", &CsvOptions::default()).unwrap();
        assert_eq!((ds.angles.n(), ds.angles.d()), (2, 2));
        assert_eq!(ds.angles.row(0), &[0.0, 3.14159]);
        assert!((ds.angles.row(1)[0] - (6.28319 - TAU)).abs() < 1e-12);
        assert_eq!(ds.channel_names, vec!["ch01", "ch02"]);
    }

    #[test]
    fn degrees_and_headers() {
        let opts = CsvOptions {
            units: Units::Degrees,
            ..CsvOptions::default()
        };
        let ds = read("a;b\n360;180\n-90;45\n", &CsvOptions { delimiter: b';', ..opts }).unwrap();
        assert_eq!(ds.channel_names, vec!["a", "b"]);
        assert_eq!(ds.angles.row(0)[0], 0.0);
        assert!((ds.angles.row(0)[1] - PI).abs() < 1e-15);
        assert!((ds.angles.row(1)[0] - 1.5 * PI).abs() < 1e-15);

        let forced = CsvOptions {
            header: HeaderMode::Present,
            ..CsvOptions::default()
        };
        let ds = read("1,2\n3,4\n", &forced).unwrap();
        assert_eq!(ds.channel_names, vec!["1", "2"]);
        assert_eq!(ds.angles.n(), 1);
    }

    #[test]
    fn parse_errors_have_locations() {
        let opts = CsvOptions::default();
        match read("1,2\n3\n", &opts) {
            Err(TorusError::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        match read("1,2\n3,x\n", &opts) {
            Err(TorusError::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read("", &opts), Err(TorusError::Parse { .. })));
        assert!(matches!(read("a,b\n", &opts), Err(TorusError::Parse { .. })));
        assert!(matches!(read("a,a\n1,2\n", &opts), Err(TorusError::Parse { .. })));
        assert!(matches!(read("1,inf\n", &opts), Err(TorusError::Parse { .. })));
    }

    #[test]
    fn large_file_dimensions() {
        let mut rng = rng_from_seed(90);
        let mut text = String::new();
        for _ in 0..840 {
            let row: Vec<String> = (0..24).map(|_| rng.random_range(0.0..TAU).to_string()).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let ds = read(&text, &CsvOptions::default()).unwrap();
        assert_eq!((ds.angles.n(), ds.angles.d()), (840, 24));
        assert_eq!(ds.channel_names[23], "ch24");
    }

    #[test]
    fn angles_csv_roundtrip() {
        let mut rng = rng_from_seed(91);
        let v: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..TAU)).collect();
        let m = AngleMatrix::from_row_major(10, 3, v).unwrap();
        let mut buf = Vec::new();
        write_angles_csv(&mut buf, &m, &default_channel_names(3)).unwrap();
        let back = read_csv(buf.as_slice(), &CsvOptions::default()).unwrap();
        assert_eq!(back.angles, m);
    }

    #[test]
    fn model_json_roundtrip_is_bitwise() {
        let mut rng = rng_from_seed(92);
        let phi: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0) / 7.0).collect();
        let mut model = ModelFile::new(TorusGraphParams::full(4, phi).unwrap());
        model.method = Some(Method::GroupLasso { lambda: 0.1 / 3.0 });
        model.n = Some(840);
        let text = model.to_json().unwrap();
        let back = ModelFile::from_json(&text).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.params.phi().iter().zip(model.params.phi()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let fam = FamilyMask::new(FamilyKind::PhaseDiff, 3).with_zero_edges(&[(0, 2)]).unwrap();
        let mut p = TorusGraphParams::new(3, vec![0.0; 18], fam).unwrap();
        p.set_coupling(0, 1, [0.5, 0.25, 0.0, 0.0]);
        let mut m = ModelFile::new(p);
        m.channel_names = Some(vec!["a".into(), "b".into(), "c".into()]);
        assert_eq!(ModelFile::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn model_json_schema_errors() {
        let model = ModelFile::new(TorusGraphParams::zeros(2));
        let text = model.to_json().unwrap();
        let bad = [
            text.replace("\"schema_version\": 1", "\"schema_version\": 2"),
            text.replace("\"d\": 2", "\"d\": 3"),
            text.replace("\"family\": \"full\"", "\"family\": \"other\""),
            text.replace("\"marginals\"", "\"marginal\""),
            text.replace("\"family\": \"full\"", "\"family\": \"uniform\"").replace("[\n    [\n      0.0", "[\n    [\n      1.0"),
            "{".to_string(),
        ];
        for b in &bad {
            let err = ModelFile::from_json(b).unwrap_err();
            assert!(err.is_schema(), "{b}: {err:?}");
        }
    }

    #[test]
    fn graph_json_roundtrip_and_adjacency() {
        let tests = vec![
            EdgeTest { j: 0, k: 1, x2: 30.1, df: 4, p: 1e-6 / 3.0 },
            EdgeTest { j: 0, k: 2, x2: 1.2, df: 4, p: 0.87 },
            EdgeTest { j: 1, k: 2, x2: 12.0, df: 4, p: 0.0173 },
        ];
        let graph = build_graph(3, &tests, 0.05, Correction::Bonferroni).unwrap();
        let gf = GraphFile {
            graph,
            channel_names: None,
        };
        let text = gf.to_json().unwrap();
        let back = GraphFile::from_json(&text).unwrap();
        assert_eq!(back, gf);
        assert_eq!(back.to_json().unwrap(), text);

        let mut buf = Vec::new();
        write_adjacency_csv(&mut buf, &gf.graph, &default_channel_names(3)).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, ",ch01,ch02,ch03\nch01,0,1,0\nch02,1,0,0\nch03,0,0,0\n");
    }
}
