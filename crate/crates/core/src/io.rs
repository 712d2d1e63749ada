//! Checkpoint JSON and time-series CSV files.
//!
//! # Checkpoints
//!
//! One JSON object:
//!
//! ```text
//! {
//!   "alphabet": C,
//!   "graphs": {"n_units": N, "causal": [[from, to], ...], "lateral": [[a, b], ...]},
//!   "basis": {"kind": "raised_cosine", "k": K, "tau": tau},
//!   "theta": [[...N_a], ...],          one array per unit
//!   "V": [[[...N_a*N_a], ...K], ...],  per causal edge, per basis, row-major
//!   "U": [[...N_a*N_a], ...]           per lateral edge, row-major
//! }
//! ```
//!
//! `V[e][k][a' * N_a + a]` couples statistic `a'` of the edge's source to
//! statistic `a` of its target. `U[e][a * N_a + b]` multiplies
//! `s_first[a] * s_second[b]` for the lateral edge `[first, second]` as
//! listed. Edge arrays follow the order of the edge lists in `graphs`.
//!
//! # Time series
//!
//! Long CSV: header `unit,t,symbol`, or `sequence,unit,t,symbol` for several
//! sequences in one file. Units and sequences are 0-based, `t` is 1-based.
//! Every `(unit, t)` cell of a sequence must be present.
//!
//! Dense CSV: no header, one line per unit with the symbols of steps
//! `1..=T` separated by commas. Lines starting with `#` are ignored.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::graph::GraphSpec;
use crate::model::{transpose, Alphabet, Architecture, ModelParams, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub alphabet: usize,
    pub graphs: GraphSpec,
    pub basis: BasisSpec,
    pub theta: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
}

impl Checkpoint {
    /// `basis` must describe the architecture's basis bank.
    pub fn new(arch: &Architecture, basis: &BasisSpec, params: &ModelParams) -> Result<Self> {
        arch.check_params(params)?;
        if basis.build()? != *arch.basis() {
            return Err(Error::ShapeMismatch("basis spec does not match the architecture".into()));
        }
        let shape = params.shape();
        Ok(Self {
            alphabet: arch.alphabet().size(),
            graphs: GraphSpec::from_graphs(arch.causal(), arch.lateral()),
            basis: basis.clone(),
            theta: (0..shape.n_units).map(|i| params.theta(i).to_vec()).collect(),
            v: (0..shape.n_causal)
                .map(|e| (0..shape.k).map(|k| params.v(e, k).to_vec()).collect())
                .collect(),
            u: (0..shape.n_lateral).map(|e| params.u(e).to_vec()).collect(),
        })
    }

    /// Rebuild the architecture and parameters.
    pub fn restore(&self) -> Result<(Architecture, ModelParams)> {
        let alphabet = Alphabet::new(self.alphabet)?;
        let (causal, lateral) = self.graphs.build()?;
        if causal.n_edges() != self.graphs.causal.len() || lateral.n_edges() != self.graphs.lateral.len() {
            return Err(Error::Config("checkpoint lists a duplicate edge".into()));
        }
        let arch = Architecture::new(alphabet, causal, lateral, self.basis.build()?)?;
        let shape = arch.param_shape();
        let na = shape.na;
        let bad = |what: &str| Error::ShapeMismatch(format!("checkpoint {what} has the wrong shape"));
        if self.theta.len() != shape.n_units || self.theta.iter().any(|t| t.len() != na) {
            return Err(bad("theta"));
        }
        if self.v.len() != shape.n_causal
            || self.v.iter().any(|e| e.len() != shape.k || e.iter().any(|m| m.len() != na * na))
        {
            return Err(bad("V"));
        }
        if self.u.len() != shape.n_lateral || self.u.iter().any(|m| m.len() != na * na) {
            return Err(bad("U"));
        }
        let mut params = ModelParams::zeros(shape);
        for (i, t) in self.theta.iter().enumerate() {
            params.theta_mut(i).copy_from_slice(t);
        }
        for (&[from, to], mats) in self.graphs.causal.iter().zip(&self.v) {
            let e = arch.causal().edge_index(from, to).expect("edge was just built");
            for (k, m) in mats.iter().enumerate() {
                params.v_mut(e, k).copy_from_slice(m);
            }
        }
        for (&[a, b], m) in self.graphs.lateral.iter().zip(&self.u) {
            let e = arch.lateral().edge_index(a, b).expect("edge was just built");
            let stored = if a < b { m.clone() } else { transpose(m, na) };
            params.u_mut(e).copy_from_slice(&stored);
        }
        Ok((arch, params))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Write sequences in long format. A single sequence gets the
/// `unit,t,symbol` header, several get `sequence,unit,t,symbol`.
pub fn write_series_long<W: Write>(out: W, series: &[TimeSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let multi = series.len() != 1;
    if multi {
        w.write_record(["sequence", "unit", "t", "symbol"])?;
    } else {
        w.write_record(["unit", "t", "symbol"])?;
    }
    for (n, x) in series.iter().enumerate() {
        for u in 0..x.n_units() {
            for t in 0..x.len() {
                let row = [u.to_string(), (t + 1).to_string(), x.get(u, t).to_string()];
                if multi {
                    w.write_record(std::iter::once(n.to_string()).chain(row))?;
                } else {
                    w.write_record(&row)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_series_long(path: &Path, series: &[TimeSeries]) -> Result<()> {
    write_series_long(std::fs::File::create(path)?, series)
}

/// Read a whole file, naming it in the error.
pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a long-format file; sizes are inferred from the largest indices.
pub fn read_series_long(path: &Path) -> Result<Vec<TimeSeries>> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let multi = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["unit", "t", "symbol"] => false,
        ["sequence", "unit", "t", "symbol"] => true,
        _ => return Err(parse_err(1, format!("unexpected header {header:?}"))),
    };
    // (sequence, unit, t, symbol, line)
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize, name: &str| -> Result<usize> {
            record[i]
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(line, format!("{name} `{}`: {e}", &record[i])))
        };
        let off = usize::from(multi);
        let seq = if multi { field(0, "sequence")? } else { 0 };
        let t = field(off + 1, "t")?;
        if t == 0 {
            return Err(parse_err(line, "t is 1-based".into()));
        }
        let symbol = u32::try_from(field(off + 2, "symbol")?).map_err(|e| parse_err(line, e.to_string()))?;
        cells.push((seq, field(off, "unit")?, t - 1, symbol, line));
    }
    if cells.is_empty() {
        return Ok(if multi { Vec::new() } else { vec![TimeSeries::zeros(0, 0)] });
    }
    let n_seq = cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
    let mut dims = vec![(0usize, 0usize); n_seq];
    for &(s, u, t, _, _) in &cells {
        dims[s].0 = dims[s].0.max(u + 1);
        dims[s].1 = dims[s].1.max(t + 1);
    }
    let mut out: Vec<TimeSeries> = dims.iter().map(|&(n, t)| TimeSeries::zeros(n, t)).collect();
    let mut seen: Vec<Vec<bool>> = dims.iter().map(|&(n, t)| vec![false; n * t]).collect();
    for &(s, u, t, x, line) in &cells {
        let slot = &mut seen[s][t * dims[s].0 + u];
        if *slot {
            return Err(parse_err(line, format!("duplicate cell unit {u}, t {}", t + 1)));
        }
        *slot = true;
        out[s].set(u, t, x);
    }
    for (s, seen) in seen.iter().enumerate() {
        if let Some(idx) = seen.iter().position(|&b| !b) {
            let (u, t) = (idx % dims[s].0, idx / dims[s].0);
            return Err(parse_err(0, format!("sequence {s} misses unit {u} at t {}", t + 1)));
        }
    }
    Ok(out)
}

/// Write one sequence in dense format.
pub fn write_series_dense<W: Write>(mut out: W, x: &TimeSeries) -> Result<()> {
    for u in 0..x.n_units() {
        let row: Vec<String> = x.row(u).iter().map(u32::to_string).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_series_dense(path: &Path) -> Result<TimeSeries> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| {
                v.trim().parse::<u32>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("symbol `{v}`: {e}"),
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        rows.push(row);
    }
    TimeSeries::from_rows(&rows)
}

/// Read either format, telling them apart by the long-format header.
pub fn read_series(path: &Path) -> Result<Vec<TimeSeries>> {
    let text = read_text(path)?;
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        Some(l) if l.starts_with("unit") || l.starts_with("sequence") => read_series_long(path),
        _ => Ok(vec![read_series_dense(path)?]),
    }
}
