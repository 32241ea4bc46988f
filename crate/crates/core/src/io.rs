//! Distance-matrix CSV, JSON space descriptors, chain JSON and coordinate
//! CSV.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::PartitionChain;
use crate::embed::EmbeddingResult;
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, ValidateOptions};

/// Non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod inf_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(super::non_finite_name(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => super::parse_float(&t)
                .ok_or_else(|| de::Error::custom(format!("not a number: {t}"))),
        }
    }
}

/// [`inf_f64`] for optional values.
pub mod option_inf_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::inf_f64::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::inf_f64")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

fn non_finite_name(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// Decimal float, also accepting `inf`, `+inf`, `-inf`, `infinity`, `nan`.
pub fn parse_float(s: &str) -> Option<f64> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => t.parse().ok(),
    }
}

/// 17 significant digits, or the non-finite names.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        non_finite_name(v).to_string()
    }
}

/// Reads a distance matrix: a row of labels, then one row per point.
pub fn read_matrix_csv<R: Read>(reader: R, opts: &ValidateOptions) -> Result<FiniteMetricSpace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Option<Vec<String>> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if labels.is_none() {
            labels = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| {
                parse_float(field).ok_or_else(|| Error::Parse {
                    line,
                    column: c + 1,
                    message: format!("not a number: {field:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let labels = labels.ok_or(Error::Empty)?;
    FiniteMetricSpace::validate(&rows, labels, opts)
}

pub fn write_matrix_csv<W: Write>(space: &FiniteMetricSpace, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(space.labels()).map_err(csv_io)?;
    for row in space.to_matrix() {
        w.write_record(row.iter().map(|&v| format_float(v)))
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<f64>>,
}

impl SpaceDescriptor {
    pub fn from_space(space: &FiniteMetricSpace) -> Self {
        Self {
            labels: space.labels().to_vec(),
            dist: space.to_matrix(),
        }
    }

    pub fn into_space(self, opts: &ValidateOptions) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::validate(&self.dist, self.labels, opts)
    }
}

/// Loads a `.json` descriptor or a CSV matrix.
pub fn load_space(path: &Path, opts: &ValidateOptions) -> Result<FiniteMetricSpace> {
    let file = std::fs::File::open(path)?;
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        let d: SpaceDescriptor = serde_json::from_reader(std::io::BufReader::new(file))?;
        d.into_space(opts)
    } else {
        read_matrix_csv(std::io::BufReader::new(file), opts)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainLevelJson {
    pub n: usize,
    #[serde(with = "option_inf_f64")]
    pub threshold: Option<f64>,
    pub blocks: Vec<Vec<usize>>,
    #[serde(with = "inf_f64")]
    pub delta: f64,
    #[serde(with = "inf_f64")]
    pub gamma: f64,
    #[serde(rename = "R", with = "inf_f64")]
    pub log_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainJson {
    pub levels: Vec<ChainLevelJson>,
}

impl ChainJson {
    pub fn from_chain(chain: &PartitionChain) -> Self {
        let levels = chain
            .levels()
            .iter()
            .zip(chain.stats())
            .zip(chain.thresholds())
            .zip(chain.indices())
            .map(|(((p, st), t), &n)| ChainLevelJson {
                n,
                threshold: *t,
                blocks: p.blocks().to_vec(),
                delta: st.delta,
                gamma: st.gamma,
                log_ratio: st.log_ratio,
            })
            .collect();
        Self { levels }
    }

    /// Rebuilds the chain on `space`, recomputing the statistics.
    pub fn into_chain(self, space: &FiniteMetricSpace) -> Result<PartitionChain> {
        let n = space.len();
        let mut levels = Vec::with_capacity(self.levels.len());
        let mut thresholds = Vec::with_capacity(self.levels.len());
        let mut indices = Vec::with_capacity(self.levels.len());
        for l in self.levels {
            levels.push(crate::partition::Partition::from_blocks(n, l.blocks)?);
            thresholds.push(l.threshold);
            indices.push(l.n);
        }
        PartitionChain::new(space, levels, thresholds)?.with_indices(indices)
    }
}

/// `label, x_1, …, x_N` per point.
pub fn write_coordinates_csv<W: Write>(result: &EmbeddingResult, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((1..=result.n_dim).map(|k| format!("x_{k}")));
    w.write_record(&header).map_err(csv_io)?;
    for (label, c) in result.labels.iter().zip(&result.coords) {
        let mut rec = vec![label.clone()];
        rec.extend(c.iter().map(|&v| format_float(v)));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::dendrogram_chain;

    #[test]
    fn csv_round_trip() {
        let text = "a,b,c\n0,0.1,0.3\n0.1,0,0.25\n0.3,0.25,0\n";
        let s = read_matrix_csv(text.as_bytes(), &ValidateOptions::default()).unwrap();
        let mut out = Vec::new();
        write_matrix_csv(&s, &mut out).unwrap();
        let t = read_matrix_csv(out.as_slice(), &ValidateOptions::default()).unwrap();
        assert_eq!(s.to_matrix(), t.to_matrix());
        assert_eq!(t.labels(), ["a", "b", "c"]);
    }

    #[test]
    fn parse_error_position() {
        let text = "a,b\n0,0.1\n0.1,x\n";
        match read_matrix_csv(text.as_bytes(), &ValidateOptions::default()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asymmetric_rejected() {
        let text = "a,b\n0,0.1\n0.2,0\n";
        assert!(read_matrix_csv(text.as_bytes(), &ValidateOptions::default()).is_err());
    }

    #[test]
    fn chain_json_round_trip() {
        let text = "a,b,c\n0,0.1,0.3\n0.1,0,0.25\n0.3,0.25,0\n";
        let s = read_matrix_csv(text.as_bytes(), &ValidateOptions::default()).unwrap();
        let c = dendrogram_chain(&s);
        let json = serde_json::to_string(&ChainJson::from_chain(&c)).unwrap();
        let back: ChainJson = serde_json::from_str(&json).unwrap();
        let c2 = back.into_chain(&s).unwrap();
        assert_eq!(c2.levels(), c.levels());
    }
}
