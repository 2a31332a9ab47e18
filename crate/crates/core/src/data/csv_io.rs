use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Dataset, SeriesLayout, TimeSeries};

/// Column names of the long `id,t,value` format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub id: String,
    pub t: String,
    pub value: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            id: "id".into(),
            t: "t".into(),
            value: "value".into(),
        }
    }
}

/// Reads long-format series. Series come back in order of first appearance;
/// values are ordered by `t`, which must run `1, 2, ...` without gaps.
pub fn read_series<R: Read>(reader: R, schema: &ColumnSpec) -> Result<Vec<TimeSeries>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` (header: {})", headers.iter().collect::<Vec<_>>().join(","))))
    };
    let (ci, ct, cv) = (column(&schema.id)?, column(&schema.t)?, column(&schema.value)?);

    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let id = field(ci).to_string();
        let t: usize = field(ct).parse().map_err(|_| {
            Error::Schema(format!("line {}: t `{}` is not a positive integer", line + 2, field(ct)))
        })?;
        if t == 0 {
            return Err(Error::Schema(format!("line {}: t is 1-based", line + 2)));
        }
        let v: f64 = field(cv).parse().map_err(|_| {
            Error::Schema(format!("line {}: value `{}` is not a number", line + 2, field(cv)))
        })?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                id,
                t,
                msg: format!("value {v} is negative or non-finite"),
            });
        }
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            })
            .push((t, v));
    }

    order
        .into_iter()
        .map(|id| {
            let mut pts = rows.remove(&id).unwrap_or_default();
            pts.sort_by_key(|&(t, _)| t);
            for (k, &(t, _)) in pts.iter().enumerate() {
                if t != k + 1 {
                    let msg = if k > 0 && pts[k - 1].0 == t {
                        format!("duplicate t={t}")
                    } else {
                        format!("gap: expected t={}, found t={t}", k + 1)
                    };
                    return Err(Error::Integrity { id, msg });
                }
            }
            TimeSeries::new(id, pts.into_iter().map(|(_, v)| v).collect())
        })
        .collect()
}

pub fn load_csv(path: &Path, schema: &ColumnSpec, layout: SeriesLayout) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let series = read_series(BufReader::new(file), schema)?;
    Dataset::new(series, layout)
}

/// Writes series in the long format with header `id,t,value`.
pub fn write_csv<W: Write>(writer: W, series: &[TimeSeries]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["id", "t", "value"])?;
    for ts in series {
        for (k, v) in ts.values().iter().enumerate() {
            w.write_record([ts.id(), &(k + 1).to_string(), &v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
