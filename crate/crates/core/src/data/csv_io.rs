use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FlowDataset, FlowRecord, Label};
use crate::error::{FeaeError, Result};

/// Numeric NetFlow v2 columns used as edge features. The address columns
/// identify the endpoints and are not features.
pub const NF_V2_FEATURES: [&str; 41] = [
    "L4_SRC_PORT",
    "L4_DST_PORT",
    "PROTOCOL",
    "L7_PROTO",
    "IN_BYTES",
    "IN_PKTS",
    "OUT_BYTES",
    "OUT_PKTS",
    "TCP_FLAGS",
    "CLIENT_TCP_FLAGS",
    "SERVER_TCP_FLAGS",
    "FLOW_DURATION_MILLISECONDS",
    "DURATION_IN",
    "DURATION_OUT",
    "MIN_TTL",
    "MAX_TTL",
    "LONGEST_FLOW_PKT",
    "SHORTEST_FLOW_PKT",
    "MIN_IP_PKT_LEN",
    "MAX_IP_PKT_LEN",
    "SRC_TO_DST_SECOND_BYTES",
    "DST_TO_SRC_SECOND_BYTES",
    "RETRANSMITTED_IN_BYTES",
    "RETRANSMITTED_IN_PKTS",
    "RETRANSMITTED_OUT_BYTES",
    "RETRANSMITTED_OUT_PKTS",
    "SRC_TO_DST_AVG_THROUGHPUT",
    "DST_TO_SRC_AVG_THROUGHPUT",
    "NUM_PKTS_UP_TO_128_BYTES",
    "NUM_PKTS_128_TO_256_BYTES",
    "NUM_PKTS_256_TO_512_BYTES",
    "NUM_PKTS_512_TO_1024_BYTES",
    "NUM_PKTS_1024_TO_1514_BYTES",
    "TCP_WIN_MAX_IN",
    "TCP_WIN_MAX_OUT",
    "ICMP_TYPE",
    "ICMP_IPV4_TYPE",
    "DNS_QUERY_ID",
    "DNS_QUERY_TYPE",
    "DNS_TTL_ANSWER",
    "FTP_COMMAND_RET_CODE",
];

/// Which header names hold the endpoints, features, and ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub src: String,
    pub dst: String,
    pub features: Vec<String>,
    pub label: String,
    pub family: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            src: "IPV4_SRC_ADDR".into(),
            dst: "IPV4_DST_ADDR".into(),
            features: NF_V2_FEATURES.iter().map(|s| s.to_string()).collect(),
            label: "Label".into(),
            family: "Attack".into(),
        }
    }
}

impl ColumnMapping {
    pub fn with_features(features: Vec<String>) -> Self {
        ColumnMapping {
            features,
            ..Default::default()
        }
    }

    /// Parses a mapping from TOML; omitted keys keep the NF-v2 names.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FeaeError::Config(format!("column mapping: {e}")))
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| FeaeError::Schema(format!("missing column `{name}`")))
}

fn parse_label(cell: &str, row: usize) -> Result<Label> {
    match cell.trim() {
        "0" | "0.0" => Ok(Label::Benign),
        "1" | "1.0" => Ok(Label::Attack),
        other => Err(FeaeError::Parse {
            row,
            message: format!("label `{other}` is not 0 or 1"),
        }),
    }
}

/// Reads a comma-separated flow file with a header row. Rows are 1-indexed
/// in error messages, counting data rows only.
pub fn load_flows(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<FlowDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FeaeError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();

    let src = column(&headers, &mapping.src)?;
    let dst = column(&headers, &mapping.dst)?;
    let label = column(&headers, &mapping.label)?;
    let family = column(&headers, &mapping.family)?;
    let features = mapping
        .features
        .iter()
        .map(|f| column(&headers, f))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let mut values = Vec::with_capacity(features.len());
        for (&c, name) in features.iter().zip(&mapping.features) {
            let raw = cell(c).trim();
            let v: f64 = raw.parse().map_err(|_| FeaeError::Parse {
                row: row_no,
                message: format!("column `{name}`: `{raw}` is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(FeaeError::Parse {
                    row: row_no,
                    message: format!("column `{name}` is not finite"),
                });
            }
            values.push(v);
        }
        let lbl = parse_label(cell(label), row_no)?;
        let fam = match lbl {
            Label::Benign => None,
            Label::Attack => {
                let f = cell(family).trim();
                if f.is_empty() {
                    return Err(FeaeError::Parse {
                        row: row_no,
                        message: "attack row without a family".into(),
                    });
                }
                Some(f.to_string())
            }
        };
        records.push(FlowRecord {
            src_addr: cell(src).trim().to_string(),
            dst_addr: cell(dst).trim().to_string(),
            features: values,
            label: lbl,
            family: fam,
        });
    }
    FlowDataset::new(
        records,
        mapping.features.clone(),
        path.display().to_string(),
    )
}

/// Writes a dataset in the same layout `load_flows` reads. Benign rows carry
/// the family string `Benign`.
pub fn write_flows(
    path: impl AsRef<Path>,
    ds: &FlowDataset,
    mapping: &ColumnMapping,
) -> Result<()> {
    let path = path.as_ref();
    if mapping.features.len() != ds.num_features() {
        return Err(FeaeError::Schema(format!(
            "mapping names {} features, dataset has {}",
            mapping.features.len(),
            ds.num_features()
        )));
    }
    let file = File::create(path).map_err(|e| FeaeError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![mapping.src.as_str(), mapping.dst.as_str()];
    header.extend(mapping.features.iter().map(String::as_str));
    header.push(&mapping.label);
    header.push(&mapping.family);
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![r.src_addr.clone(), r.dst_addr.clone()];
        row.extend(r.features.iter().map(|v| v.to_string()));
        row.push(if r.label.is_attack() { "1" } else { "0" }.into());
        row.push(r.family.clone().unwrap_or_else(|| "Benign".into()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| FeaeError::io(path, e))?;
    let mut inner = w
        .into_inner()
        .map_err(|e| FeaeError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| FeaeError::io(path, e))
}
