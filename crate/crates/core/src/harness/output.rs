use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::run::{Outcome, ResultSet};
use crate::error::{Error, Result};
use crate::stats::StatsReport;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const REPORTS_FILE: &str = "reports.csv";
pub const REPORTS_JSON_FILE: &str = "reports.json";
pub const CONSTANTS_FILE: &str = "constants.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Distance used for Gaussianity checks, recorded in every report header.
pub const DISTANCE_NOTE: &str =
    "Kolmogorov distance to N(0,1) replaces total variation, which is not estimable from finite samples";

/// Floats with 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::InvalidParameter(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidParameter(format!("csv encoding failed: {e}")))
}

#[derive(Serialize)]
struct ReportHeader<'a> {
    kind: &'a str,
    seed: u64,
    config_hash: &'a str,
    n_replicas: usize,
    distance: &'static str,
}

#[derive(Serialize)]
struct ReportsJson<'a> {
    header: ReportHeader<'a>,
    outcome: &'a Outcome,
    notes: &'a [String],
    reports: &'a [StatsReport],
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    kind: &'a str,
    seed: u64,
    config_hash: &'a str,
    config: &'a str,
    versions: Versions,
    exit_code: i32,
    files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct Versions {
    riesz_she_core: &'static str,
}

/// Serialized output files in write order, excluding the manifest.
pub fn render(result: &ResultSet) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let samples = csv_bytes(
        &["replica_id", "R", "t", "G_R"],
        result
            .samples
            .iter()
            .map(|s| vec![s.replica_id.to_string(), num(s.radius), num(s.time), num(s.value)]),
    )?;
    let reports = csv_bytes(
        &["metric", "params", "estimate", "stderr", "target", "tolerance", "pass"],
        result.reports.iter().map(|r| {
            vec![
                r.metric.clone(),
                r.params.clone(),
                num(r.estimate),
                num(r.stderr),
                num(r.target),
                num(r.tolerance),
                r.pass.to_string(),
            ]
        }),
    )?;
    let constants = csv_bytes(
        &["name", "d", "beta", "region_kind", "params", "value", "stderr", "method"],
        result.constants.iter().map(|c| {
            vec![
                c.name.clone(),
                c.d.to_string(),
                num(c.beta),
                c.region_kind.clone(),
                c.params.clone(),
                num(c.value),
                num(c.stderr),
                c.method.clone(),
            ]
        }),
    )?;
    let json = ReportsJson {
        header: ReportHeader {
            kind: &result.kind,
            seed: result.seed,
            config_hash: &result.config_hash,
            n_replicas: result.n_replicas,
            distance: DISTANCE_NOTE,
        },
        outcome: &result.outcome,
        notes: &result.notes,
        reports: &result.reports,
    };
    let mut reports_json = serde_json::to_vec_pretty(&json)
        .map_err(|e| Error::InvalidParameter(format!("json encoding failed: {e}")))?;
    reports_json.push(b'\n');
    Ok(vec![
        (SAMPLES_FILE, samples),
        (REPORTS_FILE, reports),
        (REPORTS_JSON_FILE, reports_json),
        (CONSTANTS_FILE, constants),
    ])
}

/// Writes every output file and the manifest into `outdir`; returns the written paths.
pub fn emit_results(result: &ResultSet, outdir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let files = render(result)?;
    let mut written = Vec::with_capacity(files.len() + 1);
    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = outdir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        written.push(path);
    }
    let manifest = Manifest {
        kind: &result.kind,
        seed: result.seed,
        config_hash: &result.config_hash,
        config: &result.config_echo,
        versions: Versions {
            riesz_she_core: env!("CARGO_PKG_VERSION"),
        },
        exit_code: result.exit_code(),
        files: entries,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| Error::InvalidParameter(format!("json encoding failed: {e}")))?;
    bytes.push(b'\n');
    let path = outdir.join(MANIFEST_FILE);
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentConfig;

    fn empty() -> ResultSet {
        let config = ExperimentConfig::parse("d = 1\nbeta = 0.5\nn = 64\nL = 8\nsigma = linear\nT = 0.25\n").unwrap();
        ResultSet::empty(&config)
    }

    #[test]
    fn empty_result_set_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_results(&empty(), dir.path()).unwrap();
        assert_eq!(paths.len(), 5);
        let samples = fs::read_to_string(dir.path().join(SAMPLES_FILE)).unwrap();
        assert_eq!(samples, "replica_id,R,t,G_R\r\n");
        let reports = fs::read_to_string(dir.path().join(REPORTS_FILE)).unwrap();
        assert_eq!(reports, "metric,params,estimate,stderr,target,tolerance,pass\r\n");
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(manifest["files"].as_array().unwrap().len(), 4);
        assert!(manifest["config"].as_str().unwrap().contains("beta = 0.5"));
    }

    #[test]
    fn emission_is_byte_stable() {
        let mut r = empty();
        r.samples.push(super::super::run::SampleRow {
            replica_id: 3,
            radius: 4.0,
            time: 0.25,
            value: -0.1,
        });
        r.reports.push(StatsReport::new("m", "R=4;t=0.25", 0.1, 0.01, 0.0, 0.5, crate::stats::Rule::Within));
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_results(&r, a.path()).unwrap();
        emit_results(&r, b.path()).unwrap();
        emit_results(&r, b.path()).unwrap();
        for name in [SAMPLES_FILE, REPORTS_FILE, REPORTS_JSON_FILE, CONSTANTS_FILE, MANIFEST_FILE] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
        let samples = fs::read_to_string(a.path().join(SAMPLES_FILE)).unwrap();
        assert!(samples.contains("3,4.0000000000000000e0,2.5000000000000000e-1,-1.0000000000000001e-1"), "{samples}");
        let reports = fs::read_to_string(a.path().join(REPORTS_FILE)).unwrap();
        assert!(reports.contains("\"R=4;t=0.25\"") || reports.contains("R=4;t=0.25"));
    }
}
