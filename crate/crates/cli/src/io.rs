//! Dataset and chain persistence.
//!
//! Datasets live in a directory of four CSV files (`attributes.csv`,
//! `covariates_conn.csv`, `covariates_attr.csv`, `connectivity.csv`);
//! fitted chains live in a directory of `meta.json` plus per-parameter CSV
//! files with one retained draw per row. All reals are written with 17
//! significant digits (`{:.16e}`), which round-trips every finite f64
//! bit-exactly, and every file is written atomically (temp then rename).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use latentsna::sampler::{PosteriorChain, SamplerConfig, StepCounters};
use latentsna::ConnectomeDataset;

use crate::error::{read_input, CliError, CliResult};

/// Chain directory format revision understood by this build.
pub const CHAIN_FORMAT_VERSION: u32 = 1;

/// Formats a real with 17 significant digits; parsing the result recovers
/// the original f64 exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a real, reporting a validation error with the given context.
pub fn parse_float(s: &str, context: &str) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::validation(format!("{context}: cannot parse {s:?} as a number")))
}

/// Writes bytes to `path` atomically: the content lands in a temporary
/// sibling first and is renamed into place, so readers never observe a
/// partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let name = path
        .file_name()
        .ok_or_else(|| CliError::runtime(format!("{} has no file name", path.display())))?;
    let tmp = dir
        .unwrap_or(Path::new("."))
        .join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::runtime(format!("cannot move output into {}: {e}", path.display()))
    })?;
    Ok(())
}

/// Renders one CSV (header plus rows) and writes it atomically.
pub fn write_csv<R>(path: &Path, header: &[String], rows: R) -> CliResult<()>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .map_err(|e| CliError::runtime(format!("csv encoding failed: {e}")))?;
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| CliError::runtime(format!("csv encoding failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::runtime(format!("csv encoding failed: {e}")))?;
    atomic_write(path, &bytes)
}

/// Reads one CSV into (header, records), reporting validation errors that
/// name the file.
fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let text = read_input(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::validation(format!("{}: malformed header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::validation(format!("{}: row {}: {e}", path.display(), k + 2))
        })?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Serializes a value as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::runtime(format!("json encoding failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// Dataset directories
// ---------------------------------------------------------------------------

/// A dataset read from disk, with the subject identifiers that ordered it.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: ConnectomeDataset,
    pub subject_ids: Vec<String>,
}

fn subject_table_rows(
    path: &Path,
    rows: &[Vec<String>],
    width: usize,
) -> CliResult<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if row.len() != width + 1 {
            return Err(CliError::validation(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                k + 2,
                row.len(),
                width + 1
            )));
        }
        let mut values = Vec::with_capacity(width);
        for (j, field) in row[1..].iter().enumerate() {
            values.push(parse_float(
                field,
                &format!("{}: row {}, column {}", path.display(), k + 2, j + 2),
            )?);
        }
        out.push((row[0].clone(), values));
    }
    Ok(out)
}

/// Loads a `subject_id`-keyed table: header must start with `subject_id`,
/// every row parses as reals, duplicate subjects are rejected.
fn load_subject_table(path: &Path) -> CliResult<(Vec<String>, Vec<(String, Vec<f64>)>)> {
    let (header, records) = read_csv(path)?;
    if header.first().map(String::as_str) != Some("subject_id") {
        return Err(CliError::validation(format!(
            "{}: malformed header: first column must be subject_id, got {:?}",
            path.display(),
            header.first().map(String::as_str).unwrap_or("")
        )));
    }
    let rows = subject_table_rows(path, &records, header.len() - 1)?;
    let mut seen = HashMap::new();
    for (id, _) in &rows {
        if seen.insert(id.clone(), ()).is_some() {
            return Err(CliError::validation(format!(
                "{}: duplicate subject {id}",
                path.display()
            )));
        }
    }
    Ok((header[1..].to_vec(), rows))
}

/// Reorders `rows` to match `order`, requiring the two subject sets to be
/// identical; mismatches name both files.
fn align_subjects(
    rows: Vec<(String, Vec<f64>)>,
    order: &[String],
    path: &Path,
    reference: &str,
) -> CliResult<Vec<Vec<f64>>> {
    let mut by_id: HashMap<String, Vec<f64>> = rows.into_iter().collect();
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        match by_id.remove(id) {
            Some(values) => out.push(values),
            None => {
                return Err(CliError::validation(format!(
                    "subject mismatch: {} lacks subject {id} listed in {reference}",
                    path.display()
                )))
            }
        }
    }
    if let Some(extra) = by_id.into_keys().next() {
        return Err(CliError::validation(format!(
            "subject mismatch: {} names subject {extra} absent from {reference}",
            path.display()
        )));
    }
    Ok(out)
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Parsed long-format connectivity: per subject, the (u, v) → weight map
/// (0-based, u < v) plus the largest node index seen (1-based).
fn load_connectivity_rows(
    path: &Path,
) -> CliResult<(HashMap<String, HashMap<(usize, usize), f64>>, usize)> {
    let (header, records) = read_csv(path)?;
    let expected = ["subject_id", "node_u", "node_v", "weight"];
    if header != expected {
        return Err(CliError::validation(format!(
            "{}: malformed header: expected {:?}, got {:?}",
            path.display(),
            expected.join(","),
            header.join(",")
        )));
    }
    let mut edges: HashMap<String, HashMap<(usize, usize), f64>> = HashMap::new();
    let mut max_node = 0usize;
    for (k, row) in records.iter().enumerate() {
        let line = k + 2;
        if row.len() != 4 {
            return Err(CliError::validation(format!(
                "{}: row {line} has {} fields, expected 4",
                path.display(),
                row.len()
            )));
        }
        let parse_node = |field: &str, name: &str| -> CliResult<usize> {
            field.trim().parse::<usize>().ok().filter(|&x| x >= 1).ok_or_else(|| {
                CliError::validation(format!(
                    "{}: row {line}: {name} must be a 1-based node index, got {field:?}",
                    path.display()
                ))
            })
        };
        let u = parse_node(&row[1], "node_u")?;
        let v = parse_node(&row[2], "node_v")?;
        if u >= v {
            return Err(CliError::validation(format!(
                "{}: row {line}: edges require node_u < node_v, got ({u}, {v})",
                path.display()
            )));
        }
        let w = parse_float(&row[3], &format!("{}: row {line}, weight", path.display()))?;
        max_node = max_node.max(v);
        let subject = edges.entry(row[0].clone()).or_default();
        if let Some(&prev) = subject.get(&(u - 1, v - 1)) {
            let detail = if prev == w {
                "duplicate edge row".to_string()
            } else {
                format!("conflicting weights {} and {}", fmt_float(prev), fmt_float(w))
            };
            return Err(CliError::validation(format!(
                "{}: subject {} edge ({u}, {v}): {detail}",
                path.display(),
                row[0]
            )));
        }
        subject.insert((u - 1, v - 1), w);
    }
    Ok((edges, max_node))
}

/// Assembles each subject's symmetric V×V slice, requiring every (u, v)
/// pair to be present.
fn assemble_networks(
    edges: &HashMap<String, HashMap<(usize, usize), f64>>,
    order: &[String],
    v: usize,
    path: &Path,
) -> CliResult<Vec<DMatrix<f64>>> {
    for id in edges.keys() {
        if !order.contains(id) {
            return Err(CliError::validation(format!(
                "subject mismatch: {} names subject {id} absent from attributes.csv",
                path.display()
            )));
        }
    }
    let empty = HashMap::new();
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let subject = edges.get(id).unwrap_or(&empty);
        let mut slice = DMatrix::zeros(v, v);
        for u in 0..v {
            for w in (u + 1)..v {
                match subject.get(&(u, w)) {
                    Some(&weight) => {
                        slice[(u, w)] = weight;
                        slice[(w, u)] = weight;
                    }
                    None => {
                        return Err(CliError::validation(format!(
                            "{}: subject {id} is missing edge ({}, {})",
                            path.display(),
                            u + 1,
                            w + 1
                        )))
                    }
                }
            }
        }
        out.push(slice);
    }
    Ok(out)
}

/// Loads a full dataset directory. Subject ordering comes from
/// `attributes.csv`; the node count is the largest index in
/// `connectivity.csv` (a header-only file means a single-node network).
pub fn load_dataset(dir: &Path) -> CliResult<LoadedDataset> {
    let attributes_path = dir.join("attributes.csv");
    let (attribute_labels, attr_rows) = load_subject_table(&attributes_path)?;
    if attribute_labels.is_empty() {
        return Err(CliError::validation(format!(
            "{}: needs at least one attribute column",
            attributes_path.display()
        )));
    }
    let subject_ids: Vec<String> = attr_rows.iter().map(|(id, _)| id.clone()).collect();
    let attributes = matrix_from_rows(
        &attr_rows.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>(),
        attribute_labels.len(),
    );

    let conn_cov_path = dir.join("covariates_conn.csv");
    let (conn_cov_labels, conn_cov_rows) = load_subject_table(&conn_cov_path)?;
    let conn_covariates = matrix_from_rows(
        &align_subjects(conn_cov_rows, &subject_ids, &conn_cov_path, "attributes.csv")?,
        conn_cov_labels.len(),
    );

    let attr_cov_path = dir.join("covariates_attr.csv");
    let (attr_cov_labels, attr_cov_rows) = load_subject_table(&attr_cov_path)?;
    let attr_covariates = matrix_from_rows(
        &align_subjects(attr_cov_rows, &subject_ids, &attr_cov_path, "attributes.csv")?,
        attr_cov_labels.len(),
    );

    let connectivity_path = dir.join("connectivity.csv");
    let (edges, max_node) = load_connectivity_rows(&connectivity_path)?;
    let v = max_node.max(1);
    let connectivity = assemble_networks(&edges, &subject_ids, v, &connectivity_path)?;

    let dataset = ConnectomeDataset::new(
        connectivity,
        attributes,
        conn_covariates,
        attr_covariates,
        ConnectomeDataset::default_node_labels(v),
        attribute_labels,
    )?;
    Ok(LoadedDataset { dataset, subject_ids })
}

/// Writes a dataset directory (subjects named s1..sN) and returns the
/// written paths.
pub fn save_dataset(dir: &Path, dataset: &ConnectomeDataset) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let n = dataset.n_subjects();
    let v = dataset.n_nodes();
    let ids: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
    let mut written = Vec::new();

    let subject_rows = |m: &DMatrix<f64>| -> Vec<Vec<String>> {
        (0..n)
            .map(|i| {
                let mut row = vec![ids[i].clone()];
                row.extend((0..m.ncols()).map(|j| fmt_float(m[(i, j)])));
                row
            })
            .collect()
    };

    let attributes_path = dir.join("attributes.csv");
    let mut header = vec!["subject_id".to_string()];
    header.extend(dataset.attribute_labels.iter().cloned());
    write_csv(&attributes_path, &header, subject_rows(&dataset.attributes))?;
    written.push(attributes_path);

    for (name, m, prefix) in [
        ("covariates_conn.csv", &dataset.conn_covariates, 'c'),
        ("covariates_attr.csv", &dataset.attr_covariates, 'g'),
    ] {
        let path = dir.join(name);
        let mut header = vec!["subject_id".to_string()];
        header.extend((1..=m.ncols()).map(|j| format!("{prefix}{j}")));
        write_csv(&path, &header, subject_rows(m))?;
        written.push(path);
    }

    let connectivity_path = dir.join("connectivity.csv");
    let header: Vec<String> =
        ["subject_id", "node_u", "node_v", "weight"].map(str::to_string).to_vec();
    let rows = (0..n).flat_map(|i| {
        let ids = &ids;
        let slice = &dataset.connectivity[i];
        (0..v).flat_map(move |u| {
            ((u + 1)..v).map(move |w| {
                vec![
                    ids[i].clone(),
                    (u + 1).to_string(),
                    (w + 1).to_string(),
                    fmt_float(slice[(u, w)]),
                ]
            })
        })
    });
    write_csv(&connectivity_path, &header, rows)?;
    written.push(connectivity_path);
    Ok(written)
}

// ---------------------------------------------------------------------------
// New-subject directories (prediction inputs)
// ---------------------------------------------------------------------------

/// Whatever blocks a new-subject directory provides. Prediction modes
/// require different subsets; missing covariate files default to an
/// intercept-only column at the call site.
#[derive(Debug, Clone)]
pub struct NewSubjects {
    pub subject_ids: Vec<String>,
    pub connectivity: Option<Vec<DMatrix<f64>>>,
    pub attributes: Option<DMatrix<f64>>,
    pub attribute_labels: Vec<String>,
    pub conn_covariates: Option<DMatrix<f64>>,
    pub attr_covariates: Option<DMatrix<f64>>,
}

/// Loads the files present in a new-subject directory. Subject ordering
/// comes from the first file found among attributes, covariates, and
/// connectivity; all present files must name the same subjects. The node
/// count must match the training network.
pub fn load_new_subjects(dir: &Path, n_nodes: usize) -> CliResult<NewSubjects> {
    let attributes_path = dir.join("attributes.csv");
    let conn_cov_path = dir.join("covariates_conn.csv");
    let attr_cov_path = dir.join("covariates_attr.csv");
    let connectivity_path = dir.join("connectivity.csv");

    let attr_table = attributes_path
        .exists()
        .then(|| load_subject_table(&attributes_path))
        .transpose()?;
    let conn_cov_table = conn_cov_path
        .exists()
        .then(|| load_subject_table(&conn_cov_path))
        .transpose()?;
    let attr_cov_table = attr_cov_path
        .exists()
        .then(|| load_subject_table(&attr_cov_path))
        .transpose()?;
    let conn_rows = connectivity_path
        .exists()
        .then(|| load_connectivity_rows(&connectivity_path))
        .transpose()?;

    let subject_ids: Vec<String> = if let Some((_, rows)) = &attr_table {
        rows.iter().map(|(id, _)| id.clone()).collect()
    } else if let Some((_, rows)) = &conn_cov_table {
        rows.iter().map(|(id, _)| id.clone()).collect()
    } else if let Some((_, rows)) = &attr_cov_table {
        rows.iter().map(|(id, _)| id.clone()).collect()
    } else if let Some((edges, _)) = &conn_rows {
        let mut ids: Vec<String> = edges.keys().cloned().collect();
        ids.sort();
        ids
    } else {
        return Err(CliError::validation(format!(
            "{}: no subject files found (expected at least one of attributes.csv, \
             covariates_conn.csv, covariates_attr.csv, connectivity.csv)",
            dir.display()
        )));
    };

    let mut out = NewSubjects {
        subject_ids: subject_ids.clone(),
        connectivity: None,
        attributes: None,
        attribute_labels: Vec::new(),
        conn_covariates: None,
        attr_covariates: None,
    };
    if let Some((labels, rows)) = attr_table {
        let aligned = align_subjects(rows, &subject_ids, &attributes_path, "the directory")?;
        out.attributes = Some(matrix_from_rows(&aligned, labels.len()));
        out.attribute_labels = labels;
    }
    if let Some((labels, rows)) = conn_cov_table {
        let aligned = align_subjects(rows, &subject_ids, &conn_cov_path, "the directory")?;
        out.conn_covariates = Some(matrix_from_rows(&aligned, labels.len()));
    }
    if let Some((labels, rows)) = attr_cov_table {
        let aligned = align_subjects(rows, &subject_ids, &attr_cov_path, "the directory")?;
        out.attr_covariates = Some(matrix_from_rows(&aligned, labels.len()));
    }
    if let Some((edges, max_node)) = conn_rows {
        if max_node > n_nodes {
            return Err(CliError::validation(format!(
                "{}: node index {max_node} exceeds the training network's {n_nodes} nodes",
                connectivity_path.display()
            )));
        }
        out.connectivity =
            Some(assemble_networks(&edges, &subject_ids, n_nodes, &connectivity_path)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Chain directories
// ---------------------------------------------------------------------------

/// Chain directory metadata: dimensions, sampler settings, event counters,
/// and the post-burn-in sign reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMeta {
    pub format_version: u32,
    pub n_subjects: usize,
    pub n_nodes: usize,
    pub retained: usize,
    pub config: SamplerConfig,
    pub counters: StepCounters,
    pub reference_signs: Vec<Vec<f64>>,
}

/// Persists a chain as a directory and returns the written paths.
pub fn save_chain(dir: &Path, chain: &PosteriorChain) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let n = chain.reference_signs.nrows();
    let v = chain.reference_signs.ncols();
    let mut written = Vec::new();

    let meta = ChainMeta {
        format_version: CHAIN_FORMAT_VERSION,
        n_subjects: n,
        n_nodes: v,
        retained: chain.len(),
        config: chain.config.clone(),
        counters: chain.counters.clone(),
        reference_signs: (0..n)
            .map(|i| (0..v).map(|u| chain.reference_signs[(i, u)]).collect())
            .collect(),
    };
    let meta_path = dir.join("meta.json");
    write_json(&meta_path, &meta)?;
    written.push(meta_path);

    let lambda_path = dir.join("lambda_z_theta.csv");
    let header: Vec<String> = (1..=v).map(|u| format!("r{u}")).collect();
    write_csv(
        &lambda_path,
        &header,
        chain
            .lambda_z_theta
            .iter()
            .map(|draw| draw.iter().map(|&x| fmt_float(x)).collect()),
    )?;
    written.push(lambda_path);

    let scalars_path = dir.join("scalars.csv");
    let header: Vec<String> = ["lambda_theta", "sigma2", "tau2"].map(str::to_string).to_vec();
    write_csv(
        &scalars_path,
        &header,
        (0..chain.len()).map(|k| {
            vec![
                fmt_float(chain.lambda_theta[k]),
                fmt_float(chain.sigma2[k]),
                fmt_float(chain.tau2[k]),
            ]
        }),
    )?;
    written.push(scalars_path);

    if let Some(z_draws) = &chain.z {
        let z_path = dir.join("z.csv");
        let header: Vec<String> = (1..=n)
            .flat_map(|i| (1..=v).map(move |u| format!("s{i}_r{u}")))
            .collect();
        write_csv(
            &z_path,
            &header,
            z_draws.iter().map(|z| {
                (0..n)
                    .flat_map(|i| (0..v).map(move |u| fmt_float(z[(i, u)])))
                    .collect()
            }),
        )?;
        written.push(z_path);
    }
    if let Some(theta_draws) = &chain.theta {
        let theta_path = dir.join("theta.csv");
        let header: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
        write_csv(
            &theta_path,
            &header,
            theta_draws
                .iter()
                .map(|t| t.iter().map(|&x| fmt_float(x)).collect()),
        )?;
        written.push(theta_path);
    }
    Ok(written)
}

/// Reads one chain CSV back into per-draw rows, checking both the column
/// count and the retained-draw count from the metadata.
fn load_chain_csv(path: &Path, ncols: usize, retained: usize) -> CliResult<Vec<Vec<f64>>> {
    let (header, records) = read_csv(path)?;
    if header.len() != ncols {
        return Err(CliError::validation(format!(
            "{}: has {} columns, expected {ncols}",
            path.display(),
            header.len()
        )));
    }
    if records.len() != retained {
        return Err(CliError::validation(format!(
            "{}: truncated chain file: expected {retained} draws, found {}",
            path.display(),
            records.len()
        )));
    }
    let mut rows = Vec::with_capacity(records.len());
    for (k, record) in records.iter().enumerate() {
        if record.len() != ncols {
            return Err(CliError::validation(format!(
                "{}: row {} has {} fields, expected {ncols}",
                path.display(),
                k + 2,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(ncols);
        for (j, field) in record.iter().enumerate() {
            row.push(parse_float(
                field,
                &format!("{}: row {}, column {}", path.display(), k + 2, j + 1),
            )?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a chain directory back into memory, bit-exactly.
pub fn load_chain(dir: &Path) -> CliResult<PosteriorChain> {
    let meta_path = dir.join("meta.json");
    let meta: ChainMeta = serde_json::from_str(&read_input(&meta_path)?)
        .map_err(|e| CliError::validation(format!("{}: {e}", meta_path.display())))?;
    if meta.format_version != CHAIN_FORMAT_VERSION {
        return Err(CliError::validation(format!(
            "{}: chain format version {} is not supported (this build reads {})",
            meta_path.display(),
            meta.format_version,
            CHAIN_FORMAT_VERSION
        )));
    }
    let (n, v) = (meta.n_subjects, meta.n_nodes);
    if meta.reference_signs.len() != n
        || meta.reference_signs.iter().any(|row| row.len() != v)
    {
        return Err(CliError::validation(format!(
            "{}: reference_signs must be {n}x{v}",
            meta_path.display()
        )));
    }

    let lambda_rows = load_chain_csv(&dir.join("lambda_z_theta.csv"), v, meta.retained)?;
    let scalar_rows = load_chain_csv(&dir.join("scalars.csv"), 3, meta.retained)?;

    let (z, theta) = if meta.config.retain_latents {
        let z_rows = load_chain_csv(&dir.join("z.csv"), n * v, meta.retained)?;
        let theta_rows = load_chain_csv(&dir.join("theta.csv"), n, meta.retained)?;
        let z = z_rows
            .into_iter()
            .map(|row| DMatrix::from_fn(n, v, |i, u| row[i * v + u]))
            .collect();
        let theta = theta_rows.into_iter().map(DVector::from_vec).collect();
        (Some(z), Some(theta))
    } else {
        (None, None)
    };

    Ok(PosteriorChain {
        lambda_z_theta: lambda_rows.into_iter().map(DVector::from_vec).collect(),
        lambda_theta: scalar_rows.iter().map(|r| r[0]).collect(),
        sigma2: scalar_rows.iter().map(|r| r[1]).collect(),
        tau2: scalar_rows.iter().map(|r| r[2]).collect(),
        z,
        theta,
        reference_signs: DMatrix::from_fn(n, v, |i, u| meta.reference_signs[i][u]),
        config: meta.config,
        counters: meta.counters,
    })
}
