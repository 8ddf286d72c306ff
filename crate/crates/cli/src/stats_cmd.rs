//! Ad-hoc statistical tests on small CSV tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};
use trialeq_core::stats::{
    chi_square, cramers_v_corrected, kruskal_wallis, mean_difference, permutation_test, spearman, ContingencyTable,
};

use crate::error::{CliError, CliResult};

fn read_rows(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let delim = trialeq_core::panel::detect_delimiter(text.lines().next().unwrap_or(""));
    let mut r = csv::ReaderBuilder::new().delimiter(delim).comment(Some(b'#')).from_reader(text.as_bytes());
    let ctx = |e: csv::Error| CliError::data(format!("{}: {e}", path.display()));
    let header = r.headers().map_err(ctx)?.iter().map(|h| h.trim().to_string()).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(|f| f.trim().to_string()).collect()))
        .collect::<Result<_, _>>()
        .map_err(ctx)?;
    Ok((header, rows))
}

fn number(s: &str, path: &Path) -> CliResult<f64> {
    s.parse().map_err(|_| CliError::data(format!("{}: non-numeric value `{s}`", path.display())))
}

/// Contingency table: first column holds row labels, the header holds column labels.
pub fn read_contingency(path: &Path) -> CliResult<ContingencyTable> {
    let (header, rows) = read_rows(path)?;
    if header.len() < 3 {
        return Err(CliError::data(format!("{}: need a label column and at least two count columns", path.display())));
    }
    let mut counts = Vec::new();
    let mut labels = Vec::new();
    for r in rows {
        labels.push(r[0].clone());
        counts.push(r[1..].iter().map(|s| number(s, path)).collect::<CliResult<Vec<f64>>>()?);
    }
    Ok(ContingencyTable::new(counts, labels, header[1..].to_vec())?)
}

/// `(group, value)` rows, grouped in first-appearance order.
pub fn read_groups(path: &Path) -> CliResult<Vec<(String, Vec<f64>)>> {
    let (_, rows) = read_rows(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.len() < 2 {
            return Err(CliError::data(format!("{}: rows need a group and a value", path.display())));
        }
        if !groups.contains_key(&r[0]) {
            order.push(r[0].clone());
        }
        groups.entry(r[0].clone()).or_default().push(number(&r[1], path)?);
    }
    Ok(order.into_iter().map(|g| {
        let v = groups.remove(&g).unwrap_or_default();
        (g, v)
    }).collect())
}

pub fn chi_square_cmd(path: &Path) -> CliResult<Value> {
    let t = read_contingency(path)?;
    let c = chi_square(&t)?;
    Ok(json!({ "test": "chi_square", "rows": t.rows(), "cols": t.cols(), "n": t.total(), "result": c }))
}

pub fn cramers_v_cmd(path: &Path, pool_below: Option<f64>) -> CliResult<Value> {
    let mut t = read_contingency(path)?;
    if let Some(min) = pool_below {
        t = t.pool_columns_below(min)?;
    }
    let v = cramers_v_corrected(&t)?;
    Ok(json!({ "test": "cramers_v_corrected", "rows": t.rows(), "cols": t.cols(), "pooled_below": pool_below, "result": v }))
}

pub fn kruskal_cmd(path: &Path) -> CliResult<Value> {
    let g = read_groups(path)?;
    let names: Vec<&str> = g.iter().map(|(n, _)| n.as_str()).collect();
    let values: Vec<Vec<f64>> = g.iter().map(|(_, v)| v.clone()).collect();
    let k = kruskal_wallis(&values)?;
    Ok(json!({ "test": "kruskal_wallis", "groups": names, "result": k }))
}

pub fn spearman_cmd(path: &Path) -> CliResult<Value> {
    let (header, rows) = read_rows(path)?;
    if header.len() < 2 {
        return Err(CliError::data(format!("{}: need two numeric columns", path.display())));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in &rows {
        x.push(number(&r[0], path)?);
        y.push(number(&r[1], path)?);
    }
    let c = spearman(&x, &y)?;
    Ok(json!({ "test": "spearman", "x": header[0], "y": header[1], "result": c }))
}

pub fn permutation_cmd(path: &Path, n_perm: usize, seed: u64) -> CliResult<Value> {
    let g = read_groups(path)?;
    if g.len() != 2 {
        return Err(CliError::data(format!("{}: permutation test needs exactly two groups, found {}", path.display(), g.len())));
    }
    let p = permutation_test(&g[0].1, &g[1].1, mean_difference, n_perm, seed)?;
    Ok(json!({ "test": "permutation", "statistic": "mean_difference", "groups": [g[0].0, g[1].0], "seed": seed, "result": p }))
}
