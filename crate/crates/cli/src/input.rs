use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use extcontrol::meta::{LogHREstimate, PosteriorDraws, ReferenceSet};

const HEADER: [&str; 3] = ["study", "loghr", "se"];

fn numeric(field: &str, line: u64, column: usize) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| anyhow!("line {line}, column {column} ({}): '{field}' is not a number", HEADER[column - 1]))?;
    if !value.is_finite() {
        bail!("line {line}, column {column} ({}): '{field}' is not finite", HEADER[column - 1]);
    }
    Ok(value)
}

/// Parse `study,loghr,se` rows. Errors name the offending line and column.
pub fn parse_reference_csv<R: Read>(reader: R) -> Result<ReferenceSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = records.next().ok_or_else(|| anyhow!("line 1: empty file, expected header study,loghr,se"))??;
    if header.iter().collect::<Vec<_>>() != HEADER {
        bail!("line 1: expected header 'study,loghr,se', found '{}'", header.iter().collect::<Vec<_>>().join(","));
    }

    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut studies = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            bail!("line {line}: expected 3 fields, found {}", record.len());
        }
        let label = &record[0];
        if label.is_empty() {
            bail!("line {line}, column 1 (study): empty study label");
        }
        if let Some(first) = seen.get(label) {
            bail!("line {line}, column 1 (study): duplicate label '{label}' (first on line {first})");
        }
        let loghr = numeric(&record[1], line, 2)?;
        let se = numeric(&record[2], line, 3)?;
        if se <= 0.0 {
            bail!("line {line}, column 3 (se): standard error must be positive, got {se}");
        }
        seen.insert(label.to_string(), line);
        studies.push(LogHREstimate::new(label, loghr, se)?);
    }
    if studies.is_empty() {
        bail!("no study rows after the header");
    }
    Ok(ReferenceSet::new(studies)?)
}

/// Read a reference CSV and drop any excluded labels.
pub fn read_references(path: &Path, exclude: &[String]) -> Result<ReferenceSet> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let set = parse_reference_csv(file).with_context(|| format!("in {}", path.display()))?;
    if exclude.is_empty() {
        return Ok(set);
    }
    if let Some(missing) = exclude.iter().find(|l| set.get(l).is_none()) {
        bail!("{}: --exclude label '{missing}' is not a study in this file", path.display());
    }
    set.excluding(exclude).with_context(|| format!("excluding studies from {}", path.display()))
}

/// Read posterior draws (`chain,draw,mu,sigma`) as written by `meta`.
/// Rows must be grouped by chain with equal chain lengths.
pub fn read_meta_draws(path: &Path) -> Result<PosteriorDraws> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column '{name}'", path.display()))
    };
    let (ci, mi, si) = (col("chain")?, col("mu")?, col("sigma")?);

    let mut chains: Vec<u64> = Vec::new();
    let (mut mu, mut sigma) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| anyhow!("{} line {line}: '{}' is not a number", path.display(), &record[i]))
        };
        let chain: u64 = record[ci]
            .parse()
            .map_err(|_| anyhow!("{} line {line}: bad chain index '{}'", path.display(), &record[ci]))?;
        match chains.last() {
            Some(&c) if c == chain => {}
            _ if chains.contains(&chain) => bail!("{} line {line}: chain {chain} is not contiguous", path.display()),
            _ => chains.push(chain),
        }
        mu.push(field(mi)?);
        sigma.push(field(si)?);
    }
    PosteriorDraws::from_draws(mu, sigma, chains.len()).with_context(|| format!("in {}", path.display()))
}
