//! CSV schemas of every table the pipeline reads or writes.
//!
//! Readers take any `Read` plus a source name used in diagnostics and
//! report the offending line on malformed input. Writers render floats
//! through [`crate::format`], so re-running a stage on the same data gives
//! byte-identical files. Missing values are written as empty fields.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use csv::StringRecord;
use serde::{Deserialize, Serialize};

use crate::calibrate::{PositionTable, SurveyRow};
use crate::error::{Error, Result};
use crate::format::{f3, f5, parse_float_cell};
use crate::media::{normalize_domain, DimensionProfile, DomainProfile, MediaReport, ShareRecord};
use crate::model::{ingest_edges, ActivityRecord, BipartiteNetwork, PseudoIdMap};
use crate::validate::{Annotator, BinRow, CrossWaveRow, LabelTable, PlanRow, SeparationRow};

/// Opens a file for buffered reading.
pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_error(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Header positions of the required columns.
fn columns(headers: &StringRecord, required: &[&str], source: &str) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn(format!("{name} in {source}")))
        })
        .collect()
}

/// Iterates data records, attaching the source name and line to CSV errors.
fn records<'a, R: Read + 'a>(
    rdr: &'a mut csv::Reader<R>,
    source: &'a str,
) -> impl Iterator<Item = Result<StringRecord>> + 'a {
    rdr.records().map(move |r| {
        r.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(source, line, e.to_string())
        })
    })
}

fn nonempty<'r>(rec: &'r StringRecord, col: usize, name: &str, source: &str) -> Result<&'r str> {
    match rec.get(col) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(parse_error(source, line_of(rec), format!("empty {name}"))),
    }
}

fn parse_cell<T: std::str::FromStr>(rec: &StringRecord, col: usize, name: &str, source: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let v = nonempty(rec, col, name, source)?;
    v.parse()
        .map_err(|e| parse_error(source, line_of(rec), format!("{name} {v:?}: {e}")))
}

/// Counts like `1234` or `1234.000`.
fn parse_count(rec: &StringRecord, col: usize, name: &str, source: &str) -> Result<u64> {
    let v = nonempty(rec, col, name, source)?;
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) => Ok(x as u64),
        _ => Err(parse_error(source, line_of(rec), format!("{name} {v:?} is not a count"))),
    }
}

/// Reads `follower_id,elite_id` edges into an unfiltered network.
pub fn read_edges<R: Read>(r: R, source: &str) -> Result<BipartiteNetwork> {
    let mut rdr = reader(r);
    let cols = columns(rdr.headers()?, &["follower_id", "elite_id"], source)?;
    let pairs = records(&mut rdr, source).map(|rec| {
        let rec = rec?;
        let f = nonempty(&rec, cols[0], "follower_id", source)?.to_string();
        let e = nonempty(&rec, cols[1], "elite_id", source)?.to_string();
        Ok((f, e))
    });
    ingest_edges(pairs)
}

pub fn write_edges<W: Write>(w: W, net: &BipartiteNetwork) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["follower_id", "elite_id"])?;
    for &(i, j) in net.edges() {
        wtr.write_record([&net.follower_ids()[i as usize], &net.elite_ids()[j as usize]])?;
    }
    wtr.flush().map_err(|e| Error::io("<edges>", e))
}

/// Name and party of one elite account.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliteMeta {
    pub id: String,
    pub name: String,
    pub party: String,
}

/// Reads `id,name,party`; ids must be unique.
pub fn read_elites<R: Read>(r: R, source: &str) -> Result<Vec<EliteMeta>> {
    let mut rdr = reader(r);
    let cols = columns(rdr.headers()?, &["id", "name", "party"], source)?;
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for rec in records(&mut rdr, source) {
        let rec = rec?;
        let meta = EliteMeta {
            id: nonempty(&rec, cols[0], "id", source)?.to_string(),
            name: nonempty(&rec, cols[1], "name", source)?.to_string(),
            party: nonempty(&rec, cols[2], "party", source)?.to_string(),
        };
        if let Some(prev) = seen.insert(meta.id.clone(), line_of(&rec)) {
            return Err(parse_error(
                source,
                line_of(&rec),
                format!("duplicate elite id {} (first on line {prev})", meta.id),
            ));
        }
        out.push(meta);
    }
    Ok(out)
}

pub fn write_elites<W: Write>(w: W, elites: &[EliteMeta]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["id", "name", "party"])?;
    for e in elites {
        wtr.write_record([&e.id, &e.name, &e.party])?;
    }
    wtr.flush().map_err(|e| Error::io("<elites>", e))
}

/// Raw activity counters of one account.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityInput {
    pub id: String,
    pub total_posts: u64,
    pub created_at: String,
    pub collected_at: String,
    pub followers: u64,
    pub followees: u64,
}

/// Reads `id,total_posts,created_at,collected_at,followers,followees`.
pub fn read_activity_inputs<R: Read>(r: R, source: &str) -> Result<Vec<ActivityInput>> {
    let mut rdr = reader(r);
    let names = ["id", "total_posts", "created_at", "collected_at", "followers", "followees"];
    let cols = columns(rdr.headers()?, &names, source)?;
    records(&mut rdr, source)
        .map(|rec| {
            let rec = rec?;
            Ok(ActivityInput {
                id: nonempty(&rec, cols[0], "id", source)?.to_string(),
                total_posts: parse_count(&rec, cols[1], "total_posts", source)?,
                created_at: nonempty(&rec, cols[2], "created_at", source)?.to_string(),
                collected_at: nonempty(&rec, cols[3], "collected_at", source)?.to_string(),
                followers: parse_count(&rec, cols[4], "followers", source)?,
                followees: parse_count(&rec, cols[5], "followees", source)?,
            })
        })
        .collect()
}

pub fn write_activity_inputs<W: Write>(w: W, rows: &[ActivityInput]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["id", "total_posts", "created_at", "collected_at", "followers", "followees"])?;
    for r in rows {
        wtr.write_record([
            r.id.clone(),
            r.total_posts.to_string(),
            r.created_at.clone(),
            r.collected_at.clone(),
            r.followers.to_string(),
            r.followees.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<activity>", e))
}

/// Writes `mps_activity.csv`; `meta` supplies name and party by pseudo id.
pub fn write_mps_activity<W: Write>(
    w: W,
    rows: &[ActivityRecord],
    meta: &HashMap<String, (String, String)>,
) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["pseudo_id", "name", "party", "mean_tweets_per_day", "followers", "followees"])?;
    for r in rows {
        let (name, party) = meta
            .get(&r.pseudo_id)
            .ok_or_else(|| Error::UnknownEntity(format!("{} has no name/party", r.pseudo_id)))?;
        wtr.write_record([
            r.pseudo_id.clone(),
            name.clone(),
            party.clone(),
            f5(r.mean_tweets_per_day),
            f3(r.followers as f64),
            f3(r.followees as f64),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("mps_activity.csv", e))
}

/// Writes `followers_activity.csv`.
pub fn write_followers_activity<W: Write>(w: W, rows: &[ActivityRecord]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["pseudo_id", "mean_tweets_per_day", "followers", "followees"])?;
    for r in rows {
        wtr.write_record([
            r.pseudo_id.clone(),
            f5(r.mean_tweets_per_day),
            f3(r.followers as f64),
            f3(r.followees as f64),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("followers_activity.csv", e))
}

/// Reads either activity table back (name and party columns are ignored).
pub fn read_activity<R: Read>(r: R, source: &str) -> Result<Vec<ActivityRecord>> {
    let mut rdr = reader(r);
    let names = ["pseudo_id", "mean_tweets_per_day", "followers", "followees"];
    let cols = columns(rdr.headers()?, &names, source)?;
    records(&mut rdr, source)
        .map(|rec| {
            let rec = rec?;
            Ok(ActivityRecord {
                pseudo_id: nonempty(&rec, cols[0], "pseudo_id", source)?.to_string(),
                mean_tweets_per_day: parse_cell(&rec, cols[1], "mean_tweets_per_day", source)?,
                followers: parse_count(&rec, cols[2], "followers", source)?,
                followees: parse_count(&rec, cols[3], "followees", source)?,
            })
        })
        .collect()
}

/// Reads `party,dimension,wave,score,native_scale_max`.
pub fn read_survey<R: Read>(r: R, source: &str) -> Result<Vec<SurveyRow>> {
    let mut rdr = reader(r);
    let names = ["party", "dimension", "wave", "score", "native_scale_max"];
    let cols = columns(rdr.headers()?, &names, source)?;
    records(&mut rdr, source)
        .map(|rec| {
            let rec = rec?;
            Ok(SurveyRow {
                party: nonempty(&rec, cols[0], "party", source)?.to_string(),
                dimension: nonempty(&rec, cols[1], "dimension", source)?.to_string(),
                wave: nonempty(&rec, cols[2], "wave", source)?.to_string(),
                score: parse_cell(&rec, cols[3], "score", source)?,
                native_scale_max: parse_cell(&rec, cols[4], "native_scale_max", source)?,
            })
        })
        .collect()
}

pub fn write_survey<W: Write>(w: W, rows: &[SurveyRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["party", "dimension", "wave", "score", "native_scale_max"])?;
    for r in rows {
        wtr.write_record([
            r.party.clone(),
            r.dimension.clone(),
            r.wave.clone(),
            f3(r.score),
            r.native_scale_max.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<survey>", e))
}

/// Writes a position table. With `meta`, the file gets the `name` and
/// `party` columns of the elite table.
pub fn write_positions<W: Write>(
    w: W,
    table: &PositionTable,
    meta: Option<&HashMap<String, (String, String)>>,
) -> Result<()> {
    let mut wtr = writer(w);
    let mut header = vec!["pseudo_id".to_string()];
    if meta.is_some() {
        header.push("name".into());
        header.push("party".into());
    }
    header.extend(table.columns().iter().cloned());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, id) in table.ids().iter().enumerate() {
        row.clear();
        row.push(id.clone());
        if let Some(meta) = meta {
            let (name, party) = meta
                .get(id)
                .ok_or_else(|| Error::UnknownEntity(format!("{id} has no name/party")))?;
            row.push(name.clone());
            row.push(party.clone());
        }
        row.extend(table.row(i).iter().map(|&v| f3(v)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<positions>", e))
}

/// Reads a position table; every column other than `pseudo_id`, `name` and
/// `party` is a dimension. Returns name and party when present.
pub fn read_positions<R: Read>(
    r: R,
    source: &str,
) -> Result<(PositionTable, Option<HashMap<String, (String, String)>>)> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let id_col = columns(&headers, &["pseudo_id"], source)?[0];
    let name_col = headers.iter().position(|h| h == "name");
    let party_col = headers.iter().position(|h| h == "party");
    let dims: Vec<usize> = (0..headers.len())
        .filter(|&c| c != id_col && Some(c) != name_col && Some(c) != party_col)
        .collect();
    let mut table = PositionTable::new(dims.iter().map(|&c| headers[c].to_string()).collect());
    let mut meta = (name_col.is_some() && party_col.is_some()).then(HashMap::new);
    let mut row = vec![0.0; dims.len()];
    for rec in records(&mut rdr, source) {
        let rec = rec?;
        let id = nonempty(&rec, id_col, "pseudo_id", source)?.to_string();
        for (slot, &c) in row.iter_mut().zip(&dims) {
            let cell = rec.get(c).unwrap_or("");
            *slot = match parse_float_cell(cell) {
                Some(v) => v,
                None if cell.is_empty() || cell.eq_ignore_ascii_case("nan") => f64::NAN,
                None => {
                    return Err(parse_error(
                        source,
                        line_of(&rec),
                        format!("{}: not a number {cell:?}", &headers[c]),
                    ))
                }
            };
        }
        if let (Some(m), Some(nc), Some(pc)) = (meta.as_mut(), name_col, party_col) {
            m.insert(
                id.clone(),
                (rec.get(nc).unwrap_or("").to_string(), rec.get(pc).unwrap_or("").to_string()),
            );
        }
        table
            .push(id, &row)
            .map_err(|e| parse_error(source, line_of(&rec), e.to_string()))?;
    }
    Ok((table, meta))
}

/// Reads `pseudo_id,domain,tweet_count`, normalizing the domain.
pub fn read_shares<R: Read>(r: R, source: &str) -> Result<Vec<ShareRecord>> {
    let mut rdr = reader(r);
    let cols = columns(rdr.headers()?, &["pseudo_id", "domain", "tweet_count"], source)?;
    records(&mut rdr, source)
        .map(|rec| {
            let rec = rec?;
            let domain = normalize_domain(nonempty(&rec, cols[1], "domain", source)?)
                .map_err(|e| parse_error(source, line_of(&rec), e.to_string()))?;
            let tweet_count = parse_count(&rec, cols[2], "tweet_count", source)?;
            if tweet_count == 0 {
                return Err(parse_error(source, line_of(&rec), "tweet_count must be positive"));
            }
            Ok(ShareRecord {
                pseudo_id: nonempty(&rec, cols[0], "pseudo_id", source)?.to_string(),
                domain,
                tweet_count,
            })
        })
        .collect()
}

pub fn write_shares<W: Write>(w: W, rows: &[ShareRecord]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["pseudo_id", "domain", "tweet_count"])?;
    for r in rows {
        wtr.write_record([r.pseudo_id.clone(), r.domain.clone(), r.tweet_count.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<shares>", e))
}

/// Reads `domain,media_category`.
pub fn read_categories<R: Read>(r: R, source: &str) -> Result<HashMap<String, String>> {
    let mut rdr = reader(r);
    let cols = columns(rdr.headers()?, &["domain", "media_category"], source)?;
    let mut out = HashMap::new();
    for rec in records(&mut rdr, source) {
        let rec = rec?;
        let domain = normalize_domain(nonempty(&rec, cols[0], "domain", source)?)
            .map_err(|e| parse_error(source, line_of(&rec), e.to_string()))?;
        let cat = rec.get(cols[1]).unwrap_or("");
        if !cat.is_empty() {
            out.insert(domain, cat.to_string());
        }
    }
    Ok(out)
}

const DOMAIN_STATS: [&str; 5] = ["mean", "std", "quantile", "dip", "pval"];

/// Header of the domains table: four descriptive columns, then each
/// statistic for every dimension, grouped by statistic.
pub fn domain_header(columns: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["domain", "media_category", "user_count", "tweet_count"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for stat in DOMAIN_STATS {
        h.extend(columns.iter().map(|c| format!("{c}_{stat}")));
    }
    h
}

/// Writes `domains_positions.csv`.
pub fn write_domains<W: Write>(w: W, report: &MediaReport) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(domain_header(&report.columns))?;
    for p in &report.profiles {
        let mut row = vec![
            p.domain.clone(),
            p.media_category.clone().unwrap_or_default(),
            p.user_count.to_string(),
            p.tweet_count.to_string(),
        ];
        row.extend(p.dimensions.iter().map(|d| f3(d.mean)));
        row.extend(p.dimensions.iter().map(|d| f3(d.std)));
        row.extend(p.dimensions.iter().map(|d| d.quantile.to_string()));
        row.extend(p.dimensions.iter().map(|d| f3(d.dip)));
        row.extend(p.dimensions.iter().map(|d| f3(d.p_value)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("domains_positions.csv", e))
}

/// Reads the domains table back into profiles and their dimension columns.
pub fn read_domains<R: Read>(r: R, source: &str) -> Result<(Vec<String>, Vec<DomainProfile>)> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let fixed = columns(&headers, &["domain", "media_category", "user_count", "tweet_count"], source)?;
    let dims: Vec<String> = headers
        .iter()
        .filter_map(|h| h.strip_suffix("_mean").map(str::to_string))
        .collect();
    let stat_cols: Vec<Vec<usize>> = DOMAIN_STATS
        .iter()
        .map(|stat| {
            let names: Vec<String> = dims.iter().map(|d| format!("{d}_{stat}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            columns(&headers, &refs, source)
        })
        .collect::<Result<_>>()?;
    let float = |rec: &StringRecord, c: usize| -> Result<f64> {
        let cell = rec.get(c).unwrap_or("");
        if cell.is_empty() {
            return Ok(f64::NAN);
        }
        parse_float_cell(cell)
            .ok_or_else(|| parse_error(source, line_of(rec), format!("{}: not a number {cell:?}", &headers[c])))
    };
    let mut out = Vec::new();
    for rec in records(&mut rdr, source) {
        let rec = rec?;
        let dimensions = (0..dims.len())
            .map(|k| {
                Ok(DimensionProfile {
                    mean: float(&rec, stat_cols[0][k])?,
                    std: float(&rec, stat_cols[1][k])?,
                    quantile: parse_cell(&rec, stat_cols[2][k], "quantile", source)?,
                    dip: float(&rec, stat_cols[3][k])?,
                    p_value: float(&rec, stat_cols[4][k])?,
                })
            })
            .collect::<Result<_>>()?;
        let cat = rec.get(fixed[1]).unwrap_or("");
        out.push(DomainProfile {
            domain: nonempty(&rec, fixed[0], "domain", source)?.to_string(),
            media_category: (!cat.is_empty()).then(|| cat.to_string()),
            user_count: parse_cell(&rec, fixed[2], "user_count", source)?,
            tweet_count: parse_count(&rec, fixed[3], "tweet_count", source)?,
            dimensions,
        });
    }
    Ok((dims, out))
}

fn label_cell(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "1.0",
        Some(false) => "0.0",
        None => "",
    }
}

/// Reads an annotation table: `pseudo_id` then one column per label with
/// `1.0`, `0.0` or an empty / `nan` cell.
pub fn read_labels<R: Read>(r: R, source: &str, annotator: Annotator) -> Result<LabelTable> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let id_col = columns(&headers, &["pseudo_id"], source)?[0];
    let label_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != id_col).collect();
    let mut table = LabelTable::new(annotator, label_cols.iter().map(|&c| headers[c].to_string()).collect());
    let mut row = vec![None; label_cols.len()];
    for rec in records(&mut rdr, source) {
        let rec = rec?;
        let id = nonempty(&rec, id_col, "pseudo_id", source)?.to_string();
        for (slot, &c) in row.iter_mut().zip(&label_cols) {
            let cell = rec.get(c).unwrap_or("");
            *slot = match cell {
                "" => None,
                c if c.eq_ignore_ascii_case("nan") => None,
                "1" | "1.0" | "True" | "true" => Some(true),
                "0" | "0.0" | "False" | "false" => Some(false),
                other => {
                    return Err(parse_error(
                        source,
                        line_of(&rec),
                        format!("{}: not a label value {other:?}", &headers[c]),
                    ))
                }
            };
        }
        table
            .push(id, &row)
            .map_err(|e| parse_error(source, line_of(&rec), e.to_string()))?;
    }
    Ok(table)
}

pub fn write_labels<W: Write>(w: W, table: &LabelTable) -> Result<()> {
    let mut wtr = writer(w);
    let mut header = vec!["pseudo_id".to_string()];
    header.extend(table.labels().iter().cloned());
    wtr.write_record(&header)?;
    for (i, id) in table.ids().iter().enumerate() {
        let mut row = vec![id.as_str()];
        row.extend(table.row(i).iter().map(|&v| label_cell(v)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<labels>", e))
}

/// Reads a validation plan: `dimension,wave,annotator,label_a,label_b`.
pub fn read_plan<R: Read>(r: R, source: &str) -> Result<Vec<PlanRow>> {
    let mut rdr = reader(r);
    let names = ["dimension", "wave", "annotator", "label_a", "label_b"];
    let cols = columns(rdr.headers()?, &names, source)?;
    records(&mut rdr, source)
        .map(|rec| {
            let rec = rec?;
            let row = PlanRow {
                dimension: nonempty(&rec, cols[0], "dimension", source)?.to_string(),
                wave: nonempty(&rec, cols[1], "wave", source)?.to_string(),
                annotator: parse_cell(&rec, cols[2], "annotator", source)?,
                label_a: nonempty(&rec, cols[3], "label_a", source)?.to_string(),
                label_b: nonempty(&rec, cols[4], "label_b", source)?.to_string(),
            };
            if row.label_a == row.label_b {
                return Err(parse_error(source, line_of(&rec), "label_a equals label_b"));
            }
            Ok(row)
        })
        .collect()
}

pub fn write_plan<W: Write>(w: W, plan: &[PlanRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["dimension", "wave", "annotator", "label_a", "label_b"])?;
    for r in plan {
        wtr.write_record([
            r.dimension.clone(),
            r.wave.clone(),
            r.annotator.to_string(),
            r.label_a.clone(),
            r.label_b.clone(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<plan>", e))
}

/// Writes the separation report, one row per plan row in report order.
pub fn write_separation<W: Write>(w: W, rows: &[SeparationRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record([
        "dimension",
        "wave",
        "annotator",
        "label_a",
        "label_b",
        "n_a",
        "n_b",
        "roc_auc",
        "f1_avg",
        "f1_a",
        "precision_a",
        "recall_a",
        "f1_b",
        "precision_b",
        "recall_b",
        "weight",
        "intercept",
        "cutoff",
        "converged",
    ])?;
    for r in rows {
        let m = &r.metrics;
        wtr.write_record([
            r.plan.dimension.clone(),
            r.plan.wave.clone(),
            r.plan.annotator.to_string(),
            r.plan.label_a.clone(),
            r.plan.label_b.clone(),
            m.n_a.to_string(),
            m.n_b.to_string(),
            f3(m.roc_auc),
            f3(m.f1_avg),
            f3(m.f1_a_as_success),
            f3(m.precision),
            f3(m.recall),
            f3(m.f1_b_as_success),
            f3(m.precision_b),
            f3(m.recall_b),
            f3(r.fit.weight),
            f3(r.fit.intercept),
            f3(r.fit.cutoff),
            r.fit.converged.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<separation>", e))
}

/// Long-format bin table: one row per (column, label, bin).
pub fn write_bins<W: Write>(w: W, bins: &[(String, String, Annotator, Vec<BinRow>)]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record([
        "dimension", "label", "annotator", "bin_lo", "bin_hi", "n_total", "n_labeled", "fraction", "ci_lo",
        "ci_hi",
    ])?;
    let opt = |v: Option<f64>| v.map(f3).unwrap_or_default();
    for (column, label, annotator, rows) in bins {
        for b in rows {
            wtr.write_record([
                column.clone(),
                label.clone(),
                annotator.to_string(),
                f3(b.lo),
                f3(b.hi),
                b.n_total.to_string(),
                b.n_labeled.to_string(),
                opt(b.fraction),
                opt(b.ci_lo),
                opt(b.ci_hi),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<bins>", e))
}

pub fn write_cross_wave<W: Write>(w: W, rows: &[CrossWaveRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["dimension", "followers_r", "elites_r", "parties_r"])?;
    for r in rows {
        wtr.write_record([r.dimension.clone(), f3(r.followers), f3(r.elites), f3(r.parties)])?;
    }
    wtr.flush().map_err(|e| Error::io("<cross_wave>", e))
}

/// Private sidecar mapping raw ids to pseudo ids.
pub fn write_pseudo_ids<W: Write>(w: W, map: &PseudoIdMap) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["raw_id", "pseudo_id"])?;
    for (raw, pseudo) in map.pairs() {
        wtr.write_record([raw, pseudo])?;
    }
    wtr.flush().map_err(|e| Error::io("<pseudo_ids>", e))
}

pub fn read_pseudo_ids<R: Read>(r: R, source: &str) -> Result<PseudoIdMap> {
    let mut rdr = reader(r);
    let cols = columns(rdr.headers()?, &["raw_id", "pseudo_id"], source)?;
    let pairs = records(&mut rdr, source)
        .map(|rec| {
            let rec = rec?;
            Ok((
                nonempty(&rec, cols[0], "raw_id", source)?.to_string(),
                nonempty(&rec, cols[1], "pseudo_id", source)?.to_string(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    PseudoIdMap::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_with_line_numbers() {
        let data = "follower_id,elite_id\nu1,m1\nu1,m1\nu2,m2\n";
        let net = read_edges(data.as_bytes(), "edges.csv").unwrap();
        assert_eq!(net.edge_count(), 2);
        let bad = "follower_id,elite_id\nu1,m1\n,m2\n";
        match read_edges(bad.as_bytes(), "edges.csv") {
            Err(Error::Parse { path, line, .. }) => assert_eq!((path.as_str(), line), ("edges.csv", 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_edges("follower,elite\na,b\n".as_bytes(), "e"),
            Err(Error::MissingColumn(_))
        ));
        let empty = read_edges("follower_id,elite_id\n".as_bytes(), "e").unwrap();
        assert_eq!((empty.edge_count(), empty.n_followers(), empty.n_elites()), (0, 0, 0));
    }

    #[test]
    fn elites_reject_duplicates() {
        let ok = "id,name,party\nm1,Ann Ono,RE\nm2,Bo Bi,LR\n";
        assert_eq!(read_elites(ok.as_bytes(), "e").unwrap().len(), 2);
        let dup = "id,name,party\nm1,Ann,RE\nm1,Bo,LR\n";
        assert!(matches!(read_elites(dup.as_bytes(), "e"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn activity_tables_match_schema() {
        let rows = vec![ActivityRecord {
            pseudo_id: "ab".into(),
            mean_tweets_per_day: 3.65,
            followers: 1200,
            followees: 3,
        }];
        let mut meta = HashMap::new();
        meta.insert("ab".to_string(), ("Ann Ono".to_string(), "RE".to_string()));
        let mut buf = Vec::new();
        write_mps_activity(&mut buf, &rows, &meta).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "pseudo_id,name,party,mean_tweets_per_day,followers,followees\nab,Ann Ono,RE,3.65000,1200.000,3.000\n"
        );
        assert_eq!(read_activity(buf.as_slice(), "a").unwrap(), rows);
        let mut buf = Vec::new();
        write_followers_activity(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "pseudo_id,mean_tweets_per_day,followers,followees\nab,3.65000,1200.000,3.000\n"
        );
    }

    #[test]
    fn positions_round_trip() {
        let mut t = PositionTable::new(vec!["lrgen_19".into(), "galtan_23".into()]);
        t.push("a".into(), &[6.3084999, -0.0004]).unwrap();
        t.push("b".into(), &[f64::NAN, 10.5]).unwrap();
        let mut meta = HashMap::new();
        meta.insert("a".to_string(), ("X, Y".to_string(), "RN".to_string()));
        meta.insert("b".to_string(), ("Z".to_string(), "PS".to_string()));
        let mut buf = Vec::new();
        write_positions(&mut buf, &t, Some(&meta)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "pseudo_id,name,party,lrgen_19,galtan_23\na,\"X, Y\",RN,6.308,0.000\nb,Z,PS,,10.500\n"
        );
        let (back, m) = read_positions(buf.as_slice(), "p").unwrap();
        assert_eq!(m.unwrap(), meta);
        assert_eq!(back.columns(), t.columns());
        assert_eq!(back.value(0, 0), 6.308);
        assert!(back.value(1, 0).is_nan());
        // a second round trip is the identity
        let mut again = Vec::new();
        write_positions(&mut again, &back, Some(&meta)).unwrap();
        assert_eq!(again, buf);
        let bad = "pseudo_id,lrgen_19\na,abc\n";
        assert!(matches!(read_positions(bad.as_bytes(), "p"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn labels_round_trip_and_reject_junk() {
        let data = "pseudo_id,left,right\na,1.0,\nb,nan,0.0\nc,1,0\n";
        let t = read_labels(data.as_bytes(), "l", Annotator::Llm).unwrap();
        assert_eq!(t.row(0), [Some(true), None]);
        assert_eq!(t.row(1), [None, Some(false)]);
        let mut buf = Vec::new();
        write_labels(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "pseudo_id,left,right\na,1.0,\nb,,0.0\nc,1.0,0.0\n");
        assert!(read_labels("pseudo_id,left\na,2\n".as_bytes(), "l", Annotator::Llm).is_err());
        assert!(read_labels(data.as_bytes(), "l", Annotator::Human).is_err());
    }

    #[test]
    fn shares_and_categories() {
        let s = "pseudo_id,domain,tweet_count\na,https://LeMonde.fr/x,3\nb,lemonde.fr,1\n";
        let rows = read_shares(s.as_bytes(), "s").unwrap();
        assert_eq!(rows[0].domain, "lemonde.fr");
        assert!(read_shares("pseudo_id,domain,tweet_count\na,x.fr,0\n".as_bytes(), "s").is_err());
        let c = "domain,media_category\nlemonde.fr,Centre\nx.fr,\n";
        let cats = read_categories(c.as_bytes(), "c").unwrap();
        assert_eq!(cats.len(), 1);
    }

    #[test]
    fn domains_header_and_round_trip() {
        let cols: Vec<String> = crate::calibrate::default_manifest().iter().map(|d| d.column()).collect();
        let header = domain_header(&cols);
        assert_eq!(header.len(), 84);
        assert_eq!(header[4], "lrgen_19_mean");
        assert_eq!(header[20], "lrgen_19_std");
        assert_eq!(header[83], "galtan_19_pval");
        let prof = DimensionProfile {
            mean: 4.25,
            std: 1.5,
            quantile: 3,
            dip: 0.031,
            p_value: 0.5,
        };
        let report = MediaReport {
            columns: cols.clone(),
            profiles: vec![DomainProfile {
                domain: "lemonde.fr".into(),
                media_category: Some("Centre".into()),
                user_count: 120,
                tweet_count: 400,
                dimensions: vec![prof; 16],
            }],
            observed_domains: 1,
            dropped_records: 0,
            sharers: 120,
            total_tweets: 400,
        };
        let mut buf = Vec::new();
        write_domains(&mut buf, &report).unwrap();
        let (dims, back) = read_domains(buf.as_slice(), "d").unwrap();
        assert_eq!(dims, cols);
        assert_eq!(back, report.profiles);
    }

    #[test]
    fn plan_and_survey_round_trip() {
        let plan = crate::validate::default_plan();
        let mut buf = Vec::new();
        write_plan(&mut buf, &plan).unwrap();
        assert_eq!(read_plan(buf.as_slice(), "p").unwrap(), plan);
        let rows = vec![SurveyRow {
            party: "RE".into(),
            dimension: "lrgen".into(),
            wave: "2019".into(),
            score: 6.25,
            native_scale_max: 10,
        }];
        let mut buf = Vec::new();
        write_survey(&mut buf, &rows).unwrap();
        assert_eq!(read_survey(buf.as_slice(), "s").unwrap(), rows);
    }

    #[test]
    fn pseudo_id_sidecar_round_trip() {
        let map = PseudoIdMap::generate(["u1", "u2", "m1"], 4);
        let mut buf = Vec::new();
        write_pseudo_ids(&mut buf, &map).unwrap();
        let back = read_pseudo_ids(buf.as_slice(), "ids").unwrap();
        assert_eq!(back, map);
    }
}
