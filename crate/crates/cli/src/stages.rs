//! One function per pipeline stage. Each reads its inputs from the paths in
//! the config or from artifacts of earlier stages in the output directory.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polispace_core::ca::{read_embedding, write_embedding};
use polispace_core::calibrate::{apply_calibration, calibrate_all, column_summary};
use polispace_core::format::{f3, f5};
use polispace_core::io::{self, EliteMeta};
use polispace_core::media::{aggregate_shares, attach_categories, category_distributions, MediaConfig};
use polispace_core::model::{
    compute_activity, filter_network, parse_timestamp, FilterReport, PopularityCut, PseudoIdMap,
};
use polispace_core::validate::{
    bin_concentration, cross_wave_report, default_plan, sanitize_labels, separation_report,
    Annotator, LabelTable, OPPOSITE_PAIRS,
};
use polispace_core::{
    correspondence_analysis, ActivityRecord, AffineCalibration, BipartiteNetwork, PositionTable,
    SurveyReference,
};
use serde::Serialize;

use crate::artifacts::StageWriter;
use crate::config::{require, Config};

pub const NETWORK: &str = "network.csv";
pub const ELITES: &str = "elites.csv";
pub const PSEUDO_IDS: &str = "private/pseudo_ids.csv";
pub const FILTER_REPORT: &str = "filter_report.json";
pub const MPS_ACTIVITY: &str = "mps_activity.csv";
pub const FOLLOWERS_ACTIVITY: &str = "followers_activity.csv";
pub const EMBEDDING: &str = "embedding.bin";
pub const SINGULAR_VALUES: &str = "singular_values.csv";
pub const CALIBRATIONS: &str = "calibrations.json";
pub const FIDELITY: &str = "fidelity.csv";
pub const MPS_POSITIONS: &str = "mps_positions.csv";
pub const FOLLOWERS_POSITIONS: &str = "followers_positions.csv";
pub const DOMAINS: &str = "domains_positions.csv";
pub const MEDIA_CATEGORIES: &str = "media_categories.csv";
pub const TABLE1: &str = "table1_summary.csv";
pub const SEPARATION: &str = "separation.csv";
pub const BINS: &str = "bins.csv";
pub const CROSS_WAVE: &str = "cross_wave.csv";
pub const LABEL_DISCARDS: &str = "label_discards.csv";
pub const RECOVERY: &str = "recovery.csv";
pub const REPORT: &str = "report.md";

pub struct Ctx {
    pub cfg: Config,
    pub out: PathBuf,
}

impl Ctx {
    fn stage(&self, name: &'static str) -> StageWriter {
        StageWriter::new(&self.out, name, self.cfg.digest(), self.cfg.seed)
    }

    fn artifact(&self, rel: &str) -> Result<PathBuf> {
        let p = self.out.join(rel);
        if !p.exists() {
            bail!("{} is missing; run the stage that produces it first", p.display());
        }
        Ok(p)
    }
}

fn source(p: &Path) -> String {
    p.display().to_string()
}

fn read_elite_meta(st: &mut StageWriter, path: &Path) -> Result<Vec<EliteMeta>> {
    Ok(io::read_elites(&st.read(path)?[..], &source(path))?)
}

fn meta_map(meta: &[EliteMeta]) -> HashMap<String, (String, String)> {
    meta.iter()
        .map(|e| (e.id.clone(), (e.name.clone(), e.party.clone())))
        .collect()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

#[derive(Serialize)]
struct IngestReport {
    #[serde(flatten)]
    filter: FilterReport,
    /// Edges pointing at accounts missing from the elite table.
    dropped_unknown_elite_edges: usize,
    pseudonymized: bool,
}

/// Keeps only edges whose elite has metadata.
fn restrict_to_known_elites(
    net: &BipartiteNetwork,
    known: &HashMap<&str, &EliteMeta>,
) -> Result<(BipartiteNetwork, usize)> {
    let mut remap = vec![None; net.n_elites()];
    let mut elite_ids = Vec::new();
    for (j, id) in net.elite_ids().iter().enumerate() {
        if known.contains_key(id.as_str()) {
            remap[j] = Some(elite_ids.len() as u32);
            elite_ids.push(id.clone());
        }
    }
    let mut dropped = 0;
    let edges: Vec<(u32, u32)> = net
        .edges()
        .iter()
        .filter_map(|&(i, j)| {
            let e = remap[j as usize];
            if e.is_none() {
                dropped += 1;
            }
            e.map(|e| (i, e))
        })
        .collect();
    Ok((
        BipartiteNetwork::from_parts(net.follower_ids().to_vec(), elite_ids, edges)?,
        dropped,
    ))
}

fn activity_record(a: &io::ActivityInput, id: &str) -> Result<ActivityRecord> {
    Ok(compute_activity(
        id,
        a.total_posts,
        parse_timestamp(&a.created_at)?,
        parse_timestamp(&a.collected_at)?,
        a.followers,
        a.followees,
    )?)
}

pub fn ingest(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut st = ctx.stage("ingest");
    let edges_path = require(&cfg.paths.edges, "edges")?;
    let elites_path = require(&cfg.paths.elites, "elites")?;
    let raw = io::read_edges(&st.read(edges_path)?[..], &source(edges_path))?;
    let meta = read_elite_meta(&mut st, elites_path)?;
    let known: HashMap<&str, &EliteMeta> = meta.iter().map(|e| (e.id.as_str(), e)).collect();
    let (net, unknown_edges) = restrict_to_known_elites(&raw, &known)?;
    if unknown_edges > 0 {
        log::warn!("ingest: dropped {unknown_edges} edges to accounts missing from the elite table");
    }

    let activity: Option<HashMap<String, io::ActivityInput>> = match &cfg.paths.activity {
        Some(_) => {
            let p = require(&cfg.paths.activity, "activity")?;
            let rows = io::read_activity_inputs(&st.read(p)?[..], &source(p))?;
            Some(rows.into_iter().map(|r| (r.id.clone(), r)).collect())
        }
        None => None,
    };
    let counts: HashMap<String, u64> = activity
        .iter()
        .flatten()
        .map(|(id, a)| (id.clone(), a.followers))
        .collect();
    let popularity = match cfg.model.min_account_followers {
        Some(min) if activity.is_some() => Some(PopularityCut {
            min_account_followers: min,
            account_followers: &counts,
        }),
        Some(_) => bail!("a minimum follower count needs paths.activity"),
        None => None,
    };
    let (filtered, report) = filter_network(&net, cfg.model.min_elites_followed, popularity)?;
    if filtered.n_followers() == 0 {
        bail!("no follower follows at least {} elites", cfg.model.min_elites_followed);
    }
    log::info!(
        "ingest: {} followers, {} elites, {} edges after filtering",
        filtered.n_followers(),
        filtered.n_elites(),
        filtered.edge_count()
    );

    let pseudo = cfg
        .model
        .pseudonymize
        .then(|| PseudoIdMap::generate(filtered.follower_ids().iter().map(String::as_str), cfg.seed));
    let public = match &pseudo {
        Some(map) => {
            let ids = filtered
                .follower_ids()
                .iter()
                .map(|id| map.get(id).expect("every follower mapped").to_string())
                .collect();
            BipartiteNetwork::from_parts(ids, filtered.elite_ids().to_vec(), filtered.edges().to_vec())?
        }
        None => filtered.clone(),
    };

    st.write_with(NETWORK, |w| io::write_edges(w, &public))?;
    let kept_meta: Vec<EliteMeta> = public
        .elite_ids()
        .iter()
        .map(|id| known[id.as_str()].clone())
        .collect();
    st.write_with(ELITES, |w| io::write_elites(w, &kept_meta))?;
    if let Some(map) = &pseudo {
        st.write_with(PSEUDO_IDS, |w| io::write_pseudo_ids(w, map))?;
    }
    let mut json = serde_json::to_vec_pretty(&IngestReport {
        filter: report,
        dropped_unknown_elite_edges: unknown_edges,
        pseudonymized: pseudo.is_some(),
    })?;
    json.push(b'\n');
    st.write(FILTER_REPORT, &json)?;

    if let Some(activity) = &activity {
        let mps: Vec<ActivityRecord> = kept_meta
            .iter()
            .filter_map(|e| activity.get(&e.id).map(|a| activity_record(a, &e.id)))
            .collect::<Result<_>>()?;
        let meta = meta_map(&kept_meta);
        st.write_with(MPS_ACTIVITY, |w| io::write_mps_activity(w, &mps, &meta))?;
        let followers: Vec<ActivityRecord> = filtered
            .follower_ids()
            .iter()
            .zip(public.follower_ids())
            .filter_map(|(raw, public)| activity.get(raw).map(|a| activity_record(a, public)))
            .collect::<Result<_>>()?;
        st.write_with(FOLLOWERS_ACTIVITY, |w| io::write_followers_activity(w, &followers))?;
    }
    st.finish()
}

pub fn embed(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut st = ctx.stage("embed");
    let path = ctx.artifact(NETWORK)?;
    let net = io::read_edges(&st.read(&path)?[..], &source(&path))?;
    net.check_filtered(cfg.model.min_elites_followed)?;
    let mut ca = cfg.ca.clone();
    ca.seed = cfg.seed;
    let emb = correspondence_analysis(&net, &ca)?;
    st.write_with(EMBEDDING, |w| write_embedding(w, &emb, &cfg.ca_digest()))?;
    let rows = emb
        .singular_values
        .iter()
        .enumerate()
        .map(|(d, s)| vec![(d + 1).to_string(), f5(*s)]);
    st.write(SINGULAR_VALUES, &csv_bytes(&["dimension", "singular_value"], rows))?;
    st.finish()
}

pub fn calibrate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut st = ctx.stage("calibrate");
    let emb_path = ctx.artifact(EMBEDDING)?;
    let (emb, _) = read_embedding(&st.read(&emb_path)?[..])?;
    let meta = read_elite_meta(&mut st, &ctx.artifact(ELITES)?)?;
    let party: HashMap<String, String> = meta.iter().map(|e| (e.id.clone(), e.party.clone())).collect();
    let survey_path = require(&cfg.paths.survey, "survey")?;
    let rows = io::read_survey(&st.read(survey_path)?[..], &source(survey_path))?;
    let surveys = SurveyReference::from_rows(&rows)?;
    let manifest = cfg.calibrate.manifest()?;
    let calibs = calibrate_all(&emb, &party, &surveys, &manifest, cfg.calibrate.alpha)
        .with_context(|| format!("calibrating against {}", survey_path.display()))?;

    let mut json = serde_json::to_vec_pretty(&calibs)?;
    json.push(b'\n');
    st.write(CALIBRATIONS, &json)?;
    let rows = calibs.iter().map(|c| {
        vec![
            c.column(),
            c.parties.len().to_string(),
            c.latent_dims_used.to_string(),
            f3(c.fidelity.pearson),
            c.fidelity.weighted_pearson.map(f3).unwrap_or_default(),
            f3(c.fidelity.mean_abs_diff),
        ]
    });
    let header = ["dimension", "parties", "latent_dims", "pearson", "weighted_pearson", "mean_abs_diff"];
    st.write(FIDELITY, &csv_bytes(&header, rows))?;
    st.finish()
}

pub fn positions(ctx: &Ctx) -> Result<()> {
    let mut st = ctx.stage("positions");
    let emb_path = ctx.artifact(EMBEDDING)?;
    let (emb, _) = read_embedding(&st.read(&emb_path)?[..])?;
    let calibs: Vec<AffineCalibration> = serde_json::from_slice(&st.read(&ctx.artifact(CALIBRATIONS)?)?)
        .context("parsing calibrations.json")?;
    let meta = meta_map(&read_elite_meta(&mut st, &ctx.artifact(ELITES)?)?);
    let pos = apply_calibration(&emb, &calibs)?;
    st.write_with(MPS_POSITIONS, |w| io::write_positions(w, &pos.elites, Some(&meta)))?;
    st.write_with(FOLLOWERS_POSITIONS, |w| io::write_positions(w, &pos.followers, None))?;
    st.finish()
}

type Meta = Option<HashMap<String, (String, String)>>;

fn read_positions(st: &mut StageWriter, path: &Path) -> Result<(PositionTable, Meta)> {
    Ok(io::read_positions(&st.read(path)?[..], &source(path))?)
}

fn positions_path(ctx: &Ctx, configured: &Option<PathBuf>, key: &str, default: &str) -> Result<PathBuf> {
    match configured {
        Some(_) => Ok(require(configured, key)?.clone()),
        None => ctx.artifact(default),
    }
}

pub fn media(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut st = ctx.stage("media");
    let fpath = positions_path(ctx, &cfg.paths.followers_positions, "followers_positions", FOLLOWERS_POSITIONS)?;
    let (followers, _) = read_positions(&mut st, &fpath)?;
    let shares_path = require(&cfg.paths.shares, "shares")?;
    let shares = io::read_shares(&st.read(shares_path)?[..], &source(shares_path))?;
    let mcfg = MediaConfig {
        min_users: cfg.media.min_users,
        n_boot: cfg.media.n_boot,
        seed: cfg.seed,
    };
    let mut report = aggregate_shares(shares, &followers, &mcfg)?;
    log::info!(
        "media: {} of {} domains shared by at least {} users",
        report.profiles.len(),
        report.observed_domains,
        mcfg.min_users
    );
    let categories = match &cfg.paths.categories {
        Some(_) => {
            let p = require(&cfg.paths.categories, "categories")?;
            io::read_categories(&st.read(p)?[..], &source(p))?
        }
        None => HashMap::new(),
    };
    attach_categories(&mut report.profiles, &categories);
    st.write_with(DOMAINS, |w| io::write_domains(w, &report))?;

    let mut rows = Vec::new();
    for (col, name) in report.columns.iter().enumerate() {
        for (cat, s) in category_distributions(&report.profiles, &categories, col) {
            rows.push(vec![cat, name.clone(), s.count.to_string(), f3(s.mean), f3(s.std)]);
        }
    }
    rows.sort();
    st.write(MEDIA_CATEGORIES, &csv_bytes(&["media_category", "dimension", "domains", "mean", "std"], rows))?;
    st.finish()
}

fn read_label_table(st: &mut StageWriter, path: &Option<PathBuf>, key: &str, who: Annotator) -> Result<Option<LabelTable>> {
    match path {
        Some(_) => {
            let p = require(path, key)?;
            Ok(Some(io::read_labels(&st.read(p)?[..], &source(p), who)?))
        }
        None => Ok(None),
    }
}

pub fn validate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut st = ctx.stage("validate");
    let fpath = positions_path(ctx, &cfg.paths.followers_positions, "followers_positions", FOLLOWERS_POSITIONS)?;
    let mpath = positions_path(ctx, &cfg.paths.mps_positions, "mps_positions", MPS_POSITIONS)?;
    let (followers, _) = read_positions(&mut st, &fpath)?;
    let (mps, mps_meta) = read_positions(&mut st, &mpath)?;

    let summary_rows = followers
        .columns()
        .iter()
        .filter(|c| mps.column_index(c).is_some())
        .map(|c| {
            let s = column_summary(&[&followers, &mps], c)?;
            Ok(vec![c.clone(), f3(s.mean), f3(s.std), f3(s.outlier_pct), s.n.to_string()])
        })
        .collect::<Result<Vec<_>>>()?;
    st.write(TABLE1, &csv_bytes(&["dimension", "mean", "std", "outlier_pct", "n"], summary_rows))?;

    let mut tables = Vec::new();
    let mut discards = Vec::new();
    for (path, key, who) in [
        (&cfg.paths.labels_human, "labels_human", Annotator::Human),
        (&cfg.paths.labels_llm, "labels_llm", Annotator::Llm),
    ] {
        if let Some(raw) = read_label_table(&mut st, path, key, who)? {
            let (clean, counts) = sanitize_labels(&raw, &OPPOSITE_PAIRS);
            for c in counts {
                discards.push(vec![who.to_string(), c.label_a, c.label_b, c.count.to_string(), f3(c.percent)]);
            }
            tables.push(clean);
        }
    }
    st.write(
        LABEL_DISCARDS,
        &csv_bytes(&["annotator", "label_a", "label_b", "discarded", "percent"], discards),
    )?;

    if tables.is_empty() {
        log::warn!("validate: no label tables configured; skipping separation and bins");
    } else {
        let plan = match &cfg.paths.plan {
            Some(_) => {
                let p = require(&cfg.paths.plan, "plan")?;
                io::read_plan(&st.read(p)?[..], &source(p))?
            }
            None => default_plan(),
        };
        let refs: Vec<&LabelTable> = tables.iter().collect();
        let rows = separation_report(&plan, &followers, &refs)?;
        st.write_with(SEPARATION, |w| io::write_separation(w, &rows))?;

        let mut wanted = BTreeSet::new();
        for row in &plan {
            for label in [&row.label_a, &row.label_b] {
                wanted.insert((row.column(), label.clone(), row.annotator.to_string()));
            }
        }
        let mut bins = Vec::new();
        for (column, label, who) in wanted {
            let Some(table) = tables.iter().find(|t| t.source().to_string() == who) else {
                continue;
            };
            if followers.column_index(&column).is_none() || table.label_index(&label).is_none() {
                continue;
            }
            let rows = bin_concentration(&followers, &column, table, &label, cfg.validate.ci_alpha)?;
            bins.push((column, label, table.source(), rows));
        }
        st.write_with(BINS, |w| io::write_bins(w, &bins))?;
    }

    if let Some((old, new)) = &cfg.validate.cross_waves {
        match cross_wave_inputs(&followers, &mps, &mps_meta, old, new) {
            Some(party) => {
                let rows = cross_wave_report(&followers, &mps, &party, (old, new))?;
                st.write_with(CROSS_WAVE, |w| io::write_cross_wave(w, &rows))?;
            }
            None => log::info!("validate: positions lack waves {old}/{new}; skipping cross-wave check"),
        }
    }
    st.finish()
}

fn cross_wave_inputs(
    followers: &PositionTable,
    mps: &PositionTable,
    meta: &Meta,
    old: &str,
    new: &str,
) -> Option<HashMap<String, String>> {
    let meta = meta.as_ref()?;
    for dim in polispace_core::validate::SHARED_DIMENSIONS {
        for wave in [old, new] {
            let col = polispace_core::DimensionSpec::new(dim, wave).column();
            followers.column_index(&col)?;
            mps.column_index(&col)?;
        }
    }
    Some(meta.iter().map(|(id, (_, party))| (id.clone(), party.clone())).collect())
}

/// Renders a CSV artifact as a Markdown table.
fn markdown_table(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let cols: Vec<&str> = header.split(',').collect();
    let mut s = format!("| {} |\n|{}\n", cols.join(" | "), " --- |".repeat(cols.len()));
    for line in lines {
        let _ = writeln!(s, "| {} |", line.split(',').collect::<Vec<_>>().join(" | "));
    }
    s
}

pub fn report(ctx: &Ctx) -> Result<()> {
    let mut st = ctx.stage("report");
    let mut md = String::from("# Pipeline report\n");
    let sections: [(&str, &str); 9] = [
        (SINGULAR_VALUES, "Singular values"),
        (FIDELITY, "Calibration fidelity"),
        (TABLE1, "Position summary"),
        (SEPARATION, "Label separation"),
        (LABEL_DISCARDS, "Contradictory labels"),
        (CROSS_WAVE, "Cross-wave correlations"),
        (MEDIA_CATEGORIES, "Media categories"),
        (RECOVERY, "Synthetic recovery"),
        (FILTER_REPORT, "Filtering"),
    ];
    let mut found = false;
    for (file, title) in sections {
        let path = ctx.out.join(file);
        if !path.exists() {
            continue;
        }
        found = true;
        let text = String::from_utf8(st.read(&path)?).with_context(|| format!("{file} is not UTF-8"))?;
        let _ = write!(md, "\n## {title}\n\nSource: `{file}`\n\n");
        if file.ends_with(".json") {
            let _ = write!(md, "```json\n{}```\n", text);
        } else {
            md.push_str(&markdown_table(&text));
        }
    }
    if !found {
        bail!("no stage artifacts in {}", ctx.out.display());
    }
    st.write(REPORT, md.as_bytes())?;
    st.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_rendering() {
        let md = markdown_table("a,b\n1,2\n");
        assert_eq!(md, "| a | b |\n| --- | --- |\n| 1 | 2 |\n");
    }
}
