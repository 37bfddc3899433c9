//! The `synth` command: sample a network from the homophily model, write it
//! out in the input schemas, run every stage on it and score the recovery.

use std::collections::HashMap;

use anyhow::{bail, Context, Result};
use polispace_core::calibrate::SurveyRow;
use polispace_core::format::f3;
use polispace_core::io::{self, ActivityInput, EliteMeta};
use polispace_core::synth::{
    generate_network, logistic, recovery_benchmark, recovery_pearson, synthetic_dimensions,
    PipelineOptions,
};
use polispace_core::validate::{Annotator, LabelTable, PlanRow};
use polispace_core::{GroundTruth, PositionTable, ShareRecord, SyntheticModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::artifacts::StageWriter;
use crate::config::Config;
use crate::stages::{self, Ctx};

const INPUTS: &str = "inputs";
const N_DOMAINS: usize = 40;
const LABEL_RATE: f64 = 0.35;
const CONTRADICTION_RATE: f64 = 0.01;

pub fn fixture(cfg: &Config) -> Result<SyntheticModelParams> {
    let s = &cfg.synth;
    let mut p = match s.fixture.as_str() {
        "hexagon" => SyntheticModelParams::hexagon(cfg.seed),
        "line" => SyntheticModelParams::line(cfg.seed),
        other => bail!("unknown synthetic fixture {other:?} (expected hexagon or line)"),
    };
    if let Some(g) = s.gamma {
        p.gamma = g;
    }
    if let Some(n) = s.n_followers {
        p.n_followers = n;
    }
    if let Some(m) = s.n_elites {
        p.n_elites = m;
    }
    p.validate()?;
    Ok(p)
}

/// Stream for the auxiliary tables, independent of the network draws.
fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn write_network_inputs(st: &mut StageWriter, params: &SyntheticModelParams) -> Result<GroundTruth> {
    let (net, truth) = generate_network(params)?;
    st.write_with(&format!("{INPUTS}/edges.csv"), |w| io::write_edges(w, &net))?;

    let elites: Vec<EliteMeta> = net
        .elite_ids()
        .iter()
        .zip(&truth.elite_party)
        .map(|(id, party)| EliteMeta {
            id: id.clone(),
            name: format!("Elite {id}"),
            party: party.clone(),
        })
        .collect();
    st.write_with(&format!("{INPUTS}/elites.csv"), |w| io::write_elites(w, &elites))?;

    let dims = synthetic_dimensions(truth.survey_map.nrows());
    let mut survey = Vec::new();
    for (party, scores) in &truth.party_scores {
        for (spec, &score) in dims.iter().zip(scores) {
            survey.push(SurveyRow {
                party: party.clone(),
                dimension: spec.name.clone(),
                wave: spec.wave.clone(),
                score,
                native_scale_max: 10,
            });
        }
    }
    st.write_with(&format!("{INPUTS}/survey.csv"), |w| io::write_survey(w, &survey))?;

    let mut rng = aux_rng(params.seed, 1);
    let mut activity = Vec::with_capacity(net.n_followers() + net.n_elites());
    let followers = net.follower_ids().iter().zip(&truth.account_followers);
    let elites = net
        .elite_ids()
        .iter()
        .map(|id| (id, 0u64))
        .collect::<Vec<_>>();
    for (id, followers) in followers.map(|(id, &c)| (id, c)).chain(elites) {
        let followers = if followers == 0 { rng.random_range(1_000..200_000) } else { followers };
        activity.push(ActivityInput {
            id: id.clone(),
            total_posts: rng.random_range(0..20_000),
            created_at: format!("20{:02}-{:02}-15", rng.random_range(8..20), rng.random_range(1..=12)),
            collected_at: "2023-06-01".into(),
            followers,
            followees: rng.random_range(10..3_000),
        });
    }
    st.write_with(&format!("{INPUTS}/activity.csv"), |w| io::write_activity_inputs(w, &activity))?;
    Ok(truth)
}

/// Raw id → public id after ingestion (identity when not pseudonymized).
fn public_ids(ctx: &Ctx) -> Result<HashMap<String, String>> {
    let path = ctx.out.join(stages::PSEUDO_IDS);
    if !path.exists() {
        let bytes = std::fs::read(ctx.out.join(stages::NETWORK))?;
        let net = io::read_edges(&bytes[..], stages::NETWORK)?;
        return Ok(net.follower_ids().iter().map(|id| (id.clone(), id.clone())).collect());
    }
    let map = io::read_pseudo_ids(&std::fs::read(&path)?[..], stages::PSEUDO_IDS)?;
    Ok(map.pairs().map(|(r, p)| (r.to_string(), p.to_string())).collect())
}

/// Sharing records and annotations that depend on the true survey-space
/// positions, keyed by the public ids the later stages see.
fn write_validation_inputs(
    st: &mut StageWriter,
    truth: &GroundTruth,
    public: &HashMap<String, String>,
    seed: u64,
) -> Result<()> {
    let d = truth.follower_scores.ncols();
    let mut rng = aux_rng(seed, 2);
    let domains: Vec<Vec<f64>> = (0..N_DOMAINS)
        .map(|_| (0..d).map(|_| rng.random_range(1.0..9.0)).collect())
        .collect();
    let domain_name = |j: usize| format!("site{j:02}.example");

    let mut raw_ids: Vec<(&String, &String)> = public.iter().collect();
    raw_ids.sort();
    let mut shares = Vec::new();
    let mut labels = LabelTable::new(Annotator::Human, vec!["left".into(), "right".into()]);
    for (raw, pid) in raw_ids {
        let i: usize = raw[1..].parse().context("synthetic follower id")?;
        let s: Vec<f64> = (0..d).map(|c| truth.follower_scores[(i, c)]).collect();
        let weights: Vec<f64> = domains
            .iter()
            .map(|c| (-c.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 8.0).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        for _ in 0..rng.random_range(1..=8) {
            let mut u = rng.random::<f64>() * total;
            let j = weights
                .iter()
                .position(|w| {
                    u -= w;
                    u <= 0.0
                })
                .unwrap_or(N_DOMAINS - 1);
            shares.push(ShareRecord {
                pseudo_id: pid.clone(),
                domain: domain_name(j),
                tweet_count: rng.random_range(1..=5),
            });
        }
        if rng.random::<f64>() < LABEL_RATE {
            let left = rng.random::<f64>() < logistic(-1.5 * (s[0] - 5.0));
            let both = rng.random::<f64>() < CONTRADICTION_RATE;
            let row = [(left || both).then_some(true), (!left || both).then_some(true)];
            labels.push(pid.clone(), &row)?;
        }
    }
    st.write_with(&format!("{INPUTS}/shares.csv"), |w| io::write_shares(w, &shares))?;
    let mut cats = String::from("domain,media_category\n");
    for j in 0..N_DOMAINS {
        let kind = ["newspaper", "broadcaster", "digital_native", "alternative"][j % 4];
        cats.push_str(&format!("{},{kind}\n", domain_name(j)));
    }
    st.write(&format!("{INPUTS}/categories.csv"), cats.as_bytes())?;
    st.write_with(&format!("{INPUTS}/labels_human.csv"), |w| io::write_labels(w, &labels))?;
    let plan = [PlanRow {
        dimension: "dim1".into(),
        wave: "2000".into(),
        annotator: Annotator::Human,
        label_a: "left".into(),
        label_b: "right".into(),
    }];
    st.write_with(&format!("{INPUTS}/plan.csv"), |w| io::write_plan(w, &plan))?;
    Ok(())
}

fn recovery_rows(seed: u64, dims: &[String], pearson: &[f64]) -> Vec<Vec<String>> {
    dims.iter()
        .zip(pearson)
        .map(|(d, r)| vec![seed.to_string(), d.clone(), f3(*r)])
        .collect()
}

pub fn run(mut ctx: Ctx) -> Result<()> {
    let params = fixture(&ctx.cfg)?;
    let parties = params.party_count();
    let dims = synthetic_dimensions(params.d);

    let inputs = ctx.out.join(INPUTS);
    {
        let cfg = &mut ctx.cfg;
        cfg.paths.edges = Some(inputs.join("edges.csv"));
        cfg.paths.elites = Some(inputs.join("elites.csv"));
        cfg.paths.survey = Some(inputs.join("survey.csv"));
        cfg.paths.activity = Some(inputs.join("activity.csv"));
        cfg.paths.shares = Some(inputs.join("shares.csv"));
        cfg.paths.categories = Some(inputs.join("categories.csv"));
        cfg.paths.labels_human = Some(inputs.join("labels_human.csv"));
        cfg.paths.labels_llm = None;
        cfg.paths.plan = Some(inputs.join("plan.csv"));
        cfg.paths.followers_positions = None;
        cfg.paths.mps_positions = None;
        cfg.calibrate.dimensions = Some(dims.iter().map(|s| s.column()).collect());
        cfg.ca.k_dims = parties - 1;
        cfg.validate.cross_waves = None;
    }

    let mut st = StageWriter::new(&ctx.out, "synth", ctx.cfg.digest(), ctx.cfg.seed);
    let truth = write_network_inputs(&mut st, &params)?;
    stages::ingest(&ctx)?;
    let public = public_ids(&ctx)?;
    write_validation_inputs(&mut st, &truth, &public, params.seed)?;
    stages::embed(&ctx)?;
    stages::calibrate(&ctx)?;
    stages::positions(&ctx)?;
    stages::media(&ctx)?;
    stages::validate(&ctx)?;

    // score the file-based run against the truth
    let fpath = ctx.out.join(stages::FOLLOWERS_POSITIONS);
    let (followers, _) = io::read_positions(&st.read(&fpath)?[..], stages::FOLLOWERS_POSITIONS)?;
    let raw_of: HashMap<&str, &str> = public.iter().map(|(r, p)| (p.as_str(), r.as_str())).collect();
    let mut raw_table = PositionTable::new(followers.columns().to_vec());
    for (i, id) in followers.ids().iter().enumerate() {
        let raw = raw_of
            .get(id.as_str())
            .with_context(|| format!("{id} has no raw id"))?;
        raw_table.push(raw.to_string(), followers.row(i))?;
    }
    let pearson = recovery_pearson(&raw_table, &truth)?;
    let mut rows = recovery_rows(params.seed, followers.columns(), &pearson);

    let opts = PipelineOptions {
        min_elites_followed: ctx.cfg.model.min_elites_followed,
        min_account_followers: ctx.cfg.model.min_account_followers,
        k_dims: None,
        ridge_alpha: ctx.cfg.calibrate.alpha,
        ca_seed: ctx.cfg.seed,
    };
    for k in 1..=ctx.cfg.synth.extra_seeds as u64 {
        let seed = params.seed + k;
        let report = recovery_benchmark(&SyntheticModelParams { seed, ..params.clone() }, &opts)?;
        rows.extend(recovery_rows(seed, &report.dimensions, &report.pearson));
    }
    let mut csv = String::from("seed,dimension,pearson\n");
    for r in &rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
    }
    st.write(stages::RECOVERY, csv.as_bytes())?;
    for r in &rows {
        log::info!("recovery seed {} {}: r = {}", r[0], r[1], r[2]);
    }
    st.finish()?;
    stages::report(&ctx)
}
