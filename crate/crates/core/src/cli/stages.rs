use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::artifacts::{self as art, fmt_f64, fmt_opt, read_json, write_json, write_table, Table};
use super::config::{CohortChoice, OutcomeColumn, PipelineConfig};
use crate::corpus::{
    assign_treatment, ingest_events, select_group1, select_group2, BadgeParser, Corpus, OutcomeOptions, StudyUnit, TreatmentRule,
};
use crate::diagnostics::{
    absolute_mean_difference, balance_report, eate, mediation_on_matches, median_ratio_effect, permutation_test, MedianRatioEffect,
    PermutationResult,
};
use crate::error::{Error, Result};
use crate::matcher::{match_one_to_many, sweep_caliper, MatchSet, MatchedPair, SignificanceCheck, SweepConditions, SweepOutcome, SweepStatus};
use crate::pipeline::estimate;
use crate::selector::{cross_validate, default_lambda_grid, select_covariates, CvOptions, LassoOptions};
use crate::synthgen::{export_records, generate_study};
use crate::textfeat::{
    build_feature_matrix, lda_fit, standardize, tokenize, FeatureKind, FeatureMatrix, FeatureOptions, FeatureSchema, Featurizer, LdaParams,
    Lexicon, SentimentAnalyzer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Cohort,
    Features,
    Select,
    Match,
    Balance,
    Effect,
    Mediate,
}

impl Stage {
    pub const ALL: [Stage; 8] =
        [Stage::Ingest, Stage::Cohort, Stage::Features, Stage::Select, Stage::Match, Stage::Balance, Stage::Effect, Stage::Mediate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Cohort => "cohort",
            Stage::Features => "features",
            Stage::Select => "select",
            Stage::Match => "match",
            Stage::Balance => "balance",
            Stage::Effect => "effect",
            Stage::Mediate => "mediate",
        }
    }

    pub fn needs_input(self) -> bool {
        matches!(self, Stage::Ingest | Stage::Cohort | Stage::Features)
    }
}

pub struct Context<'a> {
    pub cfg: &'a PipelineConfig,
    pub out: &'a Path,
}

impl Context<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn corpus(&self) -> Result<Corpus> {
        let input = self.cfg.input()?;
        ingest_events(BufReader::new(File::open(input)?))
    }
}

pub fn run_stage(stage: Stage, ctx: &Context<'_>) -> Result<()> {
    log::info!("running stage {}", stage.name());
    match stage {
        Stage::Ingest => ingest(ctx),
        Stage::Cohort => cohort(ctx),
        Stage::Features => features(ctx),
        Stage::Select => select(ctx),
        Stage::Match => match_stage(ctx),
        Stage::Balance => balance(ctx),
        Stage::Effect => effect(ctx),
        Stage::Mediate => mediate(ctx),
    }
}

fn ingest(ctx: &Context<'_>) -> Result<()> {
    let corpus = ctx.corpus()?;
    let c = corpus.counts();
    write_json(
        &ctx.path(art::INGEST),
        &serde_json::json!({
            "events": corpus.len(),
            "users": corpus.users().count(),
            "self_posts": c.self_posts,
            "link_posts": c.link_posts,
            "comments": c.comments,
        }),
    )
}

fn outcome_value(u: &StudyUnit, col: OutcomeColumn) -> Option<f64> {
    match col {
        OutcomeColumn::Returned => Some(if u.returned { 1.0 } else { 0.0 }),
        OutcomeColumn::WeightLossLb => u.weight_loss_lb,
        OutcomeColumn::LossRateLbPerDay => u.loss_rate_lb_per_day,
        OutcomeColumn::LifespanDays => Some(u.lifespan_days as f64),
        OutcomeColumn::ActivityCount => Some(u.activity_count as f64),
        OutcomeColumn::BadgeUpdateCount => Some(u.badge_update_count as f64),
    }
    .filter(|v| v.is_finite())
}

const COHORT_HEADER: [&str; 12] = [
    "unit_id",
    "treatment",
    "outcome",
    "first_post_id",
    "comment_count",
    "score",
    "returned",
    "weight_loss_lb",
    "lifespan_days",
    "activity_count",
    "loss_rate_lb_per_day",
    "badge_update_count",
];

fn cohort(ctx: &Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let corpus = ctx.corpus()?;
    let badges = match &cfg.cohort.badge_pattern {
        Some(p) => BadgeParser::new(p)?,
        None => BadgeParser::default(),
    };
    let opts = OutcomeOptions {
        include_self_comments: cfg.treatment.include_self_comments,
        weight_loss_mode: cfg.cohort.weight_loss_mode,
        badges,
    };
    let g1 = select_group1(&corpus, &opts);
    let g2 = select_group2(&g1);
    let mut chosen = match cfg.cohort.group {
        CohortChoice::G1 => g1.clone(),
        CohortChoice::G2 => g2.clone(),
    };
    let before = chosen.len();
    let col = cfg.cohort.outcome;
    chosen.units.retain(|u| outcome_value(u, col).is_some());
    let dropped = before - chosen.len();
    let rule = TreatmentRule { variable: cfg.treatment.variable, cutoff: cfg.treatment.cutoff };
    let assigned = assign_treatment(&chosen, rule)?;

    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    write_table(
        &ctx.path(art::COHORT),
        &COHORT_HEADER,
        assigned.units.iter().map(|u| {
            vec![
                u.user.clone(),
                flag(u.treatment),
                fmt_opt(outcome_value(u, col)),
                u.first_post_id.clone(),
                u.comment_count.to_string(),
                u.score.to_string(),
                flag(u.returned),
                fmt_opt(u.weight_loss_lb),
                u.lifespan_days.to_string(),
                u.activity_count.to_string(),
                fmt_opt(u.loss_rate_lb_per_day),
                u.badge_update_count.to_string(),
            ]
        }),
    )?;
    write_json(
        &ctx.path(art::COHORT_SUMMARY),
        &serde_json::json!({
            "group": cfg.cohort.group,
            "outcome": col.name(),
            "treatment": rule,
            "g1_units": g1.len(),
            "g2_units": g2.len(),
            "dropped_missing_outcome": dropped,
            "units": assigned.len(),
            "treated": assigned.n_treated(),
            "control": assigned.len() - assigned.n_treated(),
        }),
    )
}

fn write_features(ctx: &Context<'_>, schema: &FeatureSchema, x: &FeatureMatrix) -> Result<()> {
    let names = schema.names();
    let mut header = vec!["unit_id"];
    header.extend(names.iter().map(String::as_str));
    write_table(
        &ctx.path(art::FEATURES),
        &header,
        (0..x.n_rows()).map(|i| std::iter::once(x.unit_ids()[i].clone()).chain(x.row(i).iter().map(|v| fmt_f64(*v))).collect()),
    )?;
    write_json(&ctx.path(art::FEATURE_SCHEMA), schema)
}

fn features(ctx: &Context<'_>) -> Result<()> {
    let cfg = &ctx.cfg.features;
    let cohort = Table::read(&ctx.path(art::COHORT), art::COHORT_SRC)?;
    let corpus = ctx.corpus()?;
    let ids = cohort.strings("unit_id")?;
    let posts: Vec<(String, String)> = ids
        .iter()
        .zip(cohort.strings("first_post_id")?)
        .map(|(id, post)| {
            let rec = corpus.get(post).ok_or_else(|| Error::invalid(format!("first post `{post}` of {id} is not in the corpus")))?;
            Ok((id.to_string(), rec.text()))
        })
        .collect::<Result<_>>()?;
    let docs: Vec<Vec<String>> = posts.iter().map(|(_, t)| tokenize(t)).collect();
    let params = LdaParams { topics: cfg.topics, iterations: cfg.iterations, alpha: cfg.alpha, beta: cfg.beta, seed: cfg.seed };
    let model = lda_fit(&docs, params)?;
    let lexicon = match &cfg.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::builtin(),
    };
    let sentiment = SentimentAnalyzer::default();
    let featurizer = Featurizer {
        topics: Some(&model),
        lexicon: &lexicon,
        sentiment: &sentiment,
        options: FeatureOptions { question_mode: cfg.question_mode, sentiment: cfg.sentiment, length: cfg.length },
    };
    let (schema, x) = build_feature_matrix(&posts, &featurizer)?;
    write_features(ctx, &schema, &x)?;
    model.save(&ctx.path(art::TOPIC_MODEL))
}

/// Cohort and features joined on unit id, in cohort order.
struct Study {
    ids: Vec<String>,
    treatment: Vec<bool>,
    outcomes: Vec<f64>,
    names: Vec<String>,
    x: FeatureMatrix,
    cohort: Table,
}

fn load_study(ctx: &Context<'_>) -> Result<Study> {
    let cohort = Table::read(&ctx.path(art::COHORT), art::COHORT_SRC)?;
    let feats = Table::read(&ctx.path(art::FEATURES), art::FEATURES_SRC)?;
    let ids: Vec<String> = cohort.strings("unit_id")?.into_iter().map(str::to_string).collect();
    if feats.strings("unit_id")? != ids.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::invalid("feature matrix rows do not line up with the cohort table; rerun `features`"));
    }
    let names: Vec<String> = feats.header[1..].to_vec();
    let mut data = Vec::with_capacity(ids.len() * names.len());
    for row in &feats.rows {
        for v in &row[1..] {
            data.push(v.parse::<f64>().map_err(|_| Error::invalid(format!("feature value `{v}` is not a number")))?);
        }
    }
    Ok(Study {
        treatment: cohort.flags("treatment")?,
        outcomes: cohort.floats("outcome")?,
        x: FeatureMatrix::new(ids.clone(), names.len(), data)?,
        ids,
        names,
        cohort,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SelectedCovariate {
    name: String,
    column: usize,
    weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SelectionReport {
    folds: usize,
    seed: u64,
    sparsity_tolerance: f64,
    lambdas: Vec<f64>,
    mean_auc: Vec<f64>,
    nonzero: Vec<usize>,
    best_lambda: f64,
    chosen_lambda: f64,
    chosen_mean_auc: f64,
    intercept: f64,
    converged: bool,
    selected: Vec<SelectedCovariate>,
}

fn select(ctx: &Context<'_>) -> Result<()> {
    art::require(&ctx.path(art::FEATURES), art::FEATURES_SRC)?;
    let s = load_study(ctx)?;
    let sc = &ctx.cfg.selector;
    let opts = CvOptions { folds: sc.folds, seed: sc.seed, sparsity_tolerance: sc.sparsity_tolerance, lasso: LassoOptions::default() };
    let grid = match &sc.lambda_grid {
        Some(g) => g.clone(),
        None => default_lambda_grid(&s.x, &s.treatment)?,
    };
    let cv = cross_validate(&s.x, &s.treatment, &grid, &opts)?;
    let model = cv.chosen_model();
    write_table(
        &ctx.path(art::COEFFICIENTS),
        &["covariate", "coefficient"],
        std::iter::once(vec!["(intercept)".to_string(), fmt_f64(model.intercept)])
            .chain(s.names.iter().zip(&model.coefficients).map(|(n, b)| vec![n.clone(), fmt_f64(*b)])),
    )?;
    let selection = select_covariates(model, &s.names)?;
    let report = SelectionReport {
        folds: sc.folds,
        seed: sc.seed,
        sparsity_tolerance: sc.sparsity_tolerance,
        best_lambda: cv.lambdas[cv.best_index],
        chosen_lambda: cv.chosen_lambda(),
        chosen_mean_auc: cv.mean_auc[cv.chosen_index],
        intercept: model.intercept,
        converged: model.converged,
        selected: selection
            .names
            .iter()
            .zip(&selection.indices)
            .zip(&selection.weights)
            .map(|((n, &c), &w)| SelectedCovariate { name: n.clone(), column: c, weight: w })
            .collect(),
        lambdas: cv.lambdas,
        mean_auc: cv.mean_auc,
        nonzero: cv.nonzero,
    };
    write_json(&ctx.path(art::SELECTION), &report)
}

fn load_selection(ctx: &Context<'_>, s: &Study) -> Result<crate::selector::CovariateSelection> {
    let report: SelectionReport = read_json(&ctx.path(art::SELECTION), art::SELECTION_SRC)?;
    let mut sel = crate::selector::CovariateSelection { names: vec![], indices: vec![], weights: vec![] };
    for c in report.selected {
        let j = s.names.iter().position(|n| *n == c.name).ok_or_else(|| {
            Error::invalid(format!("selected covariate `{}` is not in the feature matrix; rerun `select`", c.name))
        })?;
        sel.names.push(c.name);
        sel.indices.push(j);
        sel.weights.push(c.weight);
    }
    if sel.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(sel)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatchSummary {
    mode: String,
    status: SweepStatus,
    caliper: Option<f64>,
    pairs: usize,
    unmatched_treated: usize,
    distinct_controls: usize,
    trace: Option<serde_json::Value>,
}

fn match_stage(ctx: &Context<'_>) -> Result<()> {
    art::require(&ctx.path(art::SELECTION), art::SELECTION_SRC)?;
    let cfg = ctx.cfg;
    let s = load_study(ctx)?;
    let sel = load_selection(ctx, &s)?;
    let xs = s.x.select_columns(&sel.indices);
    let matches_path = ctx.path(art::MATCHES);

    let (summary, set): (MatchSummary, Option<MatchSet>) = match cfg.matcher.caliper {
        Some(c) => {
            let set = match_one_to_many(&xs, &s.treatment, &sel.weights, c)?;
            let summary = MatchSummary {
                mode: "fixed".into(),
                status: SweepStatus::Satisfied,
                caliper: Some(c),
                pairs: set.len(),
                unmatched_treated: set.unmatched_treated.len(),
                distinct_controls: set.distinct_controls(),
                trace: None,
            };
            (summary, Some(set))
        }
        None => {
            let grid = cfg.caliper_grid()?;
            let d = &cfg.diagnostics;
            let conditions = SweepConditions {
                min_pairs: cfg.matcher.min_pairs,
                significance: cfg.matcher.significance_alpha.map(|alpha| SignificanceCheck {
                    outcomes: s.outcomes.clone(),
                    statistic: d.statistic,
                    mode: d.mode,
                    permutations: d.permutations,
                    seed: d.seed,
                    alpha,
                }),
                ..SweepConditions::default()
            };
            let SweepOutcome { status, chosen_caliper, match_set, trace } =
                sweep_caliper(&xs, &s.treatment, &sel.weights, &sel.names, &grid, &conditions)?;
            let summary = MatchSummary {
                mode: "sweep".into(),
                status,
                caliper: chosen_caliper,
                pairs: match_set.as_ref().map_or(0, MatchSet::len),
                unmatched_treated: match_set.as_ref().map_or(0, |m| m.unmatched_treated.len()),
                distinct_controls: match_set.as_ref().map_or(0, MatchSet::distinct_controls),
                trace: Some(serde_json::to_value(&trace)?),
            };
            (summary, match_set)
        }
    };
    write_json(&ctx.path(art::MATCH_SUMMARY), &summary)?;
    match set {
        Some(set) => write_table(
            &matches_path,
            &["treated_id", "control_id", "similarity"],
            set.pairs.iter().map(|p| vec![p.treated_id.clone(), p.control_id.clone(), fmt_f64(p.similarity)]),
        ),
        None => {
            if matches_path.exists() {
                std::fs::remove_file(&matches_path)?;
            }
            let g = cfg.caliper_grid()?;
            Err(Error::SweepExhausted { start: g.start, stop: g.stop })
        }
    }
}

fn load_matches(ctx: &Context<'_>, s: &Study) -> Result<MatchSet> {
    let t = Table::read(&ctx.path(art::MATCHES), art::MATCHES_SRC)?;
    let summary: MatchSummary = read_json(&ctx.path(art::MATCH_SUMMARY), art::MATCHES_SRC)?;
    let row: std::collections::HashMap<&str, usize> = s.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let lookup = |id: &str| row.get(id).copied().ok_or_else(|| Error::invalid(format!("matched unit `{id}` is not in the cohort")));
    let sims = t.floats("similarity")?;
    let mut pairs = Vec::with_capacity(t.len());
    let mut matched = std::collections::HashSet::new();
    for ((tid, cid), sim) in t.strings("treated_id")?.into_iter().zip(t.strings("control_id")?).zip(sims) {
        let (ti, ci) = (lookup(tid)?, lookup(cid)?);
        if !s.treatment[ti] || s.treatment[ci] {
            return Err(Error::invalid(format!("pair ({tid}, {cid}) disagrees with cohort treatment labels")));
        }
        matched.insert(ti);
        pairs.push(MatchedPair { treated: ti, control: ci, treated_id: tid.into(), control_id: cid.into(), similarity: sim });
    }
    let unmatched_treated = (0..s.ids.len()).filter(|&i| s.treatment[i] && !matched.contains(&i)).map(|i| s.ids[i].clone()).collect();
    Ok(MatchSet { caliper: summary.caliper.unwrap_or(f64::NAN), pairs, unmatched_treated })
}

fn balance(ctx: &Context<'_>) -> Result<()> {
    art::require(&ctx.path(art::MATCHES), art::MATCHES_SRC)?;
    let s = load_study(ctx)?;
    let sel = load_selection(ctx, &s)?;
    let set = load_matches(ctx, &s)?;
    let report = balance_report(&set, &s.x, &s.treatment, &sel)?;
    write_table(
        &ctx.path(art::BALANCE),
        &["covariate", "smd_before", "smd_after", "balanced"],
        report.rows.iter().map(|r| vec![r.covariate.clone(), fmt_f64(r.smd_before), fmt_f64(r.smd_after), (r.balanced as u8).to_string()]),
    )
}

#[derive(Debug, Clone, Serialize)]
struct EffectReport {
    statistic: crate::diagnostics::EffectStatistic,
    estimate: f64,
    pairs: usize,
    distinct_controls: usize,
    caliper: f64,
    eate_percent: Option<f64>,
    absolute_mean_difference: f64,
    median_ratio: Option<MedianRatioEffect>,
    permutation: PermutationResult,
}

fn effect(ctx: &Context<'_>) -> Result<()> {
    art::require(&ctx.path(art::MATCHES), art::MATCHES_SRC)?;
    let d = &ctx.cfg.diagnostics;
    let s = load_study(ctx)?;
    let set = load_matches(ctx, &s)?;
    let estimate_value = estimate(&set, &s.outcomes, d.statistic)?;
    let permutation = permutation_test(&set, &s.outcomes, d.statistic, d.permutations, d.seed, d.mode)?;
    let report = EffectReport {
        statistic: d.statistic,
        estimate: estimate_value,
        pairs: set.len(),
        distinct_controls: set.distinct_controls(),
        caliper: set.caliper,
        eate_percent: eate(&set, &s.outcomes).ok(),
        absolute_mean_difference: absolute_mean_difference(&set, &s.outcomes)?,
        median_ratio: median_ratio_effect(&set.pairs, &s.outcomes).ok(),
        permutation,
    };
    write_json(&ctx.path(art::EFFECT), &report)
}

fn mediate(ctx: &Context<'_>) -> Result<()> {
    art::require(&ctx.path(art::MATCHES), art::MATCHES_SRC)?;
    let s = load_study(ctx)?;
    let set = load_matches(ctx, &s)?;
    let mut rows = Vec::new();
    for name in &ctx.cfg.mediation.mediators {
        let m = s.cohort.floats(name).map_err(|_| Error::Config(format!("mediator column `{name}` is not in the cohort table")))?;
        let r = mediation_on_matches(&set, &m, &s.outcomes, name)?;
        rows.push(vec![
            r.mediator,
            r.n.to_string(),
            fmt_f64(r.path_a),
            fmt_f64(r.se_a),
            fmt_f64(r.path_b),
            fmt_f64(r.se_b),
            fmt_f64(r.direct_effect),
            fmt_f64(r.total_effect),
            fmt_f64(r.indirect_effect),
            fmt_f64(r.sobel_z),
            fmt_f64(r.sobel_p),
            fmt_opt(r.proportion_mediated),
        ]);
    }
    write_table(
        &ctx.path(art::MEDIATION),
        &[
            "mediator",
            "n",
            "path_a",
            "se_a",
            "path_b",
            "se_b",
            "direct_effect",
            "total_effect",
            "indirect_effect",
            "sobel_z",
            "sobel_p",
            "proportion_mediated",
        ],
        rows,
    )
}

/// Writes a synthetic cohort and covariate matrix in place of the
/// `cohort` and `features` stages, plus the hidden ground truth.
pub fn synth(ctx: &Context<'_>, export_events: Option<&Path>) -> Result<()> {
    let cfg = ctx.cfg.synth.as_ref().ok_or_else(|| Error::Config("`synth` needs a [synth] section in the config".into()))?;
    let study = generate_study(cfg)?;
    let mut header = vec!["unit_id", "treatment", "outcome"];
    if study.comment_counts.is_some() {
        header.push("comment_count");
    }
    if study.mediator.is_some() {
        header.push("mediator");
    }
    write_table(
        &ctx.path(art::COHORT),
        &header,
        (0..study.len()).map(|i| {
            let mut row = vec![study.unit_ids[i].clone(), (study.treatment[i] as u8).to_string(), fmt_f64(study.outcomes[i])];
            if let Some(c) = &study.comment_counts {
                row.push(c[i].to_string());
            }
            if let Some(m) = &study.mediator {
                row.push(fmt_f64(m[i]));
            }
            row
        }),
    )?;
    let rows: Vec<Vec<f64>> = study.x.rows().map(<[f64]>::to_vec).collect();
    let cols = study.covariate_names.iter().map(|n| (n.clone(), FeatureKind::Covariate)).collect();
    let (schema, x) = standardize(study.unit_ids.clone(), cols, &rows)?;
    write_features(ctx, &schema, &x)?;
    write_json(&ctx.path(art::SYNTH_TRUTH), &serde_json::json!({ "config": cfg, "ground_truth": study.ground_truth }))?;
    if let Some(path) = export_events {
        let mut w = BufWriter::new(File::create(path)?);
        for rec in export_records(&study) {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(())
}
