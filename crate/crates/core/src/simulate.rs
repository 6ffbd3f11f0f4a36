//! Seeded synthetic populations driven through the full cycle loop.
//!
//! Random numbers come from PCG32 (XSH-RR, 64-bit state) seeded with
//! `seed_from_u64(seed)`; normals are `rand_distr::StandardNormal` scaled by
//! the relevant sd. Per respondent the draws happen in a fixed order:
//! straight-liner coin, four latent dimension scores, twelve item noises,
//! one overall noise. Draws are made even when an sd is zero so the stream
//! layout does not depend on the spec. Item ratings are clamped to the
//! scale and then rounded half away from zero; the overall rating likewise.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, StepClock};
use crate::error::{HillError, Result};
use crate::gate::{Decision, FlagKind, GatePolicy};
use crate::ingest::{Prototype, SurveyResponse};
use crate::instrument::{default_instrument, Dimension, Instrument, RatingScale};
use crate::model::{init_model, ModelMetrics, DEFAULT_FORGETTING, DEFAULT_RIDGE};

pub const SIM_ENGINEER: &str = "sim-engineer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n_respondents: usize,
    pub true_dimension_means: [f64; 4],
    pub dimension_sds: [f64; 4],
    /// Four composite weights, then the intercept.
    pub overall_weights: [f64; 5],
    pub drift_per_cycle: [f64; 4],
    pub straightliner_rate: f64,
    pub seed: u64,
    /// Per-item noise around the respondent's latent dimension score.
    #[serde(default = "default_item_noise")]
    pub item_noise_sd: f64,
    #[serde(default = "default_overall_noise")]
    pub overall_noise_sd: f64,
}

fn default_item_noise() -> f64 {
    0.6
}

fn default_overall_noise() -> f64 {
    0.5
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            n_respondents: 200,
            true_dimension_means: [4.2, 4.8, 3.6, 5.0],
            dimension_sds: [0.9; 4],
            overall_weights: [0.5, 0.3, 0.6, 0.4, -3.0],
            drift_per_cycle: [0.0; 4],
            straightliner_rate: 0.1,
            seed: 1,
            item_noise_sd: default_item_noise(),
            overall_noise_sd: default_overall_noise(),
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HillError::InvalidSpec(m));
        if self.n_respondents == 0 {
            return bad("n_respondents must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.straightliner_rate) {
            return bad(format!("straightliner_rate {} outside [0, 1]", self.straightliner_rate));
        }
        if self.dimension_sds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("dimension_sds must be positive".into());
        }
        for (name, v) in [("item_noise_sd", self.item_noise_sd), ("overall_noise_sd", self.overall_noise_sd)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative"));
            }
        }
        let finite = self
            .true_dimension_means
            .iter()
            .chain(&self.overall_weights)
            .chain(&self.drift_per_cycle)
            .all(|v| v.is_finite());
        if !finite {
            return bad("means, weights and drift must be finite".into());
        }
        Ok(())
    }

    /// Overall rating before noise, clamping and rounding. Raters judge each
    /// dimension against a reference that moves with the population drift,
    /// so with drift the composite-to-overall relation itself shifts.
    pub fn expected_overall(&self, composites: &[f64; 4], cycle_index: usize) -> f64 {
        let w = &self.overall_weights;
        let t = cycle_index as f64;
        w[4] + (0..4)
            .map(|d| w[d] * (composites[d] - self.drift_per_cycle[d] * t))
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub forgetting: f64,
    pub ridge: f64,
    pub policy: GatePolicy,
    /// Story points per sprint; one story per dimension is drafted each cycle.
    pub capacity: i64,
    pub story_points: [i64; 4],
    pub start: NaiveDate,
    pub timebox_days: i64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            forgetting: DEFAULT_FORGETTING,
            ridge: DEFAULT_RIDGE,
            policy: GatePolicy::default(),
            capacity: 8,
            story_points: [3, 5, 2, 3],
            start: NaiveDate::from_ymd_opt(2026, 1, 5).expect("valid date"),
            timebox_days: 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RespondentKind {
    Honest,
    Straightliner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle_id: String,
    pub metrics: ModelMetrics,
    pub model_version: u64,
    pub responses: usize,
    pub straightliners: usize,
    pub flagged: usize,
    pub honest_flagged: usize,
    pub rejected: usize,
}

/// Generated responses (as submitted, before screening) and who was who.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDataset {
    pub responses: Vec<SurveyResponse>,
    pub truth: BTreeMap<String, RespondentKind>,
}

#[derive(Debug)]
pub struct Simulation {
    pub dataset: SimDataset,
    pub reports: Vec<CycleReport>,
    pub engine: Engine,
}

fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

fn rating(x: f64, scale: RatingScale) -> i64 {
    round_half_away(x.clamp(scale.min as f64, scale.max as f64))
}

fn normal(rng: &mut Pcg32) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws one cycle's responses. `rng` carries over between cycles.
pub fn generate_cycle(
    spec: &PopulationSpec,
    instrument: &Instrument,
    cycle_index: usize,
    cycle_id: &str,
    prototype_id: &str,
    start: NaiveDate,
    rng: &mut Pcg32,
) -> Vec<(SurveyResponse, RespondentKind)> {
    let scale = instrument.scale();
    let t = cycle_index as f64;
    let base = Utc.from_utc_datetime(&start.and_time(NaiveTime::from_hms_opt(9, 0, 0).expect("valid time")));
    let mut out = Vec::with_capacity(spec.n_respondents);
    for i in 0..spec.n_respondents {
        let straight = rng.random::<f64>() < spec.straightliner_rate;
        let latent: [f64; 4] = std::array::from_fn(|d| {
            spec.true_dimension_means[d] + spec.drift_per_cycle[d] * t + spec.dimension_sds[d] * normal(rng)
        });
        let mut ratings = BTreeMap::new();
        let mut sums = [0.0; 4];
        for d in Dimension::ALL {
            for item in instrument.items_of(d) {
                let noise = spec.item_noise_sd * normal(rng);
                let r = if straight {
                    scale.max
                } else {
                    rating(latent[d.index()] + noise, scale)
                };
                sums[d.index()] += r as f64;
                ratings.insert(item.clone(), r);
            }
        }
        let noise = spec.overall_noise_sd * normal(rng);
        let composites = sums.map(|s| s / 3.0);
        let overall = if straight {
            scale.max
        } else {
            rating(spec.expected_overall(&composites, cycle_index) + noise, scale)
        };
        let response = SurveyResponse {
            response_id: format!("{cycle_id}-r{i:04}"),
            respondent_id: format!("u{i:04}"),
            prototype_id: prototype_id.to_string(),
            cycle_id: cycle_id.to_string(),
            submitted_at: base + Duration::minutes(i as i64),
            ratings,
            overall,
            comments: Vec::new(),
            status: crate::ingest::ResponseStatus::Pending,
            flags: Vec::new(),
        };
        let kind = if straight {
            RespondentKind::Straightliner
        } else {
            RespondentKind::Honest
        };
        out.push((response, kind));
    }
    out
}

/// Runs `n_cycles` full cycles: ingest, screen, a simulated engineer who
/// rejects straight-line flags and accepts everything else, story drafting,
/// and the cycle pipeline.
pub fn simulate(spec: &PopulationSpec, n_cycles: usize, options: &SimulationOptions) -> Result<Simulation> {
    spec.validate()?;
    if n_cycles == 0 {
        return Err(HillError::InvalidSpec("n_cycles must be positive".into()));
    }
    let instrument = default_instrument();
    let model = init_model(options.ridge, options.forgetting)?;
    let clock_start = Utc.from_utc_datetime(&options.start.and_time(NaiveTime::MIN));
    let clock = StepClock::new(clock_start, Duration::seconds(1));
    let mut engine = Engine::create(instrument.clone(), model, Box::new(clock), None)?;
    engine.config.policy = options.policy.clone();

    let mut rng = Pcg32::seed_from_u64(spec.seed);
    let mut dataset = SimDataset {
        responses: Vec::new(),
        truth: BTreeMap::new(),
    };
    let mut reports = Vec::with_capacity(n_cycles);
    for c in 0..n_cycles {
        let cycle_id = format!("c{}", c + 1);
        let prototype_id = format!("{cycle_id}-p1");
        let start = options.start + Duration::days(options.timebox_days * c as i64);
        engine.create_cycle(&cycle_id, start, options.timebox_days)?;
        engine.register_prototype(Prototype {
            prototype_id: prototype_id.clone(),
            cycle_id: cycle_id.clone(),
            title: format!("Prototype for {cycle_id}"),
            display_assets: Vec::new(),
        })?;
        engine.advance_cycle(&cycle_id)?;
        engine.advance_cycle(&cycle_id)?;

        let generated = generate_cycle(spec, &instrument, c, &cycle_id, &prototype_id, start, &mut rng);
        let docs: Vec<String> = generated
            .iter()
            .map(|(r, _)| serde_json::to_string(&r.to_document()).expect("response serializes"))
            .collect();
        let report = engine.ingest_responses(&cycle_id, &docs)?;
        if let Some(e) = report.errors.first() {
            return Err(e.cause.clone());
        }
        let straightliners = generated
            .iter()
            .filter(|(_, k)| *k == RespondentKind::Straightliner)
            .count();
        for (r, k) in generated {
            dataset.truth.insert(r.response_id.clone(), k);
            dataset.responses.push(r);
        }

        engine.enqueue_flagged(&cycle_id, &options.policy)?;
        let queue: Vec<_> = engine
            .review_queue()
            .into_iter()
            .filter(|i| i.cycle_id == cycle_id)
            .collect();
        let mut flagged = 0;
        let mut honest_flagged = 0;
        let mut rejected = 0;
        for item in &queue {
            if !item.flags.is_empty() {
                flagged += 1;
                if dataset.truth[&item.response_id] == RespondentKind::Honest {
                    honest_flagged += 1;
                }
            }
            let decision = if item.flags.iter().any(|f| f.kind == FlagKind::Straightline) {
                rejected += 1;
                Decision::Reject
            } else {
                Decision::Accept
            };
            engine.review_decision(&item.response_id, decision, SIM_ENGINEER)?;
        }

        for (d, points) in Dimension::ALL.iter().zip(options.story_points) {
            let story = engine.draft_story(
                &cycle_id,
                *d,
                &format!("As a user, I want a better {d} experience"),
                vec![format!("{d} composite improves next cycle")],
                Vec::new(),
            )?;
            engine.estimate_story(story.story_id, points)?;
        }

        let out = engine.run_cycle_pipeline(&cycle_id, options.capacity)?;
        reports.push(CycleReport {
            cycle_id: cycle_id.clone(),
            metrics: out.metrics,
            model_version: engine.model().version,
            responses: spec.n_respondents,
            straightliners,
            flagged,
            honest_flagged,
            rejected,
        });
    }
    Ok(Simulation {
        dataset,
        reports,
        engine,
    })
}

/// Continuous item data with a planted simple structure: each item is
/// `loading·f + sqrt(1 − loading²)·e` for its dimension's factor `f`, with
/// independent standard normal factors and noise, so every item has unit
/// variance and the given loading. Columns are in instrument order.
pub fn planted_factor_data(n: usize, loading: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(loading > 0.0 && loading < 1.0) {
        return Err(HillError::InvalidSpec(format!("loading {loading} outside (0, 1)")));
    }
    let mut rng = Pcg32::seed_from_u64(seed);
    let unique = (1.0 - loading * loading).sqrt();
    let p = Dimension::ALL.len() * crate::instrument::ITEMS_PER_DIMENSION;
    let mut data = DMatrix::zeros(n, p);
    for i in 0..n {
        let factors: [f64; 4] = std::array::from_fn(|_| normal(&mut rng));
        for j in 0..p {
            let d = j / crate::instrument::ITEMS_PER_DIMENSION;
            data[(i, j)] = loading * factors[d] + unique * normal(&mut rng);
        }
    }
    Ok(data)
}
