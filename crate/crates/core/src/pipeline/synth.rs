//! Synthetic transplant cohorts with a controllable mismatch effect.
//!
//! Event times are Weibull with proportional hazards:
//! `T = scale * (E * exp(-lp))^(1 / shape)` with `E ~ Exp(1)` and `lp` the
//! mismatch term plus covariate effects, centred on its sample mean.
//! Censoring is an independent exponential whose rate is calibrated by
//! bisection so the expected censored fraction matches `censor_rate`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Normal};

use crate::error::{Error, Result};
use crate::hla::{total_mismatch, BroadSplitTable, HlaAntigen, HlaProfile, Locus};
use crate::record::{Person, PostTransplant, Race, RegistryInfo, Sex, TransplantRecord};
use crate::survival::SurvivalTarget;

/// Covariates accepted in `covariate_effect_sizes`, each a log-hazard per unit.
pub const EFFECT_KEYS: [&str; 8] =
    ["don_age", "rec_age", "don_bmi", "rec_bmi", "rec_black", "dialysis_wk1", "don_creat", "cit_hours"];

const DEFAULT_A: [&str; 12] = ["A2", "A1", "A3", "A24", "A11", "A9", "A23", "A26", "A29", "A30", "A68", "A25"];
const DEFAULT_B: [&str; 16] = [
    "B44", "B7", "B8", "B35", "B51", "B12", "B18", "B62", "B60", "B27", "B57", "B13", "B45", "B39", "B52", "B37",
];
const DEFAULT_DR: [&str; 10] = ["DR4", "DR15", "DR7", "DR1", "DR13", "DR11", "DR17", "DR2", "DR8", "DR16"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_records: usize,
    pub seed: u64,
    pub antigen_freq_table: BTreeMap<Locus, Vec<(HlaAntigen, f64)>>,
    /// Log-hazard per total mismatch.
    pub mm_log_hazard: f64,
    pub baseline_shape: f64,
    /// Days.
    pub baseline_scale: f64,
    pub censor_rate: f64,
    pub covariate_effect_sizes: BTreeMap<String, f64>,
}

/// Zipf-like weights `1 / rank^0.8`, normalized.
pub fn zipf_table(names: &[&str]) -> Vec<(HlaAntigen, f64)> {
    let raw: Vec<f64> = (1..=names.len()).map(|r| (r as f64).powf(-0.8)).collect();
    let total: f64 = raw.iter().sum();
    names
        .iter()
        .zip(raw)
        .map(|(n, w)| (n.parse().expect("built-in antigen names parse"), w / total))
        .collect()
}

pub fn default_antigen_table() -> BTreeMap<Locus, Vec<(HlaAntigen, f64)>> {
    BTreeMap::from([
        (Locus::A, zipf_table(&DEFAULT_A)),
        (Locus::B, zipf_table(&DEFAULT_B)),
        (Locus::DR, zipf_table(&DEFAULT_DR)),
    ])
}

pub fn default_effects() -> BTreeMap<String, f64> {
    [
        ("don_age", 0.015),
        ("rec_age", -0.01),
        ("don_bmi", 0.0),
        ("rec_bmi", 0.02),
        ("rec_black", 0.25),
        ("dialysis_wk1", 0.4),
        ("don_creat", 0.1),
        ("cit_hours", 0.01),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_records: 5000,
            seed: 0,
            antigen_freq_table: default_antigen_table(),
            mm_log_hazard: 0.15,
            baseline_shape: 1.1,
            baseline_scale: 6000.0,
            censor_rate: 0.746,
            covariate_effect_sizes: default_effects(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::InvalidInput("n_records must be positive".into()));
        }
        for locus in Locus::ALL {
            let entries = self
                .antigen_freq_table
                .get(&locus)
                .filter(|e| !e.is_empty())
                .ok_or_else(|| Error::InvalidInput(format!("antigen frequency table has no {locus} entries")))?;
            let mut sum = 0.0;
            for (a, p) in entries {
                if a.locus != locus {
                    return Err(Error::InvalidInput(format!("antigen {a} listed under locus {locus}")));
                }
                if !(p.is_finite() && *p >= 0.0) {
                    return Err(Error::InvalidInput(format!("antigen {a} has invalid frequency {p}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("{locus} frequencies sum to {sum}, not 1")));
            }
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(Error::InvalidInput(format!("censor_rate must lie in [0, 1), got {}", self.censor_rate)));
        }
        if !(self.baseline_shape > 0.0 && self.baseline_scale > 0.0) {
            return Err(Error::InvalidInput("Weibull shape and scale must be positive".into()));
        }
        if !self.mm_log_hazard.is_finite() {
            return Err(Error::InvalidInput("mm_log_hazard must be finite".into()));
        }
        for (k, v) in &self.covariate_effect_sizes {
            if !EFFECT_KEYS.contains(&k.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "unknown covariate effect `{k}` (known: {})",
                    EFFECT_KEYS.join(", ")
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("covariate effect `{k}` is not finite")));
            }
        }
        Ok(())
    }

    fn effect(&self, key: &str) -> f64 {
        self.covariate_effect_sizes.get(key).copied().unwrap_or(0.0)
    }
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn draw_profile<R: Rng>(rng: &mut R, samplers: &[(Vec<HlaAntigen>, WeightedIndex<f64>)]) -> HlaProfile {
    let mut slot = |i: usize| {
        let (names, w) = &samplers[i];
        [names[w.sample(rng)], names[w.sample(rng)]]
    };
    let (a, b, dr) = (slot(0), slot(1), slot(2));
    HlaProfile::new(a, b, dr).expect("loci are consistent by construction")
}

fn draw_person<R: Rng>(rng: &mut R, age: Normal<f64>, age_range: (f64, f64), race: &WeightedIndex<f64>) -> Person {
    let bmi: Normal<f64> = Normal::new(27.0, 5.0).unwrap();
    Person {
        age: age.sample(rng).clamp(age_range.0, age_range.1).round(),
        sex: if rng.random_bool(0.6) { Sex::Male } else { Sex::Female },
        race: Race::ALL[race.sample(rng)],
        bmi: round_to(bmi.sample(rng).clamp(15.0, 50.0), 0.1),
    }
}

fn lognormal<R: Rng>(rng: &mut R, median: f64, sigma: f64) -> f64 {
    let z: f64 = Normal::new(0.0, sigma).unwrap().sample(rng);
    round_to(median * z.exp(), 0.01)
}

/// Exponential censoring rate whose expected censored fraction over the
/// given event times equals `target`.
fn calibrate_censoring(event_times: &[f64], target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let frac = |rate: f64| event_times.iter().map(|t| -(-rate * t).exp_m1()).sum::<f64>() / event_times.len() as f64;
    let mut lo = -40.0f64;
    let mut hi = 10.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

pub fn synthesize(config: &SynthConfig, table: &BroadSplitTable) -> Result<Vec<TransplantRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samplers = Vec::new();
    for locus in Locus::ALL {
        let entries = &config.antigen_freq_table[&locus];
        let w = WeightedIndex::new(entries.iter().map(|e| e.1))
            .map_err(|e| Error::InvalidInput(format!("{locus} frequency table: {e}")))?;
        samplers.push((entries.iter().map(|e| e.0).collect::<Vec<_>>(), w));
    }
    let race = WeightedIndex::new([0.55, 0.25, 0.12, 0.05, 0.03]).unwrap();
    let don_age = Normal::new(42.0, 15.0).unwrap();
    let rec_age = Normal::new(52.0, 13.0).unwrap();
    let cit: Normal<f64> = Normal::new(18.0, 7.0).unwrap();

    let n = config.n_records;
    let mut records = Vec::with_capacity(n);
    let mut lp = Vec::with_capacity(n);
    for i in 0..n {
        let donor_hla = draw_profile(&mut rng, &samplers);
        let recipient_hla = draw_profile(&mut rng, &samplers);
        let donor = draw_person(&mut rng, don_age, (1.0, 80.0), &race);
        let recipient = draw_person(&mut rng, rec_age, (18.0, 85.0), &race);
        let cit_hours = round_to(cit.sample(&mut rng).clamp(1.0, 48.0), 0.1);
        let post = PostTransplant {
            donor_creatinine: lognormal(&mut rng, 1.0, 0.4),
            recipient_creatinine_tx: lognormal(&mut rng, 7.0, 0.35),
            recipient_creatinine_discharge: lognormal(&mut rng, 2.5, 0.5),
            dialysis_first_week: rng.random_bool(0.22),
            cold_ischemia_time: if rng.random_bool(0.1) { None } else { Some(cit_hours) },
        };
        let registry = RegistryInfo {
            tx_year: rng.random_range(2000..=2016),
            peak_pra: rng.random_range(0..80) as f64,
            deceased_donor: true,
            prior_transplants: 0,
        };
        let mm = total_mismatch(&donor_hla, &recipient_hla, table) as f64;
        let eta = config.mm_log_hazard * mm
            + config.effect("don_age") * donor.age
            + config.effect("rec_age") * recipient.age
            + config.effect("don_bmi") * donor.bmi
            + config.effect("rec_bmi") * recipient.bmi
            + config.effect("rec_black") * (recipient.race == Race::Black) as u8 as f64
            + config.effect("dialysis_wk1") * post.dialysis_first_week as u8 as f64
            + config.effect("don_creat") * post.donor_creatinine
            + config.effect("cit_hours") * cit_hours;
        lp.push(eta);
        records.push(TransplantRecord {
            id: format!("s{i:06}"),
            donor_hla,
            recipient_hla,
            donor,
            recipient,
            post: Some(post),
            registry: Some(registry),
            target: SurvivalTarget::event(1.0),
        });
    }
    let mean_lp = lp.iter().sum::<f64>() / n as f64;
    let event_times: Vec<f64> = lp
        .iter()
        .map(|eta| {
            let e: f64 = rng.sample(Exp1);
            config.baseline_scale * (e * (mean_lp - eta).exp()).powf(1.0 / config.baseline_shape)
        })
        .collect();
    let rate = calibrate_censoring(&event_times, config.censor_rate);
    for (rec, &t) in records.iter_mut().zip(&event_times) {
        let c = if rate > 0.0 { rng.sample::<f64, _>(Exp1) / rate } else { f64::INFINITY };
        let observed = t.min(c).ceil().max(1.0);
        rec.target = SurvivalTarget::new(observed, t <= c)?;
    }
    Ok(records)
}
