use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graftsurv::coxnet::{fit_coxnet, fit_coxnet_traced, CoxnetConfig};
use graftsurv::ensemble::{bootstrap_indices, fit_gb, fit_rsf, GbConfig, RsfConfig};
use graftsurv::eval::{bonferroni, c_index};
use graftsurv::features::{
    active_pairs, encode, encode_types_binary, encode_types_target, fit_encoder, fit_target_encoding, EncoderRequest,
    FeatureMatrix, FeatureSet, TargetMode,
};
use graftsurv::hla::{
    expand, expand_locus, mismatch_count, parse_antigen, total_mismatch, BroadSplitTable, HlaAntigen, HlaProfile, Locus,
};
use graftsurv::record::{Person, PostTransplant, Race, Sex, TransplantRecord};
use graftsurv::survival::{kaplan_meier, make_splits, nelson_aalen, SurvivalDataset, SurvivalTarget};

const A: [&str; 12] = ["A1", "A2", "A3", "A9", "A23", "A24", "A10", "A25", "A26", "A11", "A19", "A30"];
const B: [&str; 10] = ["B7", "B8", "B5", "B51", "B52", "B12", "B44", "B45", "B35", "B62"];
const DR: [&str; 10] = ["DR1", "DR4", "DR2", "DR15", "DR16", "DR3", "DR17", "DR5", "DR11", "DR7"];

fn antigen(pool: &'static [&'static str]) -> impl Strategy<Value = HlaAntigen> {
    (0..pool.len()).prop_map(move |i| parse_antigen(pool[i]).unwrap())
}

fn profile() -> impl Strategy<Value = HlaProfile> {
    (antigen(&A), antigen(&A), antigen(&B), antigen(&B), antigen(&DR), antigen(&DR))
        .prop_map(|(a1, a2, b1, b2, d1, d2)| HlaProfile::new([a1, a2], [b1, b2], [d1, d2]).unwrap())
}

fn swap_slots(p: &HlaProfile) -> HlaProfile {
    let flip = |l: Locus| {
        let s = p.locus(l);
        [s[1], s[0]]
    };
    HlaProfile::new(flip(Locus::A), flip(Locus::B), flip(Locus::DR)).unwrap()
}

fn targets(max_n: usize) -> impl Strategy<Value = Vec<SurvivalTarget>> {
    prop::collection::vec((1u32..30, any::<bool>()), 2..max_n)
        .prop_map(|v| v.into_iter().map(|(t, e)| SurvivalTarget { time: t as f64, event: e }).collect())
}

fn person(age: f64, bmi: f64, male: bool) -> Person {
    Person { age, sex: if male { Sex::Male } else { Sex::Female }, race: Race::White, bmi }
}

fn records() -> impl Strategy<Value = Vec<TransplantRecord>> {
    prop::collection::vec((profile(), profile(), 18.0..80.0f64, 18.0..40.0f64, 1u32..5000, any::<bool>()), 3..25)
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (d, r, age, bmi, t, e))| TransplantRecord {
                    id: format!("r{i}"),
                    donor_hla: d,
                    recipient_hla: r,
                    donor: person(age, bmi, i % 2 == 0),
                    recipient: person(80.0 - age * 0.5, 60.0 - bmi, i % 3 == 0),
                    post: Some(PostTransplant {
                        donor_creatinine: 1.0 + i as f64 * 0.1,
                        recipient_creatinine_tx: 6.0,
                        recipient_creatinine_discharge: 2.0,
                        dialysis_first_week: i % 4 == 0,
                        cold_ischemia_time: (i % 5 != 0).then_some(12.0 + i as f64),
                    }),
                    registry: None,
                    target: SurvivalTarget { time: t as f64, event: e },
                })
                .collect()
        })
}

fn table() -> BroadSplitTable {
    BroadSplitTable::standard()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_is_idempotent(a in antigen(&A)) {
        let t = table();
        let once = expand(a, &t);
        let twice: BTreeSet<HlaAntigen> = once.iter().flat_map(|x| expand(*x, &t)).collect();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn mismatch_bounds_and_slot_order(d in profile(), r in profile()) {
        let t = table();
        let total = total_mismatch(&d, &r, &t);
        prop_assert!(total <= 6);
        let mut sum = 0;
        for l in Locus::ALL {
            let m = mismatch_count(&d, &r, &t, l);
            prop_assert!(m <= 2);
            prop_assert_eq!(m, mismatch_count(&swap_slots(&d), &swap_slots(&r), &t, l));
            sum += m;
        }
        prop_assert_eq!(sum, total);
    }

    #[test]
    fn recipient_only_antigens_never_raise_mismatch(d in profile(), r in profile()) {
        let t = table();
        // a recipient carrying the donor's first slot at every locus can only match more
        let covered = HlaProfile::new(
            [d.locus(Locus::A)[0], r.locus(Locus::A)[1]],
            [d.locus(Locus::B)[0], r.locus(Locus::B)[1]],
            [d.locus(Locus::DR)[0], r.locus(Locus::DR)[1]],
        ).unwrap();
        for l in Locus::ALL {
            prop_assert!(mismatch_count(&d, &covered, &t, l) <= 1);
            prop_assert_eq!(mismatch_count(&d, &d, &t, l), 0);
        }
    }

    #[test]
    fn contained_donor_locus_has_no_mismatch(d in profile(), r in profile()) {
        let t = table();
        for l in Locus::ALL {
            if expand_locus(&d, &t, l).is_subset(&expand_locus(&r, &t, l)) {
                prop_assert_eq!(mismatch_count(&d, &r, &t, l), 0);
            }
        }
    }

    #[test]
    fn matched_locus_has_no_cross_pairs(d in profile(), r in profile()) {
        let t = table();
        let pairs = active_pairs(&d, &r, &t);
        for l in Locus::ALL {
            if mismatch_count(&d, &r, &t, l) == 0 {
                for p in pairs.iter().filter(|p| p.donor.locus == l) {
                    prop_assert!(expand(p.donor, &t).contains(&p.recipient), "cross pair {p}");
                }
            }
        }
        prop_assert!(pairs.iter().all(|p| p.donor.locus == p.recipient.locus));
    }

    #[test]
    fn binary_type_rows_cover_every_slot(recs in records()) {
        let t = table();
        let plan = fit_encoder(&recs, EncoderRequest::new(FeatureSet::TypesBinary, false), &t).unwrap();
        for rec in &recs {
            let ones: f64 = encode_types_binary(rec, &plan, &t).iter().sum();
            let homozygous = Locus::ALL
                .iter()
                .map(|&l| rec.donor_hla.is_homozygous(l) as usize + rec.recipient_hla.is_homozygous(l) as usize)
                .sum::<usize>();
            prop_assert!(ones >= (12 - homozygous) as f64);
        }
    }

    #[test]
    fn encodes_are_finite_unique_and_stable(recs in records(), which in 0usize..8, post in any::<bool>()) {
        let t = table();
        let sets = [
            FeatureSet::Basic, FeatureSet::MmTotal, FeatureSet::MmAbdr, FeatureSet::TypesBinary,
            FeatureSet::TypesTarget(TargetMode::Regression), FeatureSet::Pairs, FeatureSet::FreqPairs, FeatureSet::All,
        ];
        let request = EncoderRequest { frequent_pair_threshold: 3, ..EncoderRequest::new(sets[which], post) };
        let plan = fit_encoder(&recs, request, &t).unwrap();
        let names: BTreeSet<&String> = plan.columns().iter().collect();
        prop_assert_eq!(names.len(), plan.n_columns());
        let m1 = encode(&recs, &plan, &t).unwrap();
        let m2 = encode(&recs, &plan, &t).unwrap();
        prop_assert_eq!(m1.column_names(), plan.columns());
        prop_assert!(m1.rows().flatten().all(|v| v.is_finite()));
        prop_assert_eq!(&m1, &m2);
        // a row's encoding does not depend on which other rows are encoded with it
        let single = encode(&recs[1..2], &plan, &t).unwrap();
        prop_assert_eq!(single.row(0), m1.row(1));
    }

    #[test]
    fn target_maps_stay_in_range(recs in records(), years in 1.0..10.0f64) {
        let reg = fit_target_encoding(&recs, TargetMode::Regression).unwrap();
        prop_assert!(reg.values.values().all(|v| v.is_finite() && *v >= 0.0));
        let mean = recs.iter().map(|r| r.target.time).sum::<f64>() / recs.len() as f64;
        prop_assert!((reg.fallback - mean).abs() <= 1e-9 * mean);
        if let Ok(cls) = fit_target_encoding(&recs, TargetMode::ClassificationYears(years)) {
            prop_assert!(cls.values.values().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((0.0..=1.0).contains(&cls.fallback));
        }
        let mut flipped = recs[0].clone();
        flipped.donor_hla = swap_slots(&flipped.donor_hla);
        flipped.recipient_hla = swap_slots(&flipped.recipient_hla);
        prop_assert_eq!(encode_types_target(&recs[0], &reg), encode_types_target(&flipped, &reg));
    }

    #[test]
    fn km_and_na_are_monotone(ts in targets(60)) {
        let km = kaplan_meier(&ts);
        let na = nelson_aalen(&ts);
        prop_assert!(km.values().windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(na.values().windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(km.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn km_without_censoring_is_empirical(times in prop::collection::vec(1u32..30, 1..60)) {
        let ts: Vec<SurvivalTarget> = times.iter().map(|&t| SurvivalTarget::event(t as f64)).collect();
        let km = kaplan_meier(&ts);
        for q in 0..32 {
            let q = q as f64;
            let empirical = times.iter().filter(|&&t| t as f64 > q).count() as f64 / times.len() as f64;
            prop_assert!((km.eval(q) - empirical).abs() <= 1e-12);
        }
    }

    #[test]
    fn nelson_aalen_bounds_km_without_ties(times in prop::collection::btree_set(1u32..500, 2..50), events in prop::collection::vec(any::<bool>(), 50)) {
        let ts: Vec<SurvivalTarget> = times.iter().zip(&events).map(|(&t, &e)| SurvivalTarget { time: t as f64, event: e }).collect();
        let km = kaplan_meier(&ts);
        let na = nelson_aalen(&ts);
        for t in ts.iter().filter(|t| t.event) {
            prop_assert!((-na.eval(t.time)).exp() >= km.eval(t.time) - 1e-12);
        }
    }

    #[test]
    fn splits_partition_rows(n in 10usize..400, seed in any::<u64>()) {
        for plan in make_splits(n, 3, seed).unwrap() {
            let mut all: Vec<usize> = plan.train_idx.iter().chain(&plan.valid_idx).chain(&plan.test_idx).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!((plan.train_idx.len() as f64 - 0.6 * n as f64).abs() <= 1.0);
            prop_assert!((plan.valid_idx.len() as f64 - 0.2 * n as f64).abs() <= 1.0);
            prop_assert!((plan.test_idx.len() as f64 - 0.2 * n as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn c_index_order_properties(ts in targets(80), skew in 0.1..3.0f64) {
        let risks: Vec<f64> = (0..ts.len()).map(|i| ((i * 7919) % 101) as f64 + i as f64 * 1e-3).collect();
        let Ok(base) = c_index(&risks, &ts) else { return Ok(()) };
        let transformed: Vec<f64> = risks.iter().map(|r| (skew * r).exp() + r).collect();
        prop_assert_eq!(c_index(&transformed, &ts).unwrap().value, base.value);
        let negated: Vec<f64> = risks.iter().map(|r| -r).collect();
        prop_assert!((c_index(&negated, &ts).unwrap().value + base.value - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bonferroni_is_capped_and_monotone(p in 0.0..1.0f64, q in 0.0..1.0f64, m in 0usize..20) {
        prop_assert!(bonferroni(p, m) <= 1.0);
        prop_assert!(bonferroni(p, m) >= p);
        if p <= q {
            prop_assert!(bonferroni(p, m) <= bonferroni(q, m));
        }
    }

    #[test]
    fn bootstrap_draws_n_in_range(n in 1usize..500, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = bootstrap_indices(n, &mut rng);
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.iter().all(|&i| i < n));
    }
}

fn small_dataset(seed: u64, n: usize, p: usize) -> SurvivalDataset {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let targets = rows
        .iter()
        .map(|r| {
            let t = (rng.random_range(1.0..100.0f64) * (-r[0]).exp()).ceil();
            SurvivalTarget { time: t, event: rng.random_bool(0.6) }
        })
        .collect();
    let names = (0..p).map(|j| format!("x{j}")).collect();
    SurvivalDataset::from_parts(FeatureMatrix::from_rows(names, &rows).unwrap(), targets).unwrap()
}

#[test]
fn coxnet_objective_never_increases() {
    for seed in 0..10 {
        let data = small_dataset(seed, 150, 6);
        for (lambda, r) in [(1e-3, 0.1), (1e-2, 0.5), (0.05, 1.0)] {
            let (_, trace) = fit_coxnet_traced(&data, &CoxnetConfig::new(lambda, r)).unwrap();
            for w in trace.objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "objective rose {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn unpenalized_risk_order_survives_affine_rescaling() {
    for seed in 0..5 {
        let data = small_dataset(seed + 100, 120, 3);
        let cfg = CoxnetConfig { max_iter: 500, ..CoxnetConfig::new(0.0, 0.5) };
        let base = fit_coxnet(&data, &cfg).unwrap();
        let rows: Vec<Vec<f64>> = data.features.rows().map(|r| vec![r[0], 40.0 * r[1] - 7.0, r[2]]).collect();
        let scaled = SurvivalDataset::from_parts(
            FeatureMatrix::from_rows(data.features.column_names().to_vec(), &rows).unwrap(),
            data.targets.clone(),
        )
        .unwrap();
        let refit = fit_coxnet(&scaled, &cfg).unwrap();
        let c0 = c_index(&base.predict_risk(&data.features).unwrap(), &data.targets).unwrap();
        let c1 = c_index(&refit.predict_risk(&scaled.features).unwrap(), &data.targets).unwrap();
        assert!((c0.value - c1.value).abs() < 1e-9, "{} vs {}", c0.value, c1.value);
        assert!((refit.coefficients[1] * 40.0 - base.coefficients[1]).abs() < 1e-5);
    }
}

#[test]
fn forests_and_boosting_are_reproducible() {
    let data = small_dataset(7, 200, 4);
    let rsf = RsfConfig { n_trees: 30, seed: 3, ..RsfConfig::default() };
    let a = fit_rsf(&data, &rsf).unwrap().predict_risk(&data.features).unwrap();
    let b = fit_rsf(&data, &rsf).unwrap().predict_risk(&data.features).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let gb = GbConfig { n_trees: 30, seed: 3, ..GbConfig::default() };
    let a = fit_gb(&data, &gb).unwrap().predict_risk(&data.features).unwrap();
    let b = fit_gb(&data, &gb).unwrap().predict_risk(&data.features).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn full_sample_boosting_loss_is_non_increasing() {
    for seed in 0..5 {
        let data = small_dataset(seed + 20, 150, 4);
        let cfg = GbConfig { n_trees: 40, subsample: 1.0, learning_rate: 0.01, max_depth: 2, seed };
        let model = fit_gb(&data, &cfg).unwrap();
        assert_eq!(model.train_loss.len(), 41);
        for w in model.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss rose {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn forest_hazard_is_mean_of_tree_hazards() {
    let data = small_dataset(11, 180, 3);
    let model = fit_rsf(&data, &RsfConfig { n_trees: 25, max_depth: 4, seed: 1, ..RsfConfig::default() }).unwrap();
    for q in [0.5, 3.0, 17.0, 42.5, 99.0, 400.0] {
        let got = model.cumulative_hazard(&data.features, q).unwrap();
        for (i, x) in data.features.rows().enumerate() {
            let mean = model.trees.iter().map(|t| t.leaf_for(x).0.eval(q)).sum::<f64>() / model.trees.len() as f64;
            assert!((got[i] - mean).abs() <= 1e-12);
        }
    }
}
