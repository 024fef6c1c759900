use selfalign::backend::{ScriptedBackend, ScriptedRule};
use selfalign::chrf::{ChrfConfig, ChrfIndex};
use selfalign::demo::{shuffle_demos, SelectionStrategy};
use selfalign::eval::{Classification, EvalSettings, Harness, Seeds};
use selfalign::probe_data::{load_probes, load_survey, MajorityTable, ProbeSet};
use selfalign::prompt::{InstructionCatalog, PromptMode};
use selfalign::backend::BackendParams;
use std::path::PathBuf;

struct Data {
    probes: ProbeSet,
    majorities: MajorityTable,
    catalog: InstructionCatalog,
    chrf: ChrfIndex,
}

fn data() -> Data {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/demo");
    let probes = load_probes(&dir.join("probes.jsonl")).unwrap();
    let survey = load_survey(&dir.join("survey.jsonl")).unwrap();
    let majorities = MajorityTable::resolve(probes.iter(), &survey, "United States").unwrap();
    let chrf = ChrfIndex::build(probes.iter(), ChrfConfig::default()).unwrap();
    Data { probes, majorities, catalog: InstructionCatalog::default(), chrf }
}

fn harness(d: &Data, parallelism: usize) -> Harness<'_> {
    Harness {
        probes: &d.probes,
        majorities: &d.majorities,
        catalog: &d.catalog,
        chrf: &d.chrf,
        settings: EvalSettings {
            language: "en".into(),
            country: "United States".into(),
            strategy: SelectionStrategy::ChrfAcrossCategories,
            k: 5,
            mode: PromptMode::AnswerOnly,
            params: BackendParams { model_id: "scripted".into(), temperature: 1.0, max_new_tokens: 16, n_samples: 10 },
            seeds: Seeds { selection: 1, option_order: 2, sampling: 3, shuffle: 4 },
            parallelism,
        },
    }
}

fn scripted(d: &Data, base: f64, gain: f64) -> ScriptedBackend {
    let rule = ScriptedRule { probe_id: "*".into(), base_prob_majority: base, cue_gain: gain };
    ScriptedBackend::new(vec![rule], &d.probes, &d.majorities, false)
}

#[test]
fn perfect_model_has_nothing_to_align() {
    let d = data();
    let zero = harness(&d, 4).detect_misaligned(&scripted(&d, 1.0, 0.0)).unwrap();
    assert_eq!(zero.records.len(), 237);
    assert_eq!(zero.misaligned().count(), 0);
}

#[test]
fn always_wrong_model_is_fully_misaligned() {
    let d = data();
    let zero = harness(&d, 4).detect_misaligned(&scripted(&d, 0.0, 0.0)).unwrap();
    assert_eq!(zero.misaligned().count(), 237);
    assert!(zero.misaligned().all(|r| r.error_rate().value() == 1.0));
}

#[test]
fn five_cues_fully_correct_the_model() {
    let d = data();
    let (_, outcomes) = harness(&d, 4).run_self_align(&scripted(&d, 0.0, 0.2)).unwrap();
    assert_eq!(outcomes.len(), 237);
    for o in &outcomes {
        assert_eq!(o.classification, Classification::Improved);
        assert_eq!(o.delta_corrected.unwrap().value(), 0.0);
        assert_eq!(o.error_reduction.unwrap().value(), 1.0);
        assert_eq!(o.demos.len(), 5);
    }
}

#[test]
fn outcomes_do_not_depend_on_parallelism() {
    let d = data();
    let b = scripted(&d, 0.4, 0.1);
    let (_, serial) = harness(&d, 1).run_self_align(&b).unwrap();
    let (_, parallel) = harness(&d, 8).run_self_align(&b).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn classification_matches_error_sign() {
    let d = data();
    for (base, gain) in [(0.3, 0.2), (0.5, 0.0), (0.6, -0.1), (0.5, 0.05)] {
        let (_, outcomes) = harness(&d, 4).run_self_align(&scripted(&d, base, gain)).unwrap();
        for o in outcomes {
            let before = o.delta_original;
            let after = o.delta_corrected.unwrap();
            let want = match after.cmp(&before) {
                std::cmp::Ordering::Less => Classification::Improved,
                std::cmp::Ordering::Equal => Classification::Unchanged,
                std::cmp::Ordering::Greater => Classification::Decreased,
            };
            assert_eq!(o.classification, want);
            match o.error_reduction {
                Some(r) => {
                    assert!(r.value() > 0.0 && r.value() <= 1.0);
                    assert_eq!(r.value() == 1.0, after.is_zero());
                }
                None => assert_ne!(o.classification, Classification::Improved),
            }
        }
    }
}

#[test]
fn single_trial_equals_self_align_on_shuffled_demos() {
    let d = data();
    let h = harness(&d, 4);
    let b = scripted(&d, 0.4, 0.1);
    let (zero, per_trial) = h.run_robustness(&b, 1).unwrap();
    assert_eq!(per_trial.len(), 1);
    for o in &per_trial[0] {
        let probe = d.probes.get(&o.probe_id).unwrap();
        let rec = zero.records.iter().find(|r| r.probe_id == o.probe_id).unwrap();
        let demos = h.select_demos(probe).unwrap();
        let seed = h.settings.seeds.shuffle_seed(&o.probe_id, 0);
        let direct = h.align_with_demos(&b, probe, rec, &shuffle_demos(&demos, seed), Some(0), Some(seed)).unwrap();
        assert_eq!(&direct, o);
    }
}

#[test]
fn order_insensitive_backend_is_stable_across_trials() {
    let d = data();
    let (_, per_trial) = harness(&d, 4).run_robustness(&scripted(&d, 0.3, 0.1), 10).unwrap();
    assert_eq!(per_trial.len(), 10);
    for trial in &per_trial[1..] {
        let a: Vec<_> = trial.iter().map(|o| (&o.probe_id, o.classification)).collect();
        let b: Vec<_> = per_trial[0].iter().map(|o| (&o.probe_id, o.classification)).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn zero_trials_is_rejected() {
    let d = data();
    assert!(harness(&d, 1).run_robustness(&scripted(&d, 0.3, 0.1), 0).is_err());
}
