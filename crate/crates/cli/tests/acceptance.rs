//! Acceptance suite: one PASS/FAIL line per criterion.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use selfalign::backend::{Backend, BackendError, CachedBackend, GenerationRequest, ResponseCache};
use selfalign::chrf::{chrf_pp, ChrfConfig, ChrfIndex, NgramProfile};
use selfalign::config::{Inputs, RunConfig};
use selfalign::demo::{select, SelectionStrategy};
use selfalign::eval::{error_reduction, DomainError, Fraction};
use selfalign::probe_data::{aggregate_majority, Answer, LikertDistribution, Orientation, ProbeDataError};
use selfalign::prompt::{parse_response, ParsedValue};
use selfalign::report::{self, RunSummary};
use selfalign::seed::rng_from_seed;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;
use support::{chrf_oracle, fixtures, text_gen};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)*));
        }
    }};
}

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/demo").canonicalize().expect("demo data present")
}

/// Runs `selfalign self-align` on a shipped demo config, writing into `out`.
fn self_align_cli(config: &str, out: &Path, extra: &[&str]) -> Result<RunSummary, String> {
    let cfg = demo().join(config);
    let status = Command::new(env!("CARGO_BIN_EXE_selfalign"))
        .args(["self-align", "-c", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(status.status.success(), "self-align on {config} failed: {}", String::from_utf8_lossy(&status.stderr));
    report::read_summary(&out.join("summary.json")).map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let cfg = ChrfConfig::default();
    let mut rng = rng_from_seed(7);
    let mut pairs: Vec<(String, String)> = (0..60).map(|_| text_gen::related_pair(&mut rng)).collect();
    let templates = [
        "Family is _ to me.",
        "I _ that men make better political leaders than women do.",
        "I am _ with my financial situation.",
        "Η θρησκεία είναι _ για μένα.",
        "종교는 나에게 _.",
        "ধর্ম আমার কাছে _।",
        "Immigrants _ fill useful jobs in the workforce.",
        "I _ trust people of another religion.",
        "Science and technology are making our lives _.",
        "It is _ to have a strong leader who does not have to bother with parliament.",
    ];
    for a in templates {
        for b in templates {
            pairs.push((a.to_string(), b.to_string()));
        }
    }
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (h, r) in &pairs {
        let got = chrf_pp(h, r, &cfg).map_err(|e| e.to_string())?;
        let want = chrf_oracle::chrf_pp(h, r);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-9, "{h:?} vs {r:?}: {got} != {want}");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.3}s");
    Ok(format!("{} pairs, max |diff| {worst:.1e}, {secs:.3}s", pairs.len()))
}

fn criterion_2() -> Outcome {
    let cfg = ChrfConfig::default();
    let mut rng = rng_from_seed(8);
    for _ in 0..1000 {
        let s = text_gen::sentence(&mut rng);
        let id = chrf_pp(&s, &s, &cfg).map_err(|e| e.to_string())?;
        ensure!(id == 1.0, "identity {s:?} gave {id}");
        let (h, r) = text_gen::disjoint_pair(&mut rng);
        let d = chrf_pp(&h, &r, &cfg).map_err(|e| e.to_string())?;
        ensure!(d == 0.0, "disjoint {h:?} / {r:?} gave {d}");
        let (h, r) = text_gen::related_pair(&mut rng);
        let v = chrf_pp(&h, &r, &cfg).map_err(|e| e.to_string())?;
        ensure!((0.0..=1.0).contains(&v), "out of range {v}");
        let again = NgramProfile::new(&h, &cfg).unwrap().score_against(&NgramProfile::new(&r, &cfg).unwrap(), cfg.beta);
        ensure!(v.to_bits() == again.to_bits(), "not bit-deterministic for {h:?}");
    }
    Ok("1000 identity, 1000 disjoint, 1000 range/determinism pairs".into())
}

fn criterion_3() -> Outcome {
    let f = |n, d| Fraction::new(n, d).unwrap();
    let r = |o, c| error_reduction(o, c).map(Fraction::value);
    ensure!(r(f(5, 10), f(1, 10)) == Ok(0.8), "(0.5, 0.1)");
    ensure!(r(f(4, 10), f(0, 10)) == Ok(1.0), "(0.4, 0.0)");
    ensure!(r(f(9, 10), f(6, 10)) == Ok(1.0 / 3.0), "(0.9, 0.6) gave {:?}", r(f(9, 10), f(6, 10)));
    ensure!(error_reduction(f(9, 10), f(6, 10)) == Ok(f(1, 3)), "(0.9, 0.6) is not exactly 1/3");
    ensure!(error_reduction(f(0, 10), f(0, 10)) == Err(DomainError::ZeroOriginalError), "zero original error accepted");
    Ok("0.8, 1.0, 1/3 exact; DomainError on zero".into())
}

fn likert(shares: &[f64], orientation: Orientation) -> Result<Answer, ProbeDataError> {
    aggregate_majority(&LikertDistribution {
        question_id: "Q".into(),
        country: "C".into(),
        scale_size: shares.len(),
        shares: shares.to_vec(),
        orientation,
    })
    .map(|m| m.majority)
}

fn criterion_4() -> Outcome {
    use Orientation::*;
    // option B is the "disagree" end: points 1-5 vote B, 6-10 vote A
    let cases: [(&[f64], Orientation, Option<Answer>); 8] = [
        (&[0.1, 0.1, 0.1, 0.1, 0.2, 0.1, 0.1, 0.1, 0.05, 0.05], LowIsOptionB, Some(Answer::OptionB)),
        (&[0.0, 0.0, 0.0, 0.0, 0.45, 0.55, 0.0, 0.0, 0.0, 0.0], LowIsOptionB, Some(Answer::OptionA)),
        (&[0.0, 0.0, 0.0, 0.0, 0.51, 0.49, 0.0, 0.0, 0.0, 0.0], LowIsOptionA, Some(Answer::OptionA)),
        (&[0.1; 10], LowIsOptionB, None),
        (&[0.2, 0.1, 0.5, 0.1, 0.1], LowIsOptionA, Some(Answer::OptionA)),
        (&[0.0, 0.0, 1.0, 0.0, 0.0], LowIsOptionA, None),
        (&[0.1, 0.3, 0.4, 0.2], LowIsOptionB, Some(Answer::OptionA)),
        (&[0.7, 0.3], LowIsOptionA, Some(Answer::OptionA)),
    ];
    for (shares, o, want) in cases {
        match (likert(shares, o), want) {
            (Ok(got), Some(w)) => ensure!(got == w, "{shares:?}: {got:?} != {w:?}"),
            (Err(ProbeDataError::Tie { .. }), None) => {}
            (other, w) => return Err(format!("{shares:?}: {other:?}, expected {w:?}")),
        }
    }
    Ok(format!("{} constructed distributions incl. ties and odd scales", cases.len()))
}

fn criterion_5() -> Outcome {
    let (set, maj) = fixtures::pool(30);
    let index = ChrfIndex::build(set.iter(), ChrfConfig::default()).map_err(|e| e.to_string())?;
    for test in set.iter() {
        let pool: Vec<(String, String)> = set
            .iter()
            .filter(|p| p.probe_id != test.probe_id)
            .map(|p| (p.probe_id.clone(), p.template.clone()))
            .collect();
        let want = chrf_oracle::top_k(&test.template, &pool, 5);
        let got: Vec<String> = select(test, &set, &maj, SelectionStrategy::ChrfAcrossCategories, 5, 0, &index)
            .map_err(|e| e.to_string())?
            .items
            .into_iter()
            .map(|d| d.probe_id)
            .collect();
        ensure!(got == want, "{}: {got:?} != oracle {want:?}", test.probe_id);
        for strategy in SelectionStrategy::ALL {
            let k = if strategy.within_category() { 1 } else { 5 };
            for seed in [3u64, 4] {
                let a = select(test, &set, &maj, strategy, k, seed, &index).map_err(|e| e.to_string())?;
                let b = select(test, &set, &maj, strategy, k, seed, &index).map_err(|e| e.to_string())?;
                ensure!(a == b, "{strategy} not reproducible");
                ensure!(!a.contains(&test.probe_id), "{strategy} returned the test probe");
                if strategy.within_category() {
                    ensure!(
                        a.items.iter().all(|d| set.get(&d.probe_id).unwrap().category == test.category),
                        "{strategy} crossed categories"
                    );
                }
            }
        }
    }
    Ok("30-probe pool: oracle top-5 for all 30 queries; category, exclusion and seed checks".into())
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let s = self_align_cli("config.json", &dir.path().join("cue"), &["--no-cache"])?;
    let secs = start.elapsed().as_secs_f64();
    let t = &s.totals;
    ensure!(t.misaligned > 0, "no misaligned probes");
    let improved = t.improved as f64 / t.misaligned as f64;
    ensure!(improved >= 0.95, "improved {improved:.3}");
    let red = &s.error_reductions;
    let top = red.counts[red.counts.len() - 1] as f64 / red.total().max(1) as f64;
    ensure!(top >= 0.90, "80-100% bin holds {top:.3}");
    ensure!(secs < 30.0, "took {secs:.1}s");
    let n = self_align_cli("config_no_cue.json", &dir.path().join("no-cue"), &["--no-cache"])?;
    let unchanged = n.totals.unchanged as f64 / n.totals.misaligned.max(1) as f64;
    ensure!(unchanged >= 0.90, "no-cue unchanged {unchanged:.3}");
    Ok(format!(
        "improved {}/{} ({:.1}%), {:.1}% of reductions in 80-100%, {secs:.1}s; no-cue unchanged {:.1}%",
        t.improved,
        t.misaligned,
        improved * 100.0,
        top * 100.0,
        unchanged * 100.0
    ))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = self_align_cli("config_negative_cue.json", dir.path(), &["--no-cache"])?;
    let t = &s.totals;
    ensure!(2 * t.decreased > t.misaligned, "decreased {}/{}", t.decreased, t.misaligned);
    Ok(format!("decreased {}/{}", t.decreased, t.misaligned))
}

/// Counts requests and fails them all.
struct Refuse(AtomicUsize);

impl Backend for Refuse {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(BackendError::Unavailable { context: req.context.to_string(), reason: "replay must not call".into() })
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let cache = dir.path().join("cache.jsonl");
    self_align_cli("config.json", &a, &["--cache", cache.to_str().unwrap()])?;
    self_align_cli("config.json", &b, &["--no-cache"])?;
    self_align_cli("config.json", &c, &["--cache", cache.to_str().unwrap(), "--cache-only"])?;
    for file in ["summary.json", "outcomes.csv", "histograms.csv"] {
        let first = fs::read(a.join(file)).map_err(|e| e.to_string())?;
        ensure!(first == fs::read(b.join(file)).map_err(|e| e.to_string())?, "{file} differs between runs");
        ensure!(first == fs::read(c.join(file)).map_err(|e| e.to_string())?, "{file} differs on replay");
    }
    let cfg = RunConfig::load(&demo().join("config.json")).map_err(|e| e.to_string())?;
    let inputs = Inputs::load(&cfg).map_err(|e| e.to_string())?;
    let backend = CachedBackend::new(Refuse(AtomicUsize::new(0)), ResponseCache::open(&cache).map_err(|e| e.to_string())?);
    let harness = inputs.harness(&cfg).map_err(|e| e.to_string())?;
    let (_, outcomes) = harness.run_self_align(&backend).map_err(|e| e.to_string())?;
    ensure!(backend.backend_calls() == 0, "{} backend calls during replay", backend.backend_calls());
    let meta = inputs.meta(&cfg).map_err(|e| e.to_string())?;
    let rows = report::rows(&meta.run_id, &outcomes);
    let json = report::summary_json(&report::summarize(&meta, &rows));
    ensure!(json.as_bytes() == fs::read(a.join("summary.json")).unwrap(), "library replay summary differs");
    Ok("identical bytes across two runs and a cache-only replay; 0 backend calls".into())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for config in ["config.json", "config_no_cue.json", "config_negative_cue.json"] {
        let out = dir.path().join(config);
        let s = self_align_cli(config, &out, &["--no-cache"])?;
        let t = &s.totals;
        ensure!(t.improved + t.unchanged + t.decreased + t.skipped == t.misaligned, "{config}: counts do not sum");
        let misaligned_csv = fs::read_to_string(out.join("misaligned.csv")).map_err(|e| e.to_string())?;
        ensure!(misaligned_csv.lines().count() as u64 - 1 == t.misaligned, "{config}: misaligned list length");
        let rows = report::read_outcomes_csv(&out.join("outcomes.csv")).map_err(|e| e.to_string())?;
        ensure!(rows.len() as u64 == t.misaligned, "{config}: outcome rows");
        let again = report::summary_json(&report::summarize(&s.meta, &rows));
        ensure!(again.as_bytes() == fs::read(out.join("summary.json")).unwrap(), "{config}: round trip differs");
        let cat_sum: u64 = s.categories.iter().map(|c| c.improved).sum();
        ensure!(cat_sum == t.improved, "{config}: category counts");
        checked += 1;
    }
    let cfg = RunConfig::load(&demo().join("config.json")).map_err(|e| e.to_string())?;
    let inputs = Inputs::load(&cfg).map_err(|e| e.to_string())?;
    let harness = inputs.harness(&cfg).map_err(|e| e.to_string())?;
    let (zero, trials) = harness.run_robustness(&inputs.backend(&cfg), 3).map_err(|e| e.to_string())?;
    let misaligned = zero.misaligned().count();
    ensure!(trials.iter().all(|t| t.len() == misaligned), "robustness trial sizes");
    Ok(format!("{checked} runs and 3 robustness trials conserve counts; outcomes.csv re-summarizes byte-exactly"))
}

fn criterion_10() -> Outcome {
    let cfg = RunConfig::load(&demo().join("config_noisy.json")).map_err(|e| e.to_string())?;
    let inputs = Inputs::load(&cfg).map_err(|e| e.to_string())?;
    let harness = inputs.harness(&cfg).map_err(|e| e.to_string())?;
    let (zero, outcomes) = harness.run_self_align(&inputs.backend(&cfg)).map_err(|e| e.to_string())?;
    let mut total = 0u64;
    let mut unparsed = 0u64;
    for d in zero.records.iter().map(|r| r.distribution).chain(outcomes.iter().filter_map(|o| o.corrected)) {
        total += u64::from(d.n);
        unparsed += u64::from(d.count_unparsed);
    }
    let rate = 1.0 - unparsed as f64 / total as f64;
    ensure!(rate >= 0.99, "parse rate {rate:.4}");
    let p = selfalign::probe_data::Probe {
        probe_id: "p".into(),
        question_id: "q".into(),
        language: "en".into(),
        category: selfalign::probe_data::Category::SocialValues,
        template: "It is _ to me.".into(),
        option_a: "important".into(),
        option_b: "unimportant".into(),
    };
    let cases = fixtures::important_cases();
    ensure!(cases.len() == 100, "{} cases", cases.len());
    for (text, want) in &cases {
        let got = parse_response(text, &p).value;
        ensure!(got == ParsedValue::from(*want), "{text:?} parsed as {got:?}");
    }
    Ok(format!("noisy parse rate {:.2}% over {total} samples; 100/100 longest-match cases", rate * 100.0))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "chrF++ matches brute-force oracle", criterion_1),
        (2, "chrF++ laws", criterion_2),
        (3, "error-reduction arithmetic", criterion_3),
        (4, "Likert aggregation", criterion_4),
        (5, "demonstration selection", criterion_5),
        (6, "scripted end-to-end improvement", criterion_6),
        (7, "negative-cue control", criterion_7),
        (8, "determinism and cache replay", criterion_8),
        (9, "conservation and report round trip", criterion_9),
        (10, "parse robustness", criterion_10),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {n:>2}: PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
