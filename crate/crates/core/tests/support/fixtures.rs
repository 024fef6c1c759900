//! Synthetic probe pools.

use selfalign::probe_data::{Answer, Category, MajorityTable, Probe, ProbeSet};

const SUBJECTS: &[&str] = &[
    "Family", "Work", "Religion", "Politics", "Leisure time", "Friends", "Science", "Tradition", "Honesty",
    "Wealth", "Security", "Freedom", "Equality", "Democracy", "Tolerance", "Obedience",
];

const FRAMES: &[(&str, &str, &str)] = &[
    ("{} is _ to me.", "important", "unimportant"),
    ("I _ that {} matters in daily life.", "agree", "disagree"),
    ("People around me are _ with {}.", "satisfied", "dissatisfied"),
    ("I _ think about {} when I vote.", "often", "rarely"),
];

/// `n` English probes spread over every category, with alternating majorities.
pub fn pool(n: usize) -> (ProbeSet, MajorityTable) {
    let probes: Vec<Probe> = (0..n)
        .map(|i| {
            let (frame, a, b) = FRAMES[i % FRAMES.len()];
            let subject = SUBJECTS[(i * 7) % SUBJECTS.len()];
            Probe {
                probe_id: format!("s{i:03}"),
                question_id: format!("Q{i:03}"),
                language: "en".into(),
                category: Category::ALL[i % Category::ALL.len()],
                template: frame.replace("{}", &format!("{subject} ({i})")),
                option_a: a.into(),
                option_b: b.into(),
            }
        })
        .collect();
    let set = ProbeSet::new(probes).expect("fixture probes are valid");
    let majorities = MajorityTable::from_answers(
        "United States",
        set.iter()
            .map(|p| (p.probe_id.clone(), if p.probe_id.ends_with(['1', '3', '5']) { Answer::OptionB } else { Answer::OptionA })),
    );
    (set, majorities)
}

/// One hundred responses built around the important/unimportant pair.
pub fn important_cases() -> Vec<(String, Answer)> {
    let frames = [
        "{}", "{}.", "Answer: {}", "I would say {}.", "\"{}\"", "It is {} to me.", "{}!", "My choice is '{}'",
        "{} (final answer)", "The word is: {}",
    ];
    let mut out = Vec::new();
    for frame in frames {
        for word in ["important", "unimportant", "Important", "UNIMPORTANT", "UnImportant"] {
            let answer = if word.to_lowercase().starts_with("un") { Answer::OptionB } else { Answer::OptionA };
            out.push((frame.replace("{}", word), answer));
        }
        out.push((frame.replace("{}", "unimportant, not important"), Answer::OptionB));
        out.push((frame.replace("{}", "important, not unimportant"), Answer::OptionA));
        out.push((frame.replace("{}", "quite unimportant really"), Answer::OptionB));
        out.push((frame.replace("{}", "rather unimportant"), Answer::OptionB));
        out.push((frame.replace("{}", "very important"), Answer::OptionA));
    }
    out
}
