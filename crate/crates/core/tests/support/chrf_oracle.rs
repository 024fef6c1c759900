//! Brute-force chrF++ written from the metric definition, used as a test oracle.
//!
//! Inputs are expected in NFC already. N-grams are counted by pairwise
//! comparison over plain vectors, with no hashing.

const CHAR_ORDERS: usize = 6;
const WORD_ORDERS: usize = 2;
const BETA: f64 = 2.0;

/// Unicode punctuation (general category P*) that the text generators emit.
/// Symbols such as `$`, `+` or `=` are deliberately absent.
pub const PUNCTUATION: &[char] = &[
    '.', ',', '!', '?', ';', ':', '\'', '"', '(', ')', '[', ']', '{', '}', '-', '_', '%', '&', '*', '#', '@',
    '/', '\\', '«', '»', '¿', '¡', '\u{0964}', '\u{0387}', '、', '。',
];

fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

fn tokens(text: &str) -> Vec<Vec<char>> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = Vec::new();
        for c in word.chars() {
            if is_punct(c) {
                if !cur.is_empty() {
                    out.push(cur.clone());
                    cur.clear();
                }
                out.push(vec![c]);
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn grams<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    if items.len() < n {
        return Vec::new();
    }
    (0..=items.len() - n).map(|i| items[i..i + n].to_vec()).collect()
}

fn count<T: PartialEq>(all: &[T], x: &T) -> usize {
    all.iter().filter(|y| *y == x).count()
}

/// `None` when both sides have no n-grams of this order.
fn f_beta<T: PartialEq>(hyp: &[T], reference: &[T]) -> Option<f64> {
    if hyp.is_empty() && reference.is_empty() {
        return None;
    }
    let mut seen: Vec<&T> = Vec::new();
    let mut matches = 0usize;
    for g in hyp {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        matches += count(hyp, g).min(count(reference, g));
    }
    let p = if hyp.is_empty() { 0.0 } else { matches as f64 / hyp.len() as f64 };
    let r = if reference.is_empty() { 0.0 } else { matches as f64 / reference.len() as f64 };
    if p + r == 0.0 {
        return Some(0.0);
    }
    let b2 = BETA * BETA;
    Some((1.0 + b2) * p * r / (b2 * p + r))
}

pub fn chrf_pp(hypothesis: &str, reference: &str) -> f64 {
    let hc: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
    let rc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let ht = tokens(hypothesis);
    let rt = tokens(reference);
    let mut scores = Vec::new();
    for n in 1..=CHAR_ORDERS {
        scores.extend(f_beta(&grams(&hc, n), &grams(&rc, n)));
    }
    for n in 1..=WORD_ORDERS {
        scores.extend(f_beta(&grams(&ht, n), &grams(&rt, n)));
    }
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Ids of the `k` pool entries most similar to `query`, best first, ties by id.
pub fn top_k(query: &str, pool: &[(String, String)], k: usize) -> Vec<String> {
    let mut scored: Vec<(f64, &String)> = pool.iter().map(|(id, text)| (chrf_pp(query, text), id)).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.clone()).collect()
}
