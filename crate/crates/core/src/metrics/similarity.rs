use super::TokenNormalizer;

/// `1 - |A ∩ B| / |A ∪ B|` over normalized token sets; 0 when both are empty.
pub fn jaccard_distance(a: &str, b: &str, normalizer: &TokenNormalizer) -> f64 {
    let ta = normalizer.token_set(a);
    let tb = normalizer.token_set(b);
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    let inter = ta.intersection(&tb).count();
    1.0 - inter as f64 / union as f64
}

/// Character-level edit distance (insert, delete, substitute; unit costs).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `100 * (1 - lev(a, b) / max(|a|, |b|))` on lowercased characters; 100 when both are empty.
pub fn string_similarity(a: &str, b: &str) -> f64 {
    let a = a.to_lowercase();
    let b = b.to_lowercase();
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(&a, &b) as f64 / longest as f64)
}
