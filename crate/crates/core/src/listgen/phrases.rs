//! Critical-object selection: lexical matching of detector labels against
//! the answer and question, then priority-ordered choice among detections.

use rand::Rng;

use super::{DetectedObject, ListgenError};

/// Irregular plural → singular pairs common in captions.
const IRREGULAR: &[(&str, &str)] = &[
    ("people", "person"),
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("mice", "mouse"),
    ("geese", "goose"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("knives", "knife"),
    ("leaves", "leaf"),
    ("sheep", "sheep"),
    ("fish", "fish"),
];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whether `word` is `token` or one of its plural forms.
fn token_matches(word: &str, token: &str) -> bool {
    if word == token {
        return true;
    }
    if let Some(stem) = word.strip_suffix('s') {
        if stem == token {
            return true;
        }
        if let Some(stem) = stem.strip_suffix('e') {
            if stem == token {
                return true;
            }
        }
    }
    if let (Some(stem), Some(tstem)) = (word.strip_suffix("ies"), token.strip_suffix('y')) {
        if stem == tstem {
            return true;
        }
    }
    IRREGULAR.iter().any(|&(p, s)| p == word && s == token)
}

/// First word position at which `label` occurs, matching whole words.
fn find_label(text_words: &[String], label_words: &[String]) -> Option<usize> {
    let n = label_words.len();
    if n == 0 || text_words.len() < n {
        return None;
    }
    (0..=text_words.len() - n).find(|&i| {
        text_words[i..i + n]
            .iter()
            .zip(label_words)
            .all(|(w, t)| token_matches(w, t))
    })
}

/// Splits `text` after its first `.`, `!` or `?`.
fn split_first_sentence(text: &str) -> (&str, &str) {
    match text.find(['.', '!', '?']) {
        Some(i) => (&text[..i], &text[i + 1..]),
        None => (text, ""),
    }
}

/// Vocabulary labels mentioned in `chosen` and `question`, highest priority first.
///
/// Order: labels in the first sentence of `chosen`, then labels in
/// `question`, then labels in the rest of `chosen`. Within a group labels
/// keep their order of appearance; each label appears once, at its
/// highest-priority position.
pub fn extract_candidate_phrases(question: &str, chosen: &str, vocabulary: &[String]) -> Vec<String> {
    let (first, rest) = split_first_sentence(chosen);
    let vocab: Vec<(String, Vec<String>)> = vocabulary.iter().map(|l| (l.to_lowercase(), words(l))).collect();

    let mut out: Vec<String> = Vec::new();
    for segment in [first, question, rest] {
        let seg_words = words(segment);
        let mut hits: Vec<(usize, usize, &str)> = vocab
            .iter()
            .filter_map(|(label, toks)| find_label(&seg_words, toks).map(|pos| (pos, toks.len(), label.as_str())))
            .collect();
        // Earlier first; at equal position, the longer label wins.
        hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
        for (_, _, label) in hits {
            if !out.iter().any(|l| l == label) {
                out.push(label.to_string());
            }
        }
    }
    out
}

/// Index of the best detection for `label` that is not yet taken.
///
/// Best means highest confidence, then largest area, then earliest index.
fn best_for_label(label: &str, detections: &[DetectedObject], taken: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, d) in detections.iter().enumerate() {
        if taken[i] || d.label != label {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(j) => {
                let cur = &detections[j];
                let better = d.confidence > cur.confidence
                    || (d.confidence == cur.confidence && d.bbox.area() > cur.bbox.area());
                Some(if better { i } else { j })
            }
        };
    }
    best
}

/// Next detection to mask, skipping those already taken.
///
/// Walks the candidates in priority order; when none matches a free
/// detection, draws uniformly among the free ones. Returns `None` when every
/// detection is taken.
pub(crate) fn select_next<R: Rng + ?Sized>(
    candidates: &[String],
    detections: &[DetectedObject],
    taken: &[bool],
    rng: &mut R,
) -> Option<usize> {
    if let Some(i) = candidates.iter().find_map(|c| best_for_label(c, detections, taken)) {
        return Some(i);
    }
    let free: Vec<usize> = (0..detections.len()).filter(|&i| !taken[i]).collect();
    if free.is_empty() {
        None
    } else {
        Some(free[rng.random_range(0..free.len())])
    }
}

/// Picks the object to mask first.
pub fn select_object<R: Rng + ?Sized>(
    candidates: &[String],
    detections: &[DetectedObject],
    rng: &mut R,
) -> Result<DetectedObject, ListgenError> {
    if detections.is_empty() {
        return Err(ListgenError::NoDetections(String::new()));
    }
    let taken = vec![false; detections.len()];
    let i = select_next(candidates, detections, &taken, rng).expect("non-empty detections");
    Ok(detections[i].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BoundingBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab(labels: &[&str]) -> Vec<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    fn det(label: &str, conf: f64, b: [u32; 4]) -> DetectedObject {
        DetectedObject {
            label: label.into(),
            bbox: BoundingBox::try_from(b).unwrap(),
            confidence: conf,
        }
    }

    #[test]
    fn priority_trace() {
        let got = extract_candidate_phrases(
            "What vehicle is shown?",
            "A red bus is parked. Two people stand nearby.",
            &vocab(&["bus", "person", "car"]),
        );
        assert_eq!(got, vec!["bus", "person"]);
    }

    #[test]
    fn empty_inputs_give_nothing() {
        assert!(extract_candidate_phrases("", "", &vocab(&["bus"])).is_empty());
    }

    #[test]
    fn dedup_keeps_first_sentence_rank() {
        let got = extract_candidate_phrases(
            "Is the dog next to the cat?",
            "The cat sleeps! A dog barks.",
            &vocab(&["dog", "cat"]),
        );
        assert_eq!(got, vec!["cat", "dog"]);
    }

    #[test]
    fn word_boundaries_respected() {
        // "carpet" must not match "car"; "Cars" must.
        let got = extract_candidate_phrases("", "A carpet. Cars outside.", &vocab(&["car"]));
        assert_eq!(got, vec!["car"]);
        let got = extract_candidate_phrases("", "A carpet only.", &vocab(&["car"]));
        assert!(got.is_empty());
    }

    #[test]
    fn multiword_and_plural_labels() {
        let got = extract_candidate_phrases(
            "",
            "Two traffic lights glow. Some puppies and buses.",
            &vocab(&["bus", "traffic light", "puppy"]),
        );
        assert_eq!(got, vec!["traffic light", "puppy", "bus"]);
    }

    #[test]
    fn case_insensitive() {
        let got = extract_candidate_phrases("Where is the BUS?", "Nothing here", &vocab(&["Bus"]));
        assert_eq!(got, vec!["bus"]);
    }

    #[test]
    fn select_prefers_priority_head() {
        let dets = vec![det("person", 0.99, [0, 0, 5, 5]), det("bus", 0.5, [5, 5, 20, 20])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = select_object(&vocab(&["bus", "person"]), &dets, &mut rng).unwrap();
        assert_eq!(got.label, "bus");
    }

    #[test]
    fn select_breaks_ties_by_confidence_then_area() {
        let dets = vec![
            det("bus", 0.7, [0, 0, 30, 30]),
            det("bus", 0.9, [0, 0, 5, 5]),
            det("bus", 0.9, [0, 0, 6, 6]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = select_object(&vocab(&["bus"]), &dets, &mut rng).unwrap();
        assert_eq!(got, dets[2]);
    }

    #[test]
    fn random_fallback_is_seeded() {
        let dets = vec![
            det("a", 0.5, [0, 0, 2, 2]),
            det("b", 0.5, [2, 2, 4, 4]),
            det("c", 0.5, [4, 4, 6, 6]),
        ];
        let picks: Vec<String> = (0..20)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                select_object(&[], &dets, &mut rng).unwrap().label
            })
            .collect();
        let again: Vec<String> = (0..20)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                select_object(&[], &dets, &mut rng).unwrap().label
            })
            .collect();
        assert_eq!(picks, again);
        // Uniform over three labels: 20 draws hitting only one would be a broken draw.
        let distinct: std::collections::BTreeSet<_> = picks.iter().collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn no_detections_is_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            select_object(&vocab(&["bus"]), &[], &mut rng),
            Err(ListgenError::NoDetections(_))
        ));
    }

    #[test]
    fn select_next_skips_taken() {
        let dets = vec![
            det("bus", 0.9, [0, 0, 5, 5]),
            det("bus", 0.8, [5, 5, 9, 9]),
            det("car", 0.8, [9, 9, 12, 12]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cands = vocab(&["bus", "car"]);
        assert_eq!(select_next(&cands, &dets, &[true, false, false], &mut rng), Some(1));
        assert_eq!(select_next(&cands, &dets, &[true, true, false], &mut rng), Some(2));
        assert_eq!(select_next(&cands, &dets, &[true, true, true], &mut rng), None);
    }
}
