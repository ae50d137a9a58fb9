use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;

use super::EvalError;

const MAX_ORDER: usize = 4;

/// mteval-v13a tokenization, case preserved.
pub fn tokenize_13a(line: &str) -> Vec<String> {
    static RULES: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        [
            (Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap(), " $1 "),
            (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
            (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
            (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
        ]
    });
    let mut text = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">");
    text = format!(" {text} ");
    for (re, rep) in rules {
        text = re.replace_all(&text, *rep).into_owned();
    }
    text.split_whitespace().map(str::to_string).collect()
}

/// Corpus-level BLEU-4 with a single reference and no smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// Percentage in [0, 100].
    pub bleu: f64,
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Fingerprint of the reference side.
    pub test_set: String,
}

impl BleuReport {
    /// Modified n-gram precision for order `n` in 1..=4, as a fraction.
    pub fn precision(&self, n: usize) -> f64 {
        let i = n - 1;
        if self.totals[i] == 0 {
            0.0
        } else {
            self.matches[i] as f64 / self.totals[i] as f64
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.ref_len == 0 {
            0.0
        } else {
            self.hyp_len as f64 / self.ref_len as f64
        }
    }

    /// The score in hundredths, as printed.
    pub fn hundredths(&self) -> i64 {
        (self.bleu * 100.0).round() as i64
    }
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BLEU = {:.2}, {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu,
            100.0 * self.precision(1),
            100.0 * self.precision(2),
            100.0 * self.precision(3),
            100.0 * self.precision(4),
            self.brevity_penalty,
            self.ratio(),
            self.hyp_len,
            self.ref_len
        )
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

fn fingerprint<S: AsRef<[String]>>(references: &[S]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for r in references {
        for t in r.as_ref() {
            eat(t.as_bytes());
            eat(b" ");
        }
        eat(b"\n");
    }
    format!("{}:{h:016x}", references.len())
}

/// BLEU over already tokenized sentences.
pub fn bleu_tokens<S: AsRef<[String]>>(hypotheses: &[S], references: &[S]) -> Result<BleuReport, EvalError> {
    if hypotheses.len() != references.len() {
        return Err(EvalError::LengthMismatch { hypotheses: hypotheses.len(), references: references.len() });
    }
    if hypotheses.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(r, n);
            for (gram, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let bleu = if matches.contains(&0) {
        0.0
    } else {
        let log_mean =
            (0..MAX_ORDER).map(|i| (matches[i] as f64 / totals[i] as f64).ln()).sum::<f64>() / MAX_ORDER as f64;
        (100.0 * brevity_penalty * log_mean.exp()).min(100.0)
    };
    Ok(BleuReport { bleu, matches, totals, brevity_penalty, hyp_len, ref_len, test_set: fingerprint(references) })
}

/// BLEU over detokenized lines, tokenized the mteval-v13a way.
pub fn bleu<S: AsRef<str>>(hypotheses: &[S], references: &[S]) -> Result<BleuReport, EvalError> {
    let h: Vec<Vec<String>> = hypotheses.iter().map(|s| tokenize_13a(s.as_ref())).collect();
    let r: Vec<Vec<String>> = references.iter().map(|s| tokenize_13a(s.as_ref())).collect();
    bleu_tokens(&h, &r)
}

/// Signed BLEU difference in hundredths, computed from the printed scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuDelta {
    pub hundredths: i64,
}

impl BleuDelta {
    pub fn value(self) -> f64 {
        self.hundredths as f64 / 100.0
    }
}

impl fmt::Display for BleuDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.hundredths < 0 { '-' } else { '+' };
        let a = self.hundredths.unsigned_abs();
        write!(f, "{sign}{}.{:02}", a / 100, a % 100)
    }
}

pub fn delta_report(system: &BleuReport, baseline: &BleuReport) -> Result<BleuDelta, EvalError> {
    if system.test_set != baseline.test_set {
        return Err(EvalError::TestSetMismatch {
            system: system.test_set.clone(),
            baseline: baseline.test_set.clone(),
        });
    }
    Ok(BleuDelta { hundredths: system.hundredths() - baseline.hundredths() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn tokenizer_matches_reference_script() {
        let cases = [
            ("Hello, world.", "Hello , world ."),
            ("3.14 is pi-ish, isn't it?", "3.14 is pi-ish , isn't it ?"),
            ("a 1,000-page (book)!", "a 1,000 - page ( book ) !"),
            ("e.g. U.S.A. $5", "e . g . U . S . A . $ 5"),
            ("x&amp;y &lt;z&gt; &quot;q&quot;", "x & y < z > \" q \""),
        ];
        for (raw, expected) in cases {
            assert_eq!(tokenize_13a(raw), toks(expected), "{raw}");
        }
    }

    #[test]
    fn identical_is_one_hundred() {
        let r = bleu(&["the cat sat on the mat"], &["the cat sat on the mat"]).unwrap();
        assert_eq!(format!("{:.2}", r.bleu), "100.00");
        assert_eq!(
            r.to_string(),
            "BLEU = 100.00, 100.0/100.0/100.0/100.0 (BP=1.000, ratio=1.000, hyp_len=6, ref_len=6)"
        );
    }

    #[test]
    fn no_four_gram_match_is_zero() {
        let r = bleu(&["a b c d", "e f g h"], &["a x c x", "e y g z"]).unwrap();
        assert_eq!(r.matches, [4, 0, 0, 0]);
        assert_eq!(r.bleu, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(bleu(&["a"], &["a", "b"]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(bleu::<&str>(&[], &[]), Err(EvalError::EmptyCorpus)));
    }

    #[test]
    fn delta_examples() {
        let base = bleu(&["a b c d e"], &["a b c d e"]).unwrap();
        let with = |score: f64| BleuReport { bleu: score, ..base.clone() };
        assert_eq!(delta_report(&with(26.99), &with(24.35)).unwrap().to_string(), "+2.64");
        assert_eq!(delta_report(&with(13.41), &with(16.65)).unwrap().to_string(), "-3.24");
        assert_eq!(delta_report(&with(20.0), &with(20.0)).unwrap().to_string(), "+0.00");
        let other = bleu(&["a b c d e"], &["a b c d f"]).unwrap();
        assert!(matches!(delta_report(&base, &other), Err(EvalError::TestSetMismatch { .. })));
    }
}
