use std::fmt;

use crate::multilingual::{is_forcing_symbol, split_code, LanguageTag};

/// An exact ratio rendered as a percentage with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Percentage {
    pub numerator: usize,
    pub denominator: usize,
}

impl Percentage {
    /// Hundredths of a percent, rounded half up with integer arithmetic.
    pub fn hundredths(self) -> u64 {
        if self.denominator == 0 {
            return 0;
        }
        let (n, d) = (self.numerator as u128, self.denominator as u128);
        ((n * 20_000 + d) / (2 * d)) as u64
    }

    pub fn value(self) -> f64 {
        self.hundredths() as f64 / 100.0
    }
}

impl fmt::Display for Percentage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}", h / 100, h % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrongLanguageReport {
    pub wrong_words: usize,
    pub total_words: usize,
    pub wrong_sentences: usize,
    pub total_sentences: usize,
    /// Tokens with no language code; they count as wrong.
    pub uncoded_words: usize,
}

impl WrongLanguageReport {
    pub fn word_error_rate(&self) -> Percentage {
        Percentage { numerator: self.wrong_words, denominator: self.total_words }
    }

    pub fn sentence_error_rate(&self) -> Percentage {
        Percentage { numerator: self.wrong_sentences, denominator: self.total_sentences }
    }
}

impl fmt::Display for WrongLanguageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "words in wrong language: {} ({}/{})\tsentences in wrong language: {} ({}/{})",
            self.word_error_rate(),
            self.wrong_words,
            self.total_words,
            self.sentence_error_rate(),
            self.wrong_sentences,
            self.total_sentences
        )
    }
}

/// Counts coded output tokens whose language differs from `forced`. A
/// sentence is wrong when a strict majority of its tokens are.
pub fn wrong_language_stats<S: AsRef<str>>(outputs: &[Vec<S>], forced: &LanguageTag) -> WrongLanguageReport {
    let mut report = WrongLanguageReport {
        wrong_words: 0,
        total_words: 0,
        wrong_sentences: 0,
        total_sentences: outputs.len(),
        uncoded_words: 0,
    };
    for sentence in outputs {
        let mut words = 0;
        let mut wrong = 0;
        for t in sentence.iter().map(AsRef::as_ref).filter(|t| !is_forcing_symbol(t)) {
            words += 1;
            match split_code(t) {
                Some((lang, _)) if &lang == forced => {}
                Some(_) => wrong += 1,
                None => {
                    wrong += 1;
                    report.uncoded_words += 1;
                }
            }
        }
        report.total_words += words;
        report.wrong_words += wrong;
        if 2 * wrong > words {
            report.wrong_sentences += 1;
        }
    }
    if report.uncoded_words > 0 {
        log::warn!("{} output tokens carry no language code and were counted as wrong", report.uncoded_words);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fr() -> LanguageTag {
        LanguageTag::new("fr").unwrap()
    }

    #[test]
    fn minority_errors() {
        let r = wrong_language_stats(&[vec!["@fr@le", "@fr@chat", "@en@cat"]], &fr());
        assert_eq!(r.word_error_rate().to_string(), "33.33");
        assert_eq!(r.sentence_error_rate().to_string(), "0.00");
    }

    #[test]
    fn all_correct() {
        let r = wrong_language_stats(&[vec!["<FR>", "@fr@le", "@fr@chat", "<FR>"], vec![]], &fr());
        assert_eq!(r.total_words, 2);
        assert_eq!(
            (r.word_error_rate().to_string().as_str(), r.sentence_error_rate().to_string().as_str()),
            ("0.00", "0.00")
        );
    }

    #[test]
    fn ties_are_not_majorities_and_uncoded_is_wrong() {
        let r = wrong_language_stats(&[vec!["@fr@a", "@en@b"], vec!["x", "y", "@fr@z"]], &fr());
        assert_eq!(r.wrong_sentences, 1);
        assert_eq!(r.uncoded_words, 2);
        assert_eq!(r.wrong_words, 3);
    }

    #[test]
    fn rounding_is_half_up_and_exact() {
        assert_eq!(Percentage { numerator: 2127, denominator: 10_000 }.to_string(), "21.27");
        assert_eq!(Percentage { numerator: 1, denominator: 8 }.to_string(), "12.50");
        assert_eq!(Percentage { numerator: 1, denominator: 80_000 }.to_string(), "0.00");
        assert_eq!(Percentage { numerator: 1, denominator: 20_000 }.to_string(), "0.01");
        assert_eq!(Percentage { numerator: 2, denominator: 3 }.to_string(), "66.67");
        assert_eq!(Percentage { numerator: 5, denominator: 5 }.to_string(), "100.00");
        assert_eq!(Percentage { numerator: 0, denominator: 0 }.to_string(), "0.00");
    }
}
