use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::PrepError;

/// A declared language, `[a-z]{2,8}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn new(code: &str) -> Result<Self, PrepError> {
        let ok = (2..=8).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
        if ok {
            Ok(LanguageTag(code.to_string()))
        } else {
            Err(PrepError::InvalidLanguage(code.to_string()))
        }
    }

    pub fn code(&self) -> &str {
        &self.0
    }

    /// The `@xx@` prefix attached to every token of this language.
    pub fn prefix(&self) -> String {
        format!("@{}@", self.0)
    }

    /// `<EN>`, `<DE>`, ...
    pub fn forcing_symbol(&self) -> String {
        format!("<{}>", self.0.to_uppercase())
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageTag {
    type Err = PrepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::new(s)
    }
}

/// Splits `@xx@piece` into its language and piece.
pub fn split_code(token: &str) -> Option<(LanguageTag, &str)> {
    let rest = token.strip_prefix('@')?;
    let end = rest.find('@')?;
    let lang = LanguageTag::new(&rest[..end]).ok()?;
    Some((lang, &rest[end + 1..]))
}

/// The target language named by a forcing symbol. `<E>` is read as English.
pub fn parse_forcing_symbol(token: &str) -> Option<LanguageTag> {
    let inner = token.strip_prefix('<')?.strip_suffix('>')?;
    if inner == "E" {
        return LanguageTag::new("en").ok();
    }
    if inner.is_empty() || !inner.bytes().all(|b| b.is_ascii_uppercase()) {
        return None;
    }
    LanguageTag::new(&inner.to_lowercase()).ok()
}

pub fn is_forcing_symbol(token: &str) -> bool {
    parse_forcing_symbol(token).is_some()
}

/// Prefixes every token with `@lang@`.
pub fn code_language<S: AsRef<str>>(tokens: &[S], lang: &LanguageTag) -> Result<Vec<String>, PrepError> {
    let prefix = lang.prefix();
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            if split_code(t).is_some() {
                Err(PrepError::DoubleCoding(t.to_string()))
            } else {
                Ok(format!("{prefix}{t}"))
            }
        })
        .collect()
}

/// Removes language codes and forcing symbols, reporting the language each
/// remaining token carried (`None` for uncoded tokens).
pub fn strip_codes<S: AsRef<str>>(tokens: &[S]) -> (Vec<String>, Vec<Option<LanguageTag>>) {
    let mut plain = Vec::with_capacity(tokens.len());
    let mut langs = Vec::with_capacity(tokens.len());
    for t in tokens {
        let t = t.as_ref();
        if is_forcing_symbol(t) {
            continue;
        }
        match split_code(t) {
            Some((lang, piece)) => {
                plain.push(piece.to_string());
                langs.push(Some(lang));
            }
            None => {
                plain.push(t.to_string());
                langs.push(None);
            }
        }
    }
    (plain, langs)
}

/// A coded sentence, optionally wrapped in forcing symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub language: LanguageTag,
    pub forced_target: Option<LanguageTag>,
}

impl TaggedSentence {
    /// Tokens without the surrounding forcing symbols.
    pub fn body(&self) -> &[String] {
        if self.forced_target.is_some() {
            &self.tokens[1..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }

    pub fn body_len(&self) -> usize {
        self.body().len()
    }

    pub fn to_line(&self) -> String {
        self.tokens.join(" ")
    }

    /// Parses a whitespace-separated line. The language is taken from the
    /// first coded token, falling back to `default_language`.
    pub fn parse(line: &str, default_language: &LanguageTag) -> Result<Self, PrepError> {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        let forced_target = match (tokens.first(), tokens.last()) {
            (Some(first), Some(last)) if is_forcing_symbol(first) => {
                if tokens.len() < 2 || first != last {
                    return Err(PrepError::MalformedForcing(line.to_string()));
                }
                parse_forcing_symbol(first)
            }
            _ => None,
        };
        let language =
            tokens.iter().find_map(|t| split_code(t).map(|(l, _)| l)).unwrap_or_else(|| default_language.clone());
        Ok(TaggedSentence { tokens, language, forced_target })
    }
}

/// The languages a setup may force toward.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LanguageSet(BTreeSet<LanguageTag>);

impl LanguageSet {
    pub fn new<I: IntoIterator<Item = LanguageTag>>(langs: I) -> Self {
        LanguageSet(langs.into_iter().collect())
    }

    pub fn contains(&self, lang: &LanguageTag) -> bool {
        self.0.contains(lang)
    }

    pub fn insert(&mut self, lang: LanguageTag) {
        self.0.insert(lang);
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageTag> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Wraps a coded sentence in the forcing symbol of `target` at both ends.
pub fn force_target<S: AsRef<str>>(
    coded: &[S],
    source_language: &LanguageTag,
    target: &LanguageTag,
    known: &LanguageSet,
) -> Result<TaggedSentence, PrepError> {
    if !known.contains(target) {
        return Err(PrepError::UnknownTarget(target.clone()));
    }
    if let Some(t) = coded.iter().find(|t| is_forcing_symbol(t.as_ref())) {
        return Err(PrepError::AlreadyForced(t.as_ref().to_string()));
    }
    let symbol = target.forcing_symbol();
    let mut tokens = Vec::with_capacity(coded.len() + 2);
    tokens.push(symbol.clone());
    tokens.extend(coded.iter().map(|t| t.as_ref().to_string()));
    tokens.push(symbol);
    Ok(TaggedSentence { tokens, language: source_language.clone(), forced_target: Some(target.clone()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(c: &str) -> LanguageTag {
        LanguageTag::new(c).unwrap()
    }

    #[test]
    fn language_tag_validation() {
        assert!(LanguageTag::new("de").is_ok());
        assert!(LanguageTag::new("abcdefgh").is_ok());
        for bad in ["", "d", "DE", "de1", "abcdefghi", "d e"] {
            assert!(LanguageTag::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn coding_examples() {
        assert_eq!(code_language(&["Obama"], &lang("de")).unwrap(), ["@de@Obama"]);
        assert_eq!(code_language(&["darum", "geht", "es"], &lang("de")).unwrap(), ["@de@darum", "@de@geht", "@de@es"]);
        assert!(code_language::<&str>(&[], &lang("de")).unwrap().is_empty());
        assert!(matches!(code_language(&["@en@car"], &lang("de")), Err(PrepError::DoubleCoding(_))));
    }

    #[test]
    fn forcing_examples() {
        let known = LanguageSet::new([lang("en"), lang("de")]);
        let body = ["@de@darum", "@de@geht", "@de@es", "@de@in", "@de@meinem", "@de@Vortrag"];
        let forced = force_target(&body, &lang("de"), &lang("en"), &known).unwrap();
        assert_eq!(forced.tokens.first().unwrap(), "<EN>");
        assert_eq!(forced.tokens.last().unwrap(), "<EN>");
        assert_eq!(forced.body(), body);
        assert_eq!(forced.forced_target, Some(lang("en")));

        let empty = force_target::<&str>(&[], &lang("de"), &lang("en"), &known).unwrap();
        assert_eq!(empty.tokens, ["<EN>", "<EN>"]);

        assert!(matches!(force_target(&body, &lang("de"), &lang("fr"), &known), Err(PrepError::UnknownTarget(_))));
        assert!(matches!(
            force_target(&["<EN>", "@de@x"], &lang("de"), &lang("en"), &known),
            Err(PrepError::AlreadyForced(_))
        ));
    }

    #[test]
    fn forcing_symbol_parsing_accepts_short_english_alias() {
        assert_eq!(parse_forcing_symbol("<E>"), Some(lang("en")));
        assert_eq!(parse_forcing_symbol("<EN>"), Some(lang("en")));
        assert_eq!(parse_forcing_symbol("<FR>"), Some(lang("fr")));
        assert_eq!(parse_forcing_symbol("<s>"), None);
        assert_eq!(parse_forcing_symbol("</s>"), None);
        assert_eq!(parse_forcing_symbol("<unk>"), None);
    }

    #[test]
    fn strip_examples() {
        let (plain, langs) = strip_codes(&["@en@car"]);
        assert_eq!(plain, ["car"]);
        assert_eq!(langs, [Some(lang("en"))]);

        let sentence = "<E> @de@darum @de@geht @de@es @de@in @de@meinem @de@Vortrag <E>";
        let toks: Vec<&str> = sentence.split(' ').collect();
        let (plain, langs) = strip_codes(&toks);
        assert_eq!(plain, ["darum", "geht", "es", "in", "meinem", "Vortrag"]);
        assert!(langs.iter().all(|l| l.as_ref() == Some(&lang("de"))));

        let (plain, langs) = strip_codes(&["@fr@le", "chat"]);
        assert_eq!(plain, ["le", "chat"]);
        assert_eq!(langs, [Some(lang("fr")), None]);
    }

    #[test]
    fn parse_round_trip() {
        let line = "<FR> @en@the @en@cat <FR>";
        let s = TaggedSentence::parse(line, &lang("xx")).unwrap();
        assert_eq!(s.language, lang("en"));
        assert_eq!(s.forced_target, Some(lang("fr")));
        assert_eq!(s.to_line(), line);
        assert!(TaggedSentence::parse("<FR> @en@the <EN>", &lang("en")).is_err());
    }
}
