//! Rule-based polarity inversion for declarative English statements.
//!
//! Two rules, tried in order:
//!
//! 1. Auxiliary/copula: `is/are/was/were/has/have/had/can/will/do/does/did`
//!    (plus the other modals) gains a following `not`, or loses it when
//!    already negated. Removing `do/does/did not` re-inflects the verb.
//! 2. Lexical verb: the first finite lexical verb is replaced by
//!    `do/does/did not` + its base form.
//!
//! Each rule inverts its own output. Only the first site is negated; a
//! sentence with more than one candidate site is flagged low-confidence.

use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use super::verbs::{strip_ed, Form, VERBS};
use super::AugmentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NegationRule {
    /// `X` → `X not` for an auxiliary or copula `X`.
    AuxiliaryInsert,
    /// `X not` → `X`.
    AuxiliaryRemove,
    /// `used` → `did not use`.
    DoSupportInsert,
    /// `did not use` → `used`.
    DoSupportRemove,
}

impl NegationRule {
    pub fn name(self) -> &'static str {
        match self {
            NegationRule::AuxiliaryInsert => "auxiliary-insert",
            NegationRule::AuxiliaryRemove => "auxiliary-remove",
            NegationRule::DoSupportInsert => "do-support-insert",
            NegationRule::DoSupportRemove => "do-support-remove",
        }
    }

    /// The rule that undoes this one.
    pub fn inverse(self) -> NegationRule {
        match self {
            NegationRule::AuxiliaryInsert => NegationRule::AuxiliaryRemove,
            NegationRule::AuxiliaryRemove => NegationRule::AuxiliaryInsert,
            NegationRule::DoSupportInsert => NegationRule::DoSupportRemove,
            NegationRule::DoSupportRemove => NegationRule::DoSupportInsert,
        }
    }
}

impl fmt::Display for NegationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negation {
    pub text: String,
    pub rule: NegationRule,
    /// More than one candidate site, or an unknown verb inflected by heuristic.
    pub low_confidence: bool,
}

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "has", "have", "had", "can", "could", "will", "would", "should", "must", "may",
    "might", "does", "do", "did",
];

const NEGATED_AUXILIARIES: &[(&str, &str)] = &[
    ("isn't", "is"),
    ("aren't", "are"),
    ("wasn't", "was"),
    ("weren't", "were"),
    ("hasn't", "has"),
    ("haven't", "have"),
    ("hadn't", "had"),
    ("can't", "can"),
    ("cannot", "can"),
    ("couldn't", "could"),
    ("won't", "will"),
    ("wouldn't", "would"),
    ("shouldn't", "should"),
    ("mustn't", "must"),
    ("doesn't", "does"),
    ("don't", "do"),
    ("didn't", "did"),
];

/// Adverbs that may sit between subject and verb; do-support goes before them.
const PREVERBAL: &[&str] = &[
    "both", "also", "all", "each", "only", "always", "often", "usually", "still", "already", "either",
    "consistently", "significantly", "actually", "really", "generally", "frequently", "typically",
    "subsequently", "previously", "initially", "successfully", "primarily", "mainly", "then", "later",
    "jointly", "together", "routinely", "commonly",
];

/// Words after which a verb-looking token is a noun or infinitive.
const NOMINAL_CONTEXT: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "their", "its", "his", "her", "our", "your", "my", "of",
    "to", "in", "for", "with", "by", "on", "at", "from", "as", "into", "no", "any", "every", "some", "per",
    "than", "and", "or", "not", "without", "after", "before", "during", "under", "over", "between", "such",
];

/// Irregular participles licensing `has/have/had` as an auxiliary.
const PARTICIPLES: &[&str] = &[
    "been", "done", "gone", "seen", "taken", "given", "shown", "known", "begun", "chosen", "written", "grown",
    "drawn", "undergone", "withdrawn", "broken", "fallen", "eaten", "become", "come", "risen", "driven",
    "forgotten", "hidden", "spoken", "struck", "won", "made", "had", "held", "kept", "led", "left", "lost",
    "met", "paid", "put", "read", "said", "sent", "set", "spent", "stood", "taught", "told", "thought",
    "understood", "found", "felt", "brought", "bought", "cut", "let", "quit", "run", "split", "spread",
];

fn capitalize(word: &str) -> String {
    let mut c = word.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

fn is_punct(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

#[derive(Debug, Clone)]
struct Token {
    lead: String,
    core: String,
    trail: String,
}

impl Token {
    fn parse(raw: &str) -> Token {
        let core_start = raw.find(|c: char| !is_punct(c)).unwrap_or(raw.len());
        let core_end = raw
            .char_indices()
            .rev()
            .find(|(_, c)| !is_punct(*c))
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(core_start)
            .max(core_start);
        Token {
            lead: raw[..core_start].to_string(),
            core: raw[core_start..core_end].to_string(),
            trail: raw[core_end..].to_string(),
        }
    }

    fn word(w: &str) -> Token {
        Token {
            lead: String::new(),
            core: w.to_string(),
            trail: String::new(),
        }
    }

    fn lower(&self) -> String {
        self.core.to_lowercase().replace('’', "'")
    }

    fn render(&self) -> String {
        format!("{}{}{}", self.lead, self.core, self.trail)
    }

    /// Replaces the core, carrying over an initial capital.
    fn recased(&self, word: &str) -> Token {
        let capital = self.core.chars().next().is_some_and(char::is_uppercase);
        let core = if capital { capitalize(word) } else { word.to_string() };
        Token {
            lead: self.lead.clone(),
            core,
            trail: self.trail.clone(),
        }
    }

    fn ends_clause(&self) -> bool {
        self.trail.chars().any(|c| matches!(c, ',' | ';' | ':' | '.' | '!' | '?' | ')'))
    }
}

fn is_preverbal(word: &str) -> bool {
    PREVERBAL.contains(&word)
}

#[derive(Debug, Clone, Copy)]
enum Site {
    /// Auxiliary at index, already followed by `not` (index of `not`) or not.
    Aux { at: usize, negated: Negated },
    Lexical { at: usize, form: Form },
}

#[derive(Debug, Clone, Copy)]
enum Negated {
    No,
    FollowingNot(usize),
    Contracted,
}

fn next_non_adverb(tokens: &[Token], from: usize) -> Option<usize> {
    (from..tokens.len()).find(|&i| !is_preverbal(&tokens[i].lower()))
}

fn looks_participle(word: &str) -> bool {
    PARTICIPLES.contains(&word) || (word.len() >= 4 && word.ends_with("ed"))
}

fn is_verb_form(word: &str) -> bool {
    VERBS.analyze(word).is_some()
}

fn aux_site(tokens: &[Token], i: usize) -> Option<Site> {
    let w = tokens[i].lower();
    if NEGATED_AUXILIARIES.iter().any(|(neg, _)| *neg == w) {
        return Some(Site::Aux {
            at: i,
            negated: Negated::Contracted,
        });
    }
    if !AUXILIARIES.contains(&w.as_str()) {
        return None;
    }
    if tokens.get(i + 1).is_some_and(|t| t.lower() == "not" && t.lead.is_empty()) && !tokens[i].ends_clause() {
        return Some(Site::Aux {
            at: i,
            negated: Negated::FollowingNot(i + 1),
        });
    }
    if matches!(w.as_str(), "has" | "have" | "had") {
        // Lexical possession is handled by do-support.
        let next = next_non_adverb(tokens, i + 1)?;
        if !looks_participle(&tokens[next].lower()) {
            return None;
        }
    }
    Some(Site::Aux {
        at: i,
        negated: Negated::No,
    })
}

fn lexical_site(tokens: &[Token], i: usize) -> Option<Site> {
    if i == 0 {
        return None;
    }
    let w = tokens[i].lower();
    let prev = &tokens[i - 1];
    if NOMINAL_CONTEXT.contains(&prev.lower().as_str()) || prev.ends_clause() || !tokens[i].lead.is_empty() {
        return None;
    }
    if let Some(next) = tokens.get(i + 1) {
        let n = next.lower();
        if !tokens[i].ends_clause() && (n == "of" || (is_verb_form(&n) && !is_preverbal(&n))) {
            return None;
        }
    }
    if let Some((_, form)) = VERBS.analyze(&w) {
        return Some(Site::Lexical { at: i, form });
    }
    if w.len() > 4 && w.ends_with("ed") && w.chars().all(|c| c.is_alphabetic()) {
        return Some(Site::Lexical { at: i, form: Form::Past });
    }
    None
}

/// Whether `i` sits in the verb group of a preceding auxiliary.
fn governed_by_aux(tokens: &[Token], i: usize) -> bool {
    let mut j = i;
    while j > 0 {
        j -= 1;
        let w = tokens[j].lower();
        if tokens[j].ends_clause() {
            return false;
        }
        if AUXILIARIES.contains(&w.as_str()) || NEGATED_AUXILIARIES.iter().any(|(neg, _)| *neg == w) {
            return true;
        }
        if w != "not" && !is_preverbal(&w) {
            return false;
        }
    }
    false
}

fn base_form(word: &str) -> (String, bool) {
    match VERBS.analyze(word) {
        Some((entry, _)) => (entry.base.clone(), false),
        None => match strip_ed(word) {
            Some(stem) => (stem, true),
            None => (word.to_string(), true),
        },
    }
}

fn inflect(base: &str, form: Form) -> (String, bool) {
    let known = VERBS.entry(base).is_some();
    (VERBS.inflect(base, form), !known)
}

/// Inverts the polarity of `text` at its first negation site.
pub fn negate_statement(text: &str) -> Result<Negation, AugmentError> {
    let mut tokens: Vec<Token> = text.split_whitespace().map(Token::parse).collect();

    let aux_sites: Vec<Site> = (0..tokens.len()).filter_map(|i| aux_site(&tokens, i)).collect();
    let lexical_sites: Vec<Site> = (0..tokens.len())
        .filter(|&i| aux_sites.iter().all(|s| !matches!(s, Site::Aux { at, .. } if *at == i)))
        .filter(|&i| !governed_by_aux(&tokens, i))
        .filter_map(|i| lexical_site(&tokens, i))
        .collect();
    let site_count = aux_sites.len() + lexical_sites.len();
    let site = aux_sites
        .first()
        .or_else(|| lexical_sites.first())
        .copied()
        .ok_or_else(|| AugmentError::NoNegationSite(text.to_string()))?;
    let mut low_confidence = site_count > 1;

    let rule = match site {
        Site::Aux { at, negated: Negated::No } if tokens[at].lower() == "can" && tokens[at].trail.is_empty() => {
            tokens[at] = tokens[at].recased("cannot");
            NegationRule::AuxiliaryInsert
        }
        Site::Aux { at, negated: Negated::No } => {
            let not = Token {
                lead: String::new(),
                core: "not".into(),
                trail: std::mem::take(&mut tokens[at].trail),
            };
            tokens.insert(at + 1, not);
            NegationRule::AuxiliaryInsert
        }
        Site::Aux { at, negated } => {
            let aux = tokens[at].lower();
            let positive = NEGATED_AUXILIARIES
                .iter()
                .find(|(neg, _)| *neg == aux)
                .map(|(_, pos)| *pos)
                .unwrap_or(aux.as_str())
                .to_string();
            let not_at = match negated {
                Negated::FollowingNot(n) => Some(n),
                _ => None,
            };
            let do_form = match positive.as_str() {
                "do" => Some(Form::Base),
                "does" => Some(Form::Third),
                "did" => Some(Form::Past),
                _ => None,
            };
            match do_form {
                Some(form) => {
                    let end = not_at.unwrap_or(at) + 1;
                    let verb_at = next_non_adverb(&tokens, end)
                        .ok_or_else(|| AugmentError::NoNegationSite(text.to_string()))?;
                    let (base, guessed_base) = base_form(&tokens[verb_at].lower());
                    let (inflected, guessed) = inflect(&base, form);
                    low_confidence |= guessed || guessed_base;
                    let trail = tokens[end - 1].trail.clone();
                    tokens[verb_at] = tokens[verb_at].recased(&inflected);
                    // Carry the auxiliary's capital onto whatever now leads.
                    let capital = tokens[at].core.chars().next().is_some_and(char::is_uppercase);
                    let lead = tokens[at].lead.clone();
                    tokens.drain(at..end);
                    if let Some(first) = tokens.get_mut(at) {
                        first.lead = format!("{lead}{}", first.lead);
                        if capital {
                            first.core = capitalize(&first.core);
                        }
                    }
                    if !trail.is_empty() && at > 0 {
                        tokens[at - 1].trail.push_str(&trail);
                    }
                    NegationRule::DoSupportRemove
                }
                None => {
                    match not_at {
                        Some(n) => {
                            let trail = tokens[n].trail.clone();
                            tokens.remove(n);
                            tokens[at].trail.push_str(&trail);
                        }
                        None => tokens[at] = tokens[at].recased(&positive),
                    }
                    NegationRule::AuxiliaryRemove
                }
            }
        }
        Site::Lexical { at, form } => {
            let (base, guessed) = base_form(&tokens[at].lower());
            low_confidence |= guessed;
            let mut insert_at = at;
            while insert_at > 1
                && is_preverbal(&tokens[insert_at - 1].lower())
                && !tokens[insert_at - 1].ends_clause()
                && !tokens[insert_at - 2].ends_clause()
            {
                insert_at -= 1;
            }
            tokens[at] = tokens[at].recased(&base);
            let aux = match form {
                Form::Past => "did",
                Form::Third => "does",
                Form::Base => "do",
            };
            tokens.splice(insert_at..insert_at, [Token::word(aux), Token::word("not")]);
            NegationRule::DoSupportInsert
        }
    };

    Ok(Negation {
        text: tokens.iter().map(Token::render).collect::<Vec<_>>().join(" "),
        rule,
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neg(s: &str) -> String {
        negate_statement(s).unwrap().text
    }

    #[test]
    fn both_trials_statement() {
        let out = negate_statement(
            "The primary trial and the secondary trial both used MRI for their interventions.",
        )
        .unwrap();
        assert_eq!(
            out.text,
            "The primary trial and the secondary trial did not both use MRI for their interventions."
        );
        assert_eq!(out.rule, NegationRule::DoSupportInsert);
        assert_eq!(
            neg(&out.text),
            "The primary trial and the secondary trial both used MRI for their interventions."
        );
    }

    #[test]
    fn copula_both_directions() {
        assert_eq!(neg("Patients are eligible."), "Patients are not eligible.");
        assert_eq!(neg("Patients are not eligible."), "Patients are eligible.");
        assert_eq!(neg("Patients aren't eligible."), "Patients are eligible.");
    }

    #[test]
    fn do_support_forms() {
        assert_eq!(neg("The trial includes men."), "The trial does not include men.");
        assert_eq!(neg("The trial does not include men."), "The trial includes men.");
        assert_eq!(neg("Both arms receive letrozole."), "Both arms do not receive letrozole.");
        assert_eq!(neg("Patients had nausea."), "Patients did not have nausea.");
        assert_eq!(neg("Patients did not have nausea."), "Patients had nausea.");
        assert_eq!(neg("The cohort didn't stop treatment."), "The cohort stopped treatment.");
    }

    #[test]
    fn perfect_aspect_uses_auxiliary() {
        assert_eq!(neg("The trial has enrolled 40 women."), "The trial has not enrolled 40 women.");
    }

    #[test]
    fn quantities_untouched() {
        assert_eq!(
            neg("In total 12 patients experienced grade 3 neutropenia."),
            "In total 12 patients did not experience grade 3 neutropenia."
        );
    }

    #[test]
    fn no_site_is_an_error() {
        assert!(matches!(negate_statement("Letrozole 12.5 mg daily."), Err(AugmentError::NoNegationSite(_))));
        assert!(matches!(negate_statement(""), Err(AugmentError::NoNegationSite(_))));
    }

    #[test]
    fn coordinated_sentences_are_flagged() {
        let out = negate_statement("The primary trial used MRI and the secondary trial used mammography.").unwrap();
        assert!(out.low_confidence);
        assert_eq!(
            out.text,
            "The primary trial did not use MRI and the secondary trial used mammography."
        );
        assert!(!negate_statement("Patients are eligible.").unwrap().low_confidence);
    }

    #[test]
    fn unknown_verbs_use_heuristics() {
        let out = negate_statement("Most patients tolerated the regimen.").unwrap();
        assert_eq!(out.text, "Most patients did not tolerate the regimen.");
        assert!(out.low_confidence);
    }

    #[test]
    fn rules_are_mutually_inverse() {
        for r in [
            NegationRule::AuxiliaryInsert,
            NegationRule::AuxiliaryRemove,
            NegationRule::DoSupportInsert,
            NegationRule::DoSupportRemove,
        ] {
            assert_eq!(r.inverse().inverse(), r);
        }
    }

    #[test]
    fn modal_can_contracts() {
        assert_eq!(neg("Patients can receive chemotherapy."), "Patients cannot receive chemotherapy.");
        assert_eq!(neg("Patients cannot receive chemotherapy."), "Patients can receive chemotherapy.");
        assert_eq!(neg("Patients can't receive chemotherapy."), "Patients can receive chemotherapy.");
    }

    #[test]
    fn participle_after_auxiliary_is_not_a_second_site() {
        let out = negate_statement("The primary trial is randomized.").unwrap();
        assert_eq!(out.text, "The primary trial is not randomized.");
        assert!(!out.low_confidence);
    }
}
