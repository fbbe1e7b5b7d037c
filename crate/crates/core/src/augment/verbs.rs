//! Verb inflection tables for the negation rules.

use std::collections::HashMap;
use std::sync::LazyLock;

/// Irregular verbs as (base, third person singular, past).
const IRREGULAR: &[(&str, &str, &str)] = &[
    ("arise", "arises", "arose"),
    ("become", "becomes", "became"),
    ("begin", "begins", "began"),
    ("bleed", "bleeds", "bled"),
    ("break", "breaks", "broke"),
    ("bring", "brings", "brought"),
    ("buy", "buys", "bought"),
    ("choose", "chooses", "chose"),
    ("come", "comes", "came"),
    ("cost", "costs", "cost"),
    ("cut", "cuts", "cut"),
    ("draw", "draws", "drew"),
    ("drink", "drinks", "drank"),
    ("drive", "drives", "drove"),
    ("eat", "eats", "ate"),
    ("fall", "falls", "fell"),
    ("feed", "feeds", "fed"),
    ("feel", "feels", "felt"),
    ("fight", "fights", "fought"),
    ("find", "finds", "found"),
    ("forget", "forgets", "forgot"),
    ("get", "gets", "got"),
    ("give", "gives", "gave"),
    ("go", "goes", "went"),
    ("grow", "grows", "grew"),
    ("have", "has", "had"),
    ("hear", "hears", "heard"),
    ("hide", "hides", "hid"),
    ("hold", "holds", "held"),
    ("hurt", "hurts", "hurt"),
    ("keep", "keeps", "kept"),
    ("know", "knows", "knew"),
    ("lead", "leads", "led"),
    ("leave", "leaves", "left"),
    ("let", "lets", "let"),
    ("lose", "loses", "lost"),
    ("make", "makes", "made"),
    ("mean", "means", "meant"),
    ("meet", "meets", "met"),
    ("overcome", "overcomes", "overcame"),
    ("pay", "pays", "paid"),
    ("put", "puts", "put"),
    ("quit", "quits", "quit"),
    ("read", "reads", "read"),
    ("rise", "rises", "rose"),
    ("run", "runs", "ran"),
    ("say", "says", "said"),
    ("see", "sees", "saw"),
    ("seek", "seeks", "sought"),
    ("sell", "sells", "sold"),
    ("send", "sends", "sent"),
    ("set", "sets", "set"),
    ("shake", "shakes", "shook"),
    ("shut", "shuts", "shut"),
    ("sit", "sits", "sat"),
    ("speak", "speaks", "spoke"),
    ("spend", "spends", "spent"),
    ("split", "splits", "split"),
    ("spread", "spreads", "spread"),
    ("stand", "stands", "stood"),
    ("strike", "strikes", "struck"),
    ("take", "takes", "took"),
    ("teach", "teaches", "taught"),
    ("tell", "tells", "told"),
    ("think", "thinks", "thought"),
    ("undergo", "undergoes", "underwent"),
    ("understand", "understands", "understood"),
    ("win", "wins", "won"),
    ("withdraw", "withdraws", "withdrew"),
    ("write", "writes", "wrote"),
];

/// Regular verbs whose past doubles the final consonant.
const DOUBLING: &[(&str, &str)] = &[
    ("admit", "admitted"),
    ("commit", "committed"),
    ("control", "controlled"),
    ("drop", "dropped"),
    ("occur", "occurred"),
    ("omit", "omitted"),
    ("permit", "permitted"),
    ("plan", "planned"),
    ("prefer", "preferred"),
    ("refer", "referred"),
    ("stop", "stopped"),
    ("submit", "submitted"),
    ("transfer", "transferred"),
];

/// Common regular verbs of trial reporting.
const REGULAR: &[&str] = &[
    "accept", "achieve", "administer", "affect", "allow", "analyze", "appear", "apply", "assess", "assign",
    "benefit", "calculate", "cause", "combine", "compare", "complete", "confirm", "consider", "contain",
    "continue", "contradict", "cure", "decrease", "deliver", "demonstrate", "describe", "detect", "develop",
    "diagnose", "die", "differ", "discontinue", "display", "employ", "enroll", "evaluate", "examine",
    "exceed", "exclude", "experience", "explore", "fail", "follow", "focus", "help", "improve", "include",
    "increase", "indicate", "infuse", "inject", "investigate", "involve", "lack", "last", "list", "live",
    "mandate", "match", "measure", "mention", "monitor", "need", "obtain", "observe", "outperform", "pass",
    "prescribe", "present", "prevent", "produce", "prohibit", "prolong", "provide", "qualify", "randomize",
    "reach", "receive", "recommend", "record", "recruit", "reduce", "rely", "remain", "report", "require",
    "respond", "restrict", "result", "return", "share", "show", "specify", "start", "state", "study",
    "suffer", "suggest", "support", "target", "test", "treat", "use", "utilize", "worsen",
];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Third person singular by regular spelling rules.
pub fn regular_third(base: &str) -> String {
    let mut chars = base.chars().rev();
    let last = chars.next();
    let before = chars.next();
    if ["s", "x", "z", "ch", "sh", "o"].iter().any(|e| base.ends_with(e)) {
        format!("{base}es")
    } else if last == Some('y') && before.is_some_and(|c| !is_vowel(c)) {
        format!("{}ies", &base[..base.len() - 1])
    } else {
        format!("{base}s")
    }
}

/// Past tense by regular spelling rules (no consonant doubling).
pub fn regular_past(base: &str) -> String {
    let mut chars = base.chars().rev();
    let last = chars.next();
    let before = chars.next();
    if last == Some('e') {
        format!("{base}d")
    } else if last == Some('y') && before.is_some_and(|c| !is_vowel(c)) {
        format!("{}ied", &base[..base.len() - 1])
    } else {
        format!("{base}ed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Base,
    Third,
    Past,
}

#[derive(Debug, Clone)]
pub struct VerbEntry {
    pub base: String,
    pub third: String,
    pub past: String,
}

impl VerbEntry {
    pub fn inflect(&self, form: Form) -> &str {
        match form {
            Form::Base => &self.base,
            Form::Third => &self.third,
            Form::Past => &self.past,
        }
    }
}

pub struct VerbTable {
    by_base: HashMap<String, VerbEntry>,
    /// Inflected surface form → (base, form). Past wins over base when the
    /// two coincide ("cut", "put").
    by_form: HashMap<String, (String, Form)>,
}

impl VerbTable {
    fn build() -> Self {
        let mut entries: Vec<VerbEntry> = IRREGULAR
            .iter()
            .map(|(b, t, p)| VerbEntry {
                base: b.to_string(),
                third: t.to_string(),
                past: p.to_string(),
            })
            .collect();
        entries.extend(DOUBLING.iter().map(|(b, p)| VerbEntry {
            base: b.to_string(),
            third: regular_third(b),
            past: p.to_string(),
        }));
        entries.extend(REGULAR.iter().map(|b| VerbEntry {
            base: b.to_string(),
            third: regular_third(b),
            past: regular_past(b),
        }));

        let mut by_form = HashMap::new();
        for e in &entries {
            by_form.insert(e.base.clone(), (e.base.clone(), Form::Base));
            by_form.insert(e.third.clone(), (e.base.clone(), Form::Third));
        }
        for e in &entries {
            by_form.insert(e.past.clone(), (e.base.clone(), Form::Past));
        }
        let by_base = entries.into_iter().map(|e| (e.base.clone(), e)).collect();
        Self { by_base, by_form }
    }

    /// Looks up a lowercase surface form.
    pub fn analyze(&self, word: &str) -> Option<(&VerbEntry, Form)> {
        let (base, form) = self.by_form.get(word)?;
        Some((&self.by_base[base], *form))
    }

    pub fn entry(&self, base: &str) -> Option<&VerbEntry> {
        self.by_base.get(base)
    }

    pub fn len(&self) -> usize {
        self.by_base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_base.is_empty()
    }

    /// Inflects a base form, falling back to regular spelling for unknown verbs.
    pub fn inflect(&self, base: &str, form: Form) -> String {
        match self.entry(base) {
            Some(e) => e.inflect(form).to_string(),
            None => match form {
                Form::Base => base.to_string(),
                Form::Third => regular_third(base),
                Form::Past => regular_past(base),
            },
        }
    }
}

pub static VERBS: LazyLock<VerbTable> = LazyLock::new(VerbTable::build);

/// Best-effort base form of an unknown `-ed` word.
pub fn strip_ed(word: &str) -> Option<String> {
    let stem = word.strip_suffix("ed")?;
    if stem.len() < 3 {
        return None;
    }
    if let Some(s) = word.strip_suffix("ied") {
        return Some(format!("{s}y"));
    }
    let bytes = stem.as_bytes();
    let (a, b) = (bytes[bytes.len() - 2], bytes[bytes.len() - 1]);
    if a == b && !matches!(b, b'l' | b's' | b'f' | b'z') && !is_vowel(b as char) {
        return Some(stem[..stem.len() - 1].to_string());
    }
    let c = bytes.len().checked_sub(3).map(|i| bytes[i] as char);
    let consonant_before = c.is_some_and(|c| !is_vowel(c));
    let e_dropped = matches!(b, b'v' | b'z' | b'c' | b'g' | b'u')
        || (is_vowel(a as char) && b == b's')
        || (a == b'a' && b == b't' && !matches!(c, Some('e' | 'o' | 'a')))
        || (a == b'u' && b == b't' && consonant_before)
        || (a == b'i' && b == b'n' && consonant_before)
        || (a == b'u' && b == b'r' && consonant_before)
        || (a == b'y' && matches!(b, b's' | b'z'));
    if e_dropped {
        return Some(format!("{stem}e"));
    }
    Some(stem.to_string())
}
