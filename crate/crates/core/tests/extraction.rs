use std::fs;
use std::path::Path;

use ctr_nli::corpus::Label;
use ctr_nli::inference::{extract_label, LabelLexicon};

#[test]
fn hand_labeled_generations() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/extraction_cases.json");
    let cases: Vec<(String, Label)> = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(cases.len(), 20);
    let lexicon = LabelLexicon::default();
    let wrong: Vec<_> = cases
        .iter()
        .filter(|(text, want)| extract_label(text, &lexicon) != *want)
        .collect();
    assert!(wrong.is_empty(), "{wrong:?}");
}

#[test]
fn custom_lexicon_and_default() {
    let lexicon = LabelLexicon::new(vec!["True".into()], vec!["False".into()], Label::Contradiction).unwrap();
    assert_eq!(extract_label("It is True.", &lexicon), Label::Entailment);
    assert_eq!(extract_label("Yes", &lexicon), Label::Contradiction);
    assert_eq!(extract_label("False", &lexicon), Label::Contradiction);
}
