use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::corpus::{resolve_evidence, CorpusStore, Label, Split};
use crate::inference::LabelLexicon;
use crate::prompt::PromptSkeleton;

/// One supervised fine-tuning example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub prompt: String,
    pub completion: String,
}

/// Renders one record per instance, completing the prompt with the answer
/// token of its gold label.
pub fn export_finetune_dataset(
    split: &Split,
    skeleton: &PromptSkeleton,
    corpus: &CorpusStore,
    lexicon: &LabelLexicon,
) -> Result<Vec<FinetuneRecord>, AugmentError> {
    split
        .instances()
        .iter()
        .map(|inst| {
            let gold = inst.gold.ok_or_else(|| AugmentError::UnlabeledInstance(inst.id.clone()))?;
            let evidence = resolve_evidence(inst, corpus)?;
            let prompt = skeleton.render(&evidence, &inst.statement)?;
            let answer = match gold {
                Label::Entailment => &lexicon.entail_tokens()[0],
                Label::Contradiction => &lexicon.contra_tokens()[0],
            };
            Ok(FinetuneRecord {
                prompt,
                completion: format!(" {answer}"),
            })
        })
        .collect()
}

pub fn records_to_jsonl(records: &[FinetuneRecord], mut out: impl Write) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
