use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use super::conversation::{serialize_conversation, Conversation};
use super::{InstructError, MoleculeContext};

pub const CAPTION_TEMPLATE: &str = "You are an AI chemical assistant, and you are seeing a single molecule. What you see is provided with SMILES representation of the molecule and sentences describing the same molecule you are analyzing. Answer all questions as you are seeing the molecule.
Ask diverse questions and give corresponding answers.
Include questions asking about the detailed information of the molecule, including the class, conjugate acid/base, functional groups, chemical role, etc.
Do not ask any question that cannot be answered confidently.

Molecule SMILES: {SMILES}
Caption: {CAPTION}
Conversation:
";

pub const CAPTION_IUPAC_TEMPLATE: &str = "You are an AI chemical assistant, and you are seeing a single molecule. What you see is provided with SMILES representation of the molecule and sentences describing the same molecule you are analyzing. In addition, the IUPAC name of the molecule is given. Answer all questions as you are seeing the molecule.
Ask diverse questions and give corresponding answers.
Include questions asking about the detailed information of the molecule, including the class, conjugate acid/base, functional groups, chemical role, etc.
Do not ask any questions that cannot be answered confidently.

Molecule SMILES: {SMILES}
Caption: {CAPTION}
IUPAC: {IUPAC}
Conversation:
";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    #[default]
    #[serde(rename = "caption")]
    Caption,
    #[serde(rename = "caption+iupac")]
    CaptionIupac,
}

impl TemplateId {
    pub fn name(self) -> &'static str {
        match self {
            TemplateId::Caption => "caption",
            TemplateId::CaptionIupac => "caption+iupac",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::Caption => CAPTION_TEMPLATE,
            TemplateId::CaptionIupac => CAPTION_IUPAC_TEMPLATE,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateId {
    type Err = InstructError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "caption" => Ok(TemplateId::Caption),
            "caption+iupac" => Ok(TemplateId::CaptionIupac),
            other => Err(InstructError::UnknownTemplate(other.to_string())),
        }
    }
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{(SMILES|CAPTION|IUPAC)\}").expect("valid regex"))
}

/// Fills the template in one pass, so placeholder-like text inside the
/// context values is left alone.
pub fn render(template: TemplateId, ctx: &MoleculeContext) -> Result<String, InstructError> {
    let iupac = match template {
        TemplateId::CaptionIupac => Some(ctx.iupac.as_deref().ok_or(InstructError::MissingField("iupac"))?),
        TemplateId::Caption => None,
    };
    Ok(placeholder()
        .replace_all(template.text(), |c: &Captures| match &c[1] {
            "SMILES" => ctx.smiles.clone(),
            "CAPTION" => ctx.caption.clone(),
            _ => iupac.unwrap_or_default().to_string(),
        })
        .into_owned())
}

fn render_exemplar(ex: &Conversation, template: TemplateId) -> String {
    let mut s = String::new();
    if let Some(ctx) = &ex.source_context {
        s.push_str(&format!("Molecule SMILES: {}\nCaption: {}\n", ctx.smiles, ctx.caption));
        if template == TemplateId::CaptionIupac {
            if let Some(i) = &ctx.iupac {
                s.push_str(&format!("IUPAC: {i}\n"));
            }
        }
    }
    s.push_str("Conversation:\n");
    s.push_str(&serialize_conversation(ex));
    s.push_str("\n\n");
    s
}

/// Exemplar conversations, each with its own context block, followed by the
/// filled template.
pub fn build_prompt(ctx: &MoleculeContext, exemplars: &[Conversation], template: TemplateId) -> Result<String, InstructError> {
    let body = render(template, ctx)?;
    let mut out: String = exemplars.iter().map(|e| render_exemplar(e, template)).collect();
    out.push_str(&body);
    Ok(out)
}

pub fn build_prompt_named(ctx: &MoleculeContext, exemplars: &[Conversation], template: &str) -> Result<String, InstructError> {
    build_prompt(ctx, exemplars, template.parse()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> MoleculeContext {
        MoleculeContext { smiles: "CCO".into(), caption: "An alcohol {SMILES}.".into(), iupac: None }
    }

    #[test]
    fn substitution_is_literal() {
        let p = build_prompt(&ctx(), &[], TemplateId::Caption).unwrap();
        assert_eq!(p, CAPTION_TEMPLATE.replace("{SMILES}", "CCO").replace("{CAPTION}", "An alcohol {SMILES}."));
        assert_eq!(p.matches("CCO").count(), 1);
    }

    #[test]
    fn iupac_required() {
        assert_eq!(build_prompt(&ctx(), &[], TemplateId::CaptionIupac), Err(InstructError::MissingField("iupac")));
        let mut c = ctx();
        c.iupac = Some("ethanol".into());
        let p = build_prompt(&c, &[], TemplateId::CaptionIupac).unwrap();
        assert!(p.contains("IUPAC: ethanol\nConversation:\n"));
        assert!(!p.contains("{IUPAC}") && !p.contains("{CAPTION}"));
    }

    #[test]
    fn unknown_template() {
        assert_eq!(build_prompt_named(&ctx(), &[], "smiles-only"), Err(InstructError::UnknownTemplate("smiles-only".into())));
    }
}
