use serde_json::Value;

use super::{
    ClarificationRequest, ExtractionError, ExtractionResult, MissingField, Outcome, RejectionNotice,
};
use crate::intent::validate;
use crate::skills::SkillSet;

/// Locates the first balanced JSON object in `text`, ignoring braces in strings.
fn first_json_object(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = text[start..].find('{') {
        let open = start + offset;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (k, &b) in bytes[open..].iter().enumerate() {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        if let Ok(v) = serde_json::from_str(&text[open..=open + k]) {
                            return Some(v);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        start = open + 1;
    }
    None
}

fn strings(v: Option<&Value>) -> Vec<String> {
    v.and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default()
}

/// Converts raw model output into an outcome validated against `skills`.
/// Code fences and surrounding prose are tolerated.
pub fn parse_llm_response(
    text: &str,
    skills: &SkillSet,
) -> Result<ExtractionResult, ExtractionError> {
    let value = first_json_object(text).ok_or_else(|| ExtractionError::UnparseableResponse {
        excerpt: text.chars().take(120).collect(),
    })?;

    let outcome = if let Some(c) = value.get("clarification") {
        let mut missing: Vec<MissingField> = strings(c.get("missing_fields"))
            .iter()
            .filter_map(|f| f.parse().ok())
            .collect();
        missing.sort();
        missing.dedup();
        Outcome::Clarification(ClarificationRequest {
            missing_fields: missing,
            question: c.get("question").and_then(Value::as_str).unwrap_or_default().to_string(),
        })
    } else if let Some(r) = value.get("rejection") {
        Outcome::Rejection(RejectionNotice {
            unresolved_terms: strings(r.get("unresolved_terms")),
            message: r.get("message").and_then(Value::as_str).unwrap_or_default().to_string(),
        })
    } else {
        let intent_value = value.get("research_intent").or_else(|| value.get("intent")).unwrap_or(&value);
        Outcome::Intent(
            validate(intent_value, skills)
                .map_err(|violations| ExtractionError::SchemaViolation { violations })?,
        )
    };

    Ok(ExtractionResult {
        outcome,
        skill_fingerprint: skills.fingerprint().to_string(),
        extractor_id: "llm".into(),
        elapsed_ms: 0,
        token_cost: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::intent::IntentViolation;
    use crate::skills::{select_skillset, SkillConfig};

    fn s3() -> SkillSet {
        select_skillset(SkillConfig::S3, &assets::skill_library()).unwrap()
    }

    const INTENT: &str = r#"{"analysis_type":"multi_population","populations":["GBR","FIN"],"chromosomes":null,"regions":[{"name":"BRCA1","chromosome":"17","start":41196312,"end":41277500}],"focus":"all_variants"}"#;

    #[test]
    fn fenced_and_prose_wrapped() {
        let text = format!("Here is the intent:\n```json\n{INTENT}\n```\nDone {{not json}}");
        let r = parse_llm_response(&text, &s3()).unwrap();
        assert_eq!(r.intent().unwrap().populations, ["FIN", "GBR"]);
    }

    #[test]
    fn braces_inside_strings() {
        let text = r#"{"clarification":{"missing_fields":["populations"],"question":"which {pop}?"}}"#;
        match parse_llm_response(text, &s3()).unwrap().outcome {
            Outcome::Clarification(c) => {
                assert_eq!(c.missing_fields, [MissingField::Populations]);
                assert_eq!(c.question, "which {pop}?");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejection_shape() {
        let text = r#"{"rejection":{"unresolved_terms":["HBP"],"message":"unknown"}}"#;
        match parse_llm_response(text, &s3()).unwrap().outcome {
            Outcome::Rejection(r) => assert_eq!(r.unresolved_terms, ["HBP"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unparseable() {
        assert!(matches!(
            parse_llm_response("I cannot help with that.", &s3()),
            Err(ExtractionError::UnparseableResponse { .. })
        ));
    }

    #[test]
    fn schema_violation_lists_problems() {
        let text = INTENT.replace("\"GBR\"", "\"XXX\"");
        match parse_llm_response(&text, &s3()) {
            Err(ExtractionError::SchemaViolation { violations }) => {
                assert!(violations.contains(&IntentViolation::UnknownPopulationCode { code: "XXX".into() }))
            }
            other => panic!("{other:?}"),
        }
    }
}
