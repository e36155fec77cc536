//! Extraction of JSON payloads from noisy LLM output.
//!
//! Models wrap their JSON in code fences, prose, or both. The tolerance
//! tiers are fixed: strip fences, then bracket-scan for the first balanced
//! candidate that actually parses. No self-repair beyond that.

use serde_json::Value;

/// If the text contains a fenced code block, return the fence contents
/// (language tag dropped); otherwise return the input unchanged.
pub(crate) fn strip_code_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text;
    };
    let after_fence = &text[open + 3..];
    // Skip an optional language tag up to the end of the fence line.
    let body_start = match after_fence.find('\n') {
        Some(nl) => nl + 1,
        None => return text,
    };
    let body = &after_fence[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// First balanced JSON array in the text that parses, scanning left to right.
pub(crate) fn first_json_array(text: &str) -> Option<Value> {
    first_json_value(text, '[')
}

/// First balanced JSON object in the text that parses, scanning left to right.
pub(crate) fn first_json_object(text: &str) -> Option<Value> {
    first_json_value(text, '{')
}

fn first_json_value(text: &str, opener: char) -> Option<Value> {
    let mut search_from = 0usize;
    while let Some(rel) = text[search_from..].find(opener) {
        let start = search_from + rel;
        if let Some(candidate) = balanced_span(&text[start..]) {
            if let Ok(value) = serde_json::from_str::<Value>(candidate) {
                return Some(value);
            }
        }
        search_from = start + opener.len_utf8();
    }
    None
}

/// The balanced bracket span starting at byte 0 of `text`, if one closes.
/// String literals and escapes are respected so brackets inside strings
/// don't count.
fn balanced_span(text: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '[' | '{' => depth += 1,
            ']' | '}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(&text[..i + c.len_utf8()]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Up to `limit` characters of the raw text, for error excerpts.
pub(crate) fn excerpt(text: &str, limit: usize) -> String {
    text.chars().take(limit).collect()
}
