//! Small string helpers shared by the loaders, renderers and parser.

/// Trim and collapse every whitespace run (including newlines) to one space.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Uppercase the first character when it is an ASCII lowercase letter.
pub fn upper_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {
            let mut out = String::with_capacity(s.len());
            out.push(c.to_ascii_uppercase());
            out.push_str(chars.as_str());
            out
        }
        _ => s.to_string(),
    }
}

/// Lowercase the first character when it is an ASCII uppercase letter.
pub fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {
            let mut out = String::with_capacity(s.len());
            out.push(c.to_ascii_lowercase());
            out.push_str(chars.as_str());
            out
        }
        _ => s.to_string(),
    }
}

pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

/// Strip trailing punctuation and whitespace.
pub fn trim_end_punct(s: &str) -> &str {
    s.trim_end_matches(|c: char| c.is_whitespace() || is_punct(c))
}

/// Lowercased, whitespace-collapsed form with punctuation stripped from both ends.
pub fn normalize_label_text(s: &str) -> String {
    let trimmed = s.trim_matches(|c: char| c.is_whitespace() || is_punct(c));
    collapse_whitespace(trimmed).to_lowercase()
}
