use std::collections::BTreeSet;

/// Splits on every run of non-alphanumeric characters and lowercases.
///
/// Lowercasing can expand a character (`İ` becomes `i` plus a combining
/// dot); anything that is not itself alphanumeric after folding is dropped
/// so tokens stay purely alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Normalizes free-form terms (e.g. `--require Wi-Fi`) into a set of tokens.
pub fn term_set<I, S>(terms: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    terms.into_iter().flat_map(|t| tokenize(t.as_ref())).collect()
}
