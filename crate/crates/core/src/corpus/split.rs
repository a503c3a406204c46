use super::{CorpusError, SectionKind};

/// Cuts the text of one section into spans.
///
/// Titles and figure descriptions are a single span. Claims and abstracts
/// are cut after every `;` or `:` that is followed by whitespace, the
/// delimiter staying with the preceding span. An abstract that yields only
/// one span that way is cut at sentence boundaries instead: `.`, `?` or `!`
/// followed by whitespace and an uppercase letter.
///
/// Whitespace runs inside a span are collapsed to a single space, so spans
/// never carry newlines or leading/trailing blanks.
pub fn split_spans(section_text: &str, kind: SectionKind) -> Result<Vec<String>, CorpusError> {
    if section_text.trim().is_empty() {
        return Err(CorpusError::EmptySection);
    }
    let chars: Vec<char> = section_text.chars().collect();
    let spans = match kind {
        SectionKind::Title | SectionKind::Figure => vec![collapse(section_text)],
        _ => {
            let by_delim = cut(&chars, is_delimiter_cut);
            if by_delim.len() == 1 && kind == SectionKind::Abstract {
                cut(&chars, is_sentence_cut)
            } else {
                by_delim
            }
        }
    };
    Ok(spans)
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_delimiter_cut(chars: &[char], i: usize) -> bool {
    matches!(chars[i], ';' | ':') && chars.get(i + 1).is_some_and(|c| c.is_whitespace())
}

fn is_sentence_cut(chars: &[char], i: usize) -> bool {
    if !matches!(chars[i], '.' | '?' | '!') {
        return false;
    }
    let mut j = i + 1;
    while j < chars.len() && chars[j].is_whitespace() {
        j += 1;
    }
    j > i + 1 && j < chars.len() && chars[j].is_uppercase()
}

/// Splits after every position where `is_cut` holds and drops pieces that
/// are blank after collapsing.
fn cut(chars: &[char], is_cut: fn(&[char], usize) -> bool) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        if is_cut(chars, i) {
            push_piece(&mut out, &chars[start..=i]);
            start = i + 1;
        }
    }
    push_piece(&mut out, &chars[start..]);
    out
}

fn push_piece(out: &mut Vec<String>, piece: &[char]) {
    let s: String = piece.iter().collect();
    let s = collapse(&s);
    if !s.is_empty() {
        out.push(s);
    }
}
