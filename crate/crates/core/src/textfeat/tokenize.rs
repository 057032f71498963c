/// Lowercased alphabetic tokens. Apostrophes survive only between letters,
/// so "don't" stays whole while quotes and possessive tails are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_alphabetic() {
            current.extend(c.to_lowercase());
        } else if (c == '\'' || c == '\u{2019}')
            && !current.is_empty()
            && chars.peek().is_some_and(|n| n.is_alphabetic())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub const QUESTION_WORDS: [&str; 8] = ["what", "where", "when", "which", "who", "whose", "why", "how"];

pub fn question_word_count(tokens: &[String]) -> usize {
    tokens.iter().filter(|t| QUESTION_WORDS.contains(&t.as_str())).count()
}

/// Per-word counts in the order of [`QUESTION_WORDS`].
pub fn question_word_counts(tokens: &[String]) -> [usize; 8] {
    let mut out = [0; 8];
    for t in tokens {
        if let Some(i) = QUESTION_WORDS.iter().position(|w| *w == t) {
            out[i] += 1;
        }
    }
    out
}

/// Number of whitespace-delimited words.
pub fn word_length(text: &str) -> usize {
    text.split_whitespace().count()
}
