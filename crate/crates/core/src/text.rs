//! Surface tokenization shared by ROUGE-L, the word statistics of the
//! debiasing filter and the Jaccard verifier mock.

/// Lowercases, drops ASCII punctuation and splits on whitespace.
///
/// Punctuation is removed rather than treated as a separator, so
/// `"man's"` becomes `"mans"`.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}
