use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Punctuation marks that are always split off into their own token.
pub const PUNCTUATION: [char; 9] = ['.', ',', ';', ':', '!', '?', '"', '(', ')'];

/// Marks that attach to the preceding token when detokenizing.
const CLOSING: [char; 7] = ['.', ',', ';', ':', '!', '?', ')'];

/// Whitespace + punctuation tokenizer.
///
/// Stateless: splits on Unicode whitespace and detaches every mark in
/// [`PUNCTUATION`] into a single-character token. Casing is untouched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tokenizer;

impl Tokenizer {
    /// Scheme name as written in model configuration files.
    pub const SCHEME: &'static str = "whitespace-punct";

    pub fn new() -> Self {
        Tokenizer
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        for word in text.split_whitespace() {
            let mut current = String::new();
            for ch in word.chars() {
                if PUNCTUATION.contains(&ch) {
                    if !current.is_empty() {
                        tokens.push(core::mem::take(&mut current));
                    }
                    tokens.push(ch.to_string());
                } else {
                    current.push(ch);
                }
            }
            if !current.is_empty() {
                tokens.push(current);
            }
        }
        tokens
    }

    /// Joins tokens with single spaces, re-attaching punctuation.
    ///
    /// Closing marks (`. , ; : ! ? )`) attach to the left, `(` attaches to
    /// the right. Double quotes alternate: odd occurrences open (attach
    /// right), even occurrences close (attach left).
    pub fn detokenize<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        let mut out = String::new();
        let mut glue_next = false;
        let mut open_quote = false;
        for tok in tokens {
            let tok = tok.as_ref();
            let mut attach_left = false;
            let mut attach_right = false;
            if tok == "\"" {
                if open_quote {
                    attach_left = true;
                } else {
                    attach_right = true;
                }
                open_quote = !open_quote;
            } else if tok == "(" {
                attach_right = true;
            } else if tok.chars().count() == 1 && CLOSING.contains(&tok.chars().next().unwrap()) {
                attach_left = true;
            }
            if !out.is_empty() && !attach_left && !glue_next {
                out.push(' ');
            }
            out.push_str(tok);
            glue_next = attach_right;
        }
        out
    }
}
