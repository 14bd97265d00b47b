//! Lexer for the transformation language.
//!
//! Total over arbitrary text: bytes that start no known token become
//! single-character `Unknown` tokens, and `#` swallows the rest of its line
//! as one `Comment` token.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Number,
    Dollar,
    Equals,
    Comma,
    LBracket,
    RBracket,
    Comment,
    Newline,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of the first byte of the token.
    pub start: usize,
}

pub fn lex(source: &str) -> Vec<Token<'_>> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let kind = match b {
            b' ' | b'\t' | b'\r' => {
                i += 1;
                continue;
            }
            b'\n' => {
                i += 1;
                TokenKind::Newline
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                TokenKind::Comment
            }
            b'$' => {
                i += 1;
                TokenKind::Dollar
            }
            b'=' => {
                i += 1;
                TokenKind::Equals
            }
            b',' => {
                i += 1;
                TokenKind::Comma
            }
            b'[' => {
                i += 1;
                TokenKind::LBracket
            }
            b']' => {
                i += 1;
                TokenKind::RBracket
            }
            b'-' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i += 1;
                i = scan_number(bytes, i);
                TokenKind::Number
            }
            b'0'..=b'9' => {
                i = scan_number(bytes, i);
                TokenKind::Number
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Word
            }
            _ => {
                // One whole character, so multi-byte UTF-8 stays intact.
                let ch = source[i..].chars().next().map_or(1, char::len_utf8);
                i += ch;
                TokenKind::Unknown
            }
        };
        out.push(Token {
            kind,
            text: &source[start..i],
            start,
        });
    }
    out
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    i
}

/// Token texts without line breaks; the unit of BLEU comparison.
pub fn tokenize(source: &str) -> Vec<String> {
    lex(source)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Newline)
        .map(|t| t.text.to_string())
        .collect()
}
