//! Tokenizer for PDDL text. Symbols are case-insensitive and lowercased here.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    LParen,
    RParen,
    /// Identifier, keyword (`:precondition`), or variable (`?x`), lowercased.
    Sym(String),
    /// Integer or decimal number, kept as text.
    Num(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Sym(s) => write!(f, "'{s}'"),
            Tok::Num(s) => write!(f, "'{s}'"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, (String, u32, u32)> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
            }
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '(' => {
                out.push(Token { tok: Tok::LParen, line, col });
                chars.next();
                col += 1;
            }
            ')' => {
                out.push(Token { tok: Tok::RParen, line, col });
                chars.next();
                col += 1;
            }
            c if c.is_ascii_digit()
                || (c == '-' && {
                    let mut it = chars.clone();
                    it.next();
                    it.peek().is_some_and(|d| d.is_ascii_digit())
                }) =>
            {
                let start_col = col;
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' || d == '/' || (s.is_empty() && d == '-') {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Token { tok: Tok::Num(s), line, col: start_col });
            }
            c if is_sym_char(c) => {
                let start_col = col;
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if is_sym_char(d) {
                        s.push(d.to_ascii_lowercase());
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Token { tok: Tok::Sym(s), line, col: start_col });
            }
            other => return Err((format!("unexpected character '{other}'"), line, col)),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

fn is_sym_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '?' | ':' | '=' | '<' | '>' | '*' | '+' | '.')
}
