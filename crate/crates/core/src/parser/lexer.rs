use num_bigint::BigInt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub offset: usize,
}

const SYMBOLS: [&str; 20] = [
    "::", "->", "=>", "(", ")", "[", "]", "{", "}", "<", ">", ",", ";", ":", ".", "*", "+", "-",
    "=", "@",
];

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '#' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        if src[i..].starts_with("--") {
            while let Some(&(_, c)) = it.peek() {
                if c == '\n' {
                    break;
                }
                it.next();
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = i;
            while let Some(&(j, d)) = it.peek() {
                if d.is_ascii_digit() {
                    end = j + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            let n: BigInt = src[i..end].parse().expect("digits");
            toks.push(Token {
                tok: Tok::Int(n),
                offset: i,
            });
            continue;
        }
        if ident_start(c) {
            let mut end = i;
            while let Some(&(j, d)) = it.peek() {
                if ident_continue(d) {
                    end = j + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            toks.push(Token {
                tok: Tok::Ident(src[i..end].to_string()),
                offset: i,
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                for _ in 0..s.chars().count() {
                    it.next();
                }
                toks.push(Token {
                    tok: Tok::Sym(s),
                    offset: i,
                });
            }
            None => {
                return Err(ParseError::at(
                    src,
                    i,
                    vec![],
                    format!("unexpected character {c:?}"),
                ))
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(toks)
}
