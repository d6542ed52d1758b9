use super::{Diagnostic, Location};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Number(f64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Token {
    pub tok: Tok,
    pub loc: Location,
}

const PUNCTS: [&str; 19] = [
    "->", "{", "}", "[", "]", "(", ")", ",", ";", "=", ":", "'", "&", "|", "!", "+", "-", "*", "/",
];

pub(super) fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let loc = Location { line, column: col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token {
                tok: if word == "inf" {
                    Tok::Number(f64::INFINITY)
                } else {
                    Tok::Ident(word)
                },
                loc,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let value = text
                .parse::<f64>()
                .map_err(|_| Diagnostic::error(format!("malformed number `{text}`"), Some(loc)))?;
            out.push(Token {
                tok: Tok::Number(value),
                loc,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Token {
                    tok: Tok::Punct(p),
                    loc,
                });
            }
            None => {
                return Err(Diagnostic::error(format!("unexpected character `{c}`"), Some(loc)));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        loc: Location { line, column: col },
    });
    Ok(out)
}
