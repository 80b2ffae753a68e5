use crate::ast::SourceSpan;
use crate::error::{ErrorKind, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(u32),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
    /// Comment block between the previous token and this one.
    pub comment: Option<String>,
    /// True when only whitespace precedes the token on its line.
    pub line_start: bool,
}

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    "<=>", "=>", "->", "<:", ":>", "!=", "&&", "||", "<=", ">=", "++", "{", "}", "(", ")", "[",
    "]", ",", ":", "|", ".", "+", "-", "&", "~", "^", "*", "=", "!", "#", "/", "<", ">", "@",
];

pub const KEYWORDS: &[&str] = &[
    "abstract", "all", "and", "as", "assert", "but", "check", "disj", "else", "exactly", "expect",
    "extends", "fact", "for", "fun", "iden", "iff", "implies", "in", "let", "lone", "module", "no",
    "none", "not", "one", "open", "or", "pred", "run", "set", "sig", "some", "sum", "univ", "this",
    "Int", "int",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn mark(&self) -> SourceSpan {
        SourceSpan {
            start: self.pos,
            end: self.pos,
            start_line: self.line,
            start_col: self.col,
            end_line: self.line,
            end_col: self.col,
        }
    }

    fn close(&self, start: SourceSpan) -> SourceSpan {
        SourceSpan { end: self.pos, end_line: self.line, end_col: self.col, ..start }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    let mut comments: Vec<String> = Vec::new();
    let mut line_start = true;
    loop {
        // Whitespace and comments.
        loop {
            match cur.peek() {
                Some('\n') => {
                    cur.bump();
                    line_start = true;
                }
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') if cur.peek2() == Some('/') => comments.push(line_comment(&mut cur, 2)),
                Some('-') if cur.peek2() == Some('-') => comments.push(line_comment(&mut cur, 2)),
                Some('/') if cur.peek2() == Some('*') => {
                    let start = cur.mark();
                    cur.bump();
                    cur.bump();
                    let body_start = cur.pos;
                    loop {
                        match cur.peek() {
                            None => {
                                return Err(ParseError::new(
                                    ErrorKind::Lexical,
                                    cur.close(start),
                                    "unterminated block comment",
                                ))
                            }
                            Some('*') if cur.peek2() == Some('/') => {
                                let body = &src[body_start..cur.pos];
                                cur.bump();
                                cur.bump();
                                comments.push(clean_block_comment(body));
                                break;
                            }
                            Some(_) => {
                                cur.bump();
                            }
                        }
                    }
                }
                _ => break,
            }
        }
        let start = cur.mark();
        let comment = if comments.is_empty() {
            None
        } else {
            let text = comments.drain(..).filter(|c| !c.is_empty()).collect::<Vec<_>>().join("\n");
            (!text.is_empty()).then_some(text)
        };
        let Some(c) = cur.peek() else {
            out.push(Token { tok: Tok::Eof, span: start, comment, line_start });
            return Ok(out);
        };
        let tok = if is_ident_start(c) {
            while cur.peek().is_some_and(is_ident_char) {
                cur.bump();
            }
            Tok::Ident(src[start.start..cur.pos].to_string())
        } else if c.is_ascii_digit() {
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            let text = &src[start.start..cur.pos];
            match text.parse::<u32>() {
                Ok(n) => Tok::Number(n),
                Err(_) => {
                    return Err(ParseError::new(
                        ErrorKind::Lexical,
                        cur.close(start),
                        format!("number `{text}` is too large"),
                    ))
                }
            }
        } else {
            let rest = &src[cur.pos..];
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(sym) => {
                    for _ in 0..sym.len() {
                        cur.bump();
                    }
                    Tok::Sym(sym)
                }
                None => {
                    cur.bump();
                    return Err(ParseError::new(
                        ErrorKind::Lexical,
                        cur.close(start),
                        format!("unexpected character `{}`", c.escape_debug()),
                    ));
                }
            }
        };
        out.push(Token { tok, span: cur.close(start), comment, line_start });
        line_start = false;
    }
}

fn line_comment(cur: &mut Cursor<'_>, marker: usize) -> String {
    for _ in 0..marker {
        cur.bump();
    }
    let start = cur.pos;
    while cur.peek().is_some_and(|c| c != '\n') {
        cur.bump();
    }
    cur.src[start..cur.pos].trim().to_string()
}

fn clean_block_comment(body: &str) -> String {
    body.lines()
        .map(|l| l.trim().trim_start_matches('*').trim())
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
