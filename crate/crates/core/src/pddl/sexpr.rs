//! Tokenizer and S-expression reader with source positions.

use std::fmt;

use super::ParseError;

/// A 1-based line/column position in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    /// Atom text, lower-cased, with its start position.
    Atom(String, Pos),
    /// A parenthesized list; `open` and `close` are the bracket positions.
    List { items: Vec<SExpr>, open: Pos, close: Pos },
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) => *p,
            SExpr::List { open, .. } => *open,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SExpr::Atom(s, _) => format!("'{s}'"),
            SExpr::List { .. } => "a list".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open(Pos),
    Close(Pos),
    Atom(String, Pos),
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    let mut current: Option<(String, Pos)> = None;

    fn flush(current: &mut Option<(String, Pos)>, tokens: &mut Vec<Token>) {
        if let Some((s, p)) = current.take() {
            tokens.push(Token::Atom(s.to_lowercase(), p));
        }
    }

    while let Some(c) = chars.next() {
        let here = Pos { line, col };
        match c {
            '(' => {
                flush(&mut current, &mut tokens);
                tokens.push(Token::Open(here));
            }
            ')' => {
                flush(&mut current, &mut tokens);
                tokens.push(Token::Close(here));
            }
            ';' => {
                flush(&mut current, &mut tokens);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_whitespace() => flush(&mut current, &mut tokens),
            c => match current.as_mut() {
                Some((s, _)) => s.push(c),
                None => current = Some((c.to_string(), here)),
            },
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Reads exactly one top-level S-expression from `text`.
pub fn read_one(text: &str) -> Result<SExpr, ParseError> {
    let tokens = tokenize(text);
    let mut idx = 0;
    let expr = match tokens.first() {
        None => {
            return Err(ParseError::Syntax {
                pos: Pos { line: 1, col: 1 },
                expected: "'(define'".into(),
                found: "end of input".into(),
            })
        }
        Some(_) => read_expr(&tokens, &mut idx)?,
    };
    if let Some(extra) = tokens.get(idx) {
        let (pos, found) = match extra {
            Token::Open(p) => (*p, "'('".to_string()),
            Token::Close(p) => (*p, "')'".to_string()),
            Token::Atom(s, p) => (*p, format!("'{s}'")),
        };
        return Err(ParseError::Syntax { pos, expected: "end of input".into(), found });
    }
    Ok(expr)
}

fn read_expr(tokens: &[Token], idx: &mut usize) -> Result<SExpr, ParseError> {
    match tokens.get(*idx) {
        Some(Token::Atom(s, p)) => {
            *idx += 1;
            Ok(SExpr::Atom(s.clone(), *p))
        }
        Some(Token::Open(open)) => {
            let open = *open;
            *idx += 1;
            let mut items = Vec::new();
            loop {
                match tokens.get(*idx) {
                    Some(Token::Close(close)) => {
                        *idx += 1;
                        return Ok(SExpr::List { items, open, close: *close });
                    }
                    Some(_) => items.push(read_expr(tokens, idx)?),
                    None => {
                        return Err(ParseError::Syntax {
                            pos: open,
                            expected: "')' closing this list".into(),
                            found: "end of input".into(),
                        })
                    }
                }
            }
        }
        Some(Token::Close(p)) => {
            Err(ParseError::Syntax { pos: *p, expected: "an expression".into(), found: "')'".into() })
        }
        None => Err(ParseError::Syntax {
            pos: Pos::default(),
            expected: "an expression".into(),
            found: "end of input".into(),
        }),
    }
}
