use std::fmt;

use super::QueryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Match,
    Where,
    Return,
    Order,
    By,
    Asc,
    Desc,
    Skip,
    Limit,
    And,
    Or,
    Not,
    True,
    False,
}

impl Keyword {
    fn lookup(word: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match word.to_ascii_uppercase().as_str() {
            "MATCH" => Match,
            "WHERE" => Where,
            "RETURN" => Return,
            "ORDER" => Order,
            "BY" => By,
            "ASC" => Asc,
            "DESC" => Desc,
            "SKIP" => Skip,
            "LIMIT" => Limit,
            "AND" => And,
            "OR" => Or,
            "NOT" => Not,
            "TRUE" => True,
            "FALSE" => False,
            _ => return None,
        })
    }

    pub fn is_keyword(word: &str) -> bool {
        Self::lookup(word).is_some()
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{self:?}").to_ascii_uppercase();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Kw(Keyword),
    Str(String),
    /// Unsigned integer digits; the parser applies any sign.
    Int(String),
    Real(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Minus,
    /// `->`
    ArrowRight,
    /// `<-`
    ArrowLeft,
    /// `-->`
    AnonRight,
    /// `<--`
    AnonLeft,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Kw(k) => write!(f, "`{k}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Int(s) => write!(f, "integer {s}"),
            Tok::Real(r) => write!(f, "number {r}"),
            Tok::Eof => f.write_str("end of input"),
            other => write!(f, "`{}`", other.symbol()),
        }
    }
}

impl Tok {
    pub(crate) fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Minus => "-",
            Tok::ArrowRight => "->",
            Tok::ArrowLeft => "<-",
            Tok::AnonRight => "-->",
            Tok::AnonLeft => "<--",
            Tok::Eq => "=",
            Tok::Ne => "<>",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }
    let starts = |i: usize, s: &str| s.chars().enumerate().all(|(k, c)| chars.get(i + k) == Some(&c));

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if starts(i, "//") {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });

        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance!(1);
            }
            let word: String = chars[start..i].iter().collect();
            push(
                &mut out,
                Keyword::lookup(&word).map_or(Tok::Ident(word), Tok::Kw),
            );
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            let mut real = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                real = true;
                advance!(1);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!(1);
                }
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    advance!(j - i);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance!(1);
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if real {
                Tok::Real(text.parse().map_err(|_| QueryError::Lex {
                    line: tl,
                    col: tc,
                    message: format!("bad number {text:?}"),
                })?)
            } else {
                Tok::Int(text)
            };
            push(&mut out, tok);
            continue;
        }
        if c == '"' {
            advance!(1);
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(QueryError::Lex {
                        line: tl,
                        col: tc,
                        message: "unterminated string literal".into(),
                    });
                };
                advance!(1);
                match ch {
                    '"' => break,
                    '\\' => {
                        let Some(&esc) = chars.get(i) else { continue };
                        advance!(1);
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            '"' => '"',
                            '\\' => '\\',
                            other => {
                                return Err(QueryError::Lex {
                                    line,
                                    col: col - 1,
                                    message: format!("unknown escape `\\{other}`"),
                                })
                            }
                        });
                    }
                    ch => s.push(ch),
                }
            }
            push(&mut out, Tok::Str(s));
            continue;
        }

        let symbols: [(&str, Tok); 20] = [
            ("-->", Tok::AnonRight),
            ("<--", Tok::AnonLeft),
            ("->", Tok::ArrowRight),
            ("<-", Tok::ArrowLeft),
            ("<>", Tok::Ne),
            ("<=", Tok::Le),
            (">=", Tok::Ge),
            ("<", Tok::Lt),
            (">", Tok::Gt),
            ("=", Tok::Eq),
            ("-", Tok::Minus),
            ("(", Tok::LParen),
            (")", Tok::RParen),
            ("[", Tok::LBracket),
            ("]", Tok::RBracket),
            ("{", Tok::LBrace),
            ("}", Tok::RBrace),
            (":", Tok::Colon),
            (",", Tok::Comma),
            (".", Tok::Dot),
        ];
        let Some((sym, tok)) = symbols.into_iter().find(|(s, _)| starts(i, s)) else {
            return Err(QueryError::Lex {
                line,
                col,
                message: format!("unexpected character {c:?}"),
            });
        };
        advance!(sym.chars().count());
        push(&mut out, tok);
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
