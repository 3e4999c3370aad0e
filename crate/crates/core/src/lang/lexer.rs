use super::ast::Span;
use super::LangError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Unsigned literal; wide enough to negate into `i64::MIN`.
    Int(i128),
    Float(f64),
    Pint,
    Uniform,
    Point,
    Pmf,
    Let,
    Query,
    If,
    Then,
    Else,
    Mod,
    Tilde,
    Semi,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    SlashSlash,
    Lt,
    Le,
    EqEq,
    Ne,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(k) => format!("integer `{k}`"),
            Tok::Float(x) => format!("number `{x}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Pint => "pint",
            Tok::Uniform => "uniform",
            Tok::Point => "point",
            Tok::Pmf => "pmf",
            Tok::Let => "let",
            Tok::Query => "query",
            Tok::If => "if",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::Mod => "mod",
            Tok::Tilde => "~",
            Tok::Semi => ";",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::SlashSlash => "//",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Ident(_) | Tok::Int(_) | Tok::Float(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// Byte range in the source.
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LangError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    loop {
        // Skip whitespace and comments.
        while i < bytes.len() {
            match bytes[i] {
                b'\n' => {
                    i += 1;
                    line += 1;
                    line_start = i;
                }
                b' ' | b'\t' | b'\r' => i += 1,
                b'#' => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                }
                _ => break,
            }
        }
        let span = Span {
            line,
            col: src[line_start..i].chars().count() + 1,
        };
        if i >= bytes.len() {
            out.push(Token {
                tok: Tok::Eof,
                span,
                start: i,
                end: i,
            });
            return Ok(out);
        }
        let start = i;
        let c = bytes[i];
        let two = |a: u8, b: u8| c == a && bytes.get(i + 1) == Some(&b);
        let (tok, len) = if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let word = &src[i..j];
            let tok = match word {
                "pint" => Tok::Pint,
                "uniform" => Tok::Uniform,
                "point" => Tok::Point,
                "pmf" => Tok::Pmf,
                "let" => Tok::Let,
                "query" => Tok::Query,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "mod" => Tok::Mod,
                _ => Tok::Ident(word.to_string()),
            };
            (tok, j - i)
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            lex_number(src, i, span)?
        } else if two(b'/', b'/') {
            (Tok::SlashSlash, 2)
        } else if two(b'<', b'=') {
            (Tok::Le, 2)
        } else if two(b'>', b'=') {
            (Tok::Ge, 2)
        } else if two(b'=', b'=') {
            (Tok::EqEq, 2)
        } else if two(b'!', b'=') {
            (Tok::Ne, 2)
        } else {
            let tok = match c {
                b'~' => Tok::Tilde,
                b';' => Tok::Semi,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'{' => Tok::LBrace,
                b'}' => Tok::RBrace,
                b'[' => Tok::LBracket,
                b']' => Tok::RBracket,
                b',' => Tok::Comma,
                b':' => Tok::Colon,
                b'=' => Tok::Assign,
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'<' => Tok::Lt,
                b'>' => Tok::Gt,
                _ => {
                    let ch = src[i..].chars().next().unwrap();
                    return Err(LangError::syntax(span, format!("unexpected character {ch:?}")));
                }
            };
            (tok, 1)
        };
        i += len;
        out.push(Token {
            tok,
            span,
            start,
            end: i,
        });
    }
}

fn lex_number(src: &str, start: usize, span: Span) -> Result<(Tok, usize), LangError> {
    let bytes = src.as_bytes();
    let digits = |mut j: usize| {
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        j
    };
    let mut j = digits(start);
    let mut is_float = false;
    if j < bytes.len() && bytes[j] == b'.' {
        is_float = true;
        j = digits(j + 1);
    }
    if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
        let mut k = j + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        if k < bytes.len() && bytes[k].is_ascii_digit() {
            is_float = true;
            j = digits(k);
        }
    }
    let text = &src[start..j];
    let tok = if is_float {
        Tok::Float(
            text.parse()
                .map_err(|_| LangError::syntax(span, format!("invalid number {text:?}")))?,
        )
    } else {
        let v: u64 = text
            .parse()
            .map_err(|_| LangError::syntax(span, format!("integer literal {text} is too large")))?;
        Tok::Int(v as i128)
    };
    Ok((tok, j - start))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_operators_and_numbers() {
        assert_eq!(
            toks("x // 3 mod 2 <= 1e-3 .5 # comment\n>= != =="),
            vec![
                Tok::Ident("x".into()),
                Tok::SlashSlash,
                Tok::Int(3),
                Tok::Mod,
                Tok::Int(2),
                Tok::Le,
                Tok::Float(1e-3),
                Tok::Float(0.5),
                Tok::Ge,
                Tok::Ne,
                Tok::EqEq,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn tracks_positions() {
        let t = tokenize("pint X;\n  let").unwrap();
        assert_eq!(t[1].span, Span { line: 1, col: 6 });
        assert_eq!(t[3].span, Span { line: 2, col: 3 });
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("let x = 3 $ 4;").unwrap_err();
        assert_eq!(err.span, Span { line: 1, col: 11 });
        assert!(tokenize("99999999999999999999999").is_err());
    }
}
