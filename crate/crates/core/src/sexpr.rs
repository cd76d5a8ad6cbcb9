//! Tokenizer, reader and printer for the s-expression surface syntax.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("unbalanced parentheses at byte {offset}")]
    UnbalancedParens { offset: usize },
    #[error("unexpected trailing input at byte {offset}")]
    TrailingInput { offset: usize },
    #[error("empty input at byte {offset}")]
    EmptyInput { offset: usize },
}

impl SExpr {
    pub fn atom(s: impl Into<String>) -> Self {
        SExpr::Atom(s.into())
    }

    pub fn list(items: impl IntoIterator<Item = SExpr>) -> Self {
        SExpr::List(items.into_iter().collect())
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a) => Some(a),
            SExpr::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items) => Some(items),
            SExpr::Atom(_) => None,
        }
    }

    /// True for a list whose head is the atom `head` (case-insensitive).
    pub fn is_form(&self, head: &str) -> bool {
        matches!(self.as_list(), Some([SExpr::Atom(h), ..]) if h.eq_ignore_ascii_case(head))
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(a) => f.write_str(a),
            SExpr::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Canonical single-line form: one space between items, no padding.
pub fn print_sexpr(expr: &SExpr) -> String {
    expr.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || c == '(' || c == ')' || c == ';'
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, ch)) = chars.peek() {
        match ch {
            '(' => {
                tokens.push(Token::Open(i));
                chars.next();
            }
            ')' => {
                tokens.push(Token::Close(i));
                chars.next();
            }
            ';' => {
                // comment to end of line
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let start = i;
                let mut end = text.len();
                while let Some(&(j, c)) = chars.peek() {
                    if is_delim(c) {
                        end = j;
                        break;
                    }
                    chars.next();
                }
                tokens.push(Token::Atom(start, &text[start..end]));
            }
        }
    }
    tokens
}

struct Reader<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    len: usize,
}

impl<'a> Reader<'a> {
    fn read(&mut self) -> Result<SExpr, ReadError> {
        match self.tokens.get(self.pos).copied() {
            None => Err(ReadError::EmptyInput { offset: self.len }),
            Some(Token::Atom(_, a)) => {
                self.pos += 1;
                Ok(SExpr::Atom(a.to_string()))
            }
            Some(Token::Close(offset)) => Err(ReadError::UnbalancedParens { offset }),
            Some(Token::Open(open)) => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    match self.tokens.get(self.pos).copied() {
                        None => return Err(ReadError::UnbalancedParens { offset: open }),
                        Some(Token::Close(_)) => {
                            self.pos += 1;
                            return Ok(SExpr::List(items));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
        }
    }

    fn offset_of(&self, index: usize) -> usize {
        match self.tokens.get(index) {
            Some(Token::Open(o)) | Some(Token::Close(o)) | Some(Token::Atom(o, _)) => *o,
            None => self.len,
        }
    }
}

/// Reads exactly one top-level expression.
pub fn parse_sexpr(text: &str) -> Result<SExpr, ReadError> {
    let mut reader = Reader {
        tokens: tokenize(text),
        pos: 0,
        len: text.len(),
    };
    let expr = reader.read()?;
    if reader.pos < reader.tokens.len() {
        let offset = reader.offset_of(reader.pos);
        return Err(match reader.tokens[reader.pos] {
            Token::Close(_) => ReadError::UnbalancedParens { offset },
            _ => ReadError::TrailingInput { offset },
        });
    }
    Ok(expr)
}

/// Reads a sequence of top-level expressions, e.g. a definition file.
pub fn parse_sexprs(text: &str) -> Result<Vec<SExpr>, ReadError> {
    let mut reader = Reader {
        tokens: tokenize(text),
        pos: 0,
        len: text.len(),
    };
    let mut out = Vec::new();
    while reader.pos < reader.tokens.len() {
        out.push(reader.read()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(s: &str) -> SExpr {
        SExpr::atom(s)
    }

    #[test]
    fn reads_flat_list() {
        assert_eq!(
            parse_sexpr("(E 0 1)").unwrap(),
            SExpr::list([a("E"), a("0"), a("1")])
        );
    }

    #[test]
    fn reads_hadamard_sequence() {
        let e = parse_sexpr("((E 0 1) (M 0 0) (X 1 (s 0)))").unwrap();
        let items = e.as_list().unwrap();
        assert_eq!(items.len(), 3);
        assert!(items.iter().all(|i| i.as_list().is_some()));
        assert_eq!(items[2], SExpr::list([a("X"), a("1"), SExpr::list([a("s"), a("0")])]));
    }

    #[test]
    fn unbalanced_is_reported_with_offset() {
        assert_eq!(
            parse_sexpr("((E 0 1"),
            Err(ReadError::UnbalancedParens { offset: 1 })
        );
        assert_eq!(
            parse_sexpr("(E 0 1))"),
            Err(ReadError::UnbalancedParens { offset: 7 })
        );
    }

    #[test]
    fn empty_and_trailing() {
        assert_eq!(parse_sexpr("   "), Err(ReadError::EmptyInput { offset: 3 }));
        assert_eq!(
            parse_sexpr("(E 0 1) (E 1 2)"),
            Err(ReadError::TrailingInput { offset: 8 })
        );
        assert!(parse_sexpr("(E 0 1)  \n").is_ok());
    }

    #[test]
    fn comments_are_skipped() {
        let e = parse_sexpr("; header\n(E 0 ; first\n 1)").unwrap();
        assert_eq!(e, SExpr::list([a("E"), a("0"), a("1")]));
    }

    #[test]
    fn prints_canonically() {
        assert_eq!(print_sexpr(&SExpr::list([a("E"), a("0"), a("1")])), "(E 0 1)");
        assert_eq!(print_sexpr(&a("?i")), "?i");
        let text = "((?i ?o) (?i) (?o) ((E ?o ?i) (M ?o 0) (X ?o (s ?i))))";
        let spaced = "( (?i   ?o) (?i)\n (?o) ((E ?o ?i) (M ?o 0) (X ?o (s ?i))) )";
        assert_eq!(print_sexpr(&parse_sexpr(spaced).unwrap()), text);
    }

    #[test]
    fn many_top_level_forms() {
        let forms = parse_sexprs("(a) b ; c\n (d (e))").unwrap();
        assert_eq!(forms.len(), 3);
    }

    fn arb_sexpr() -> impl Strategy<Value = SExpr> {
        let leaf = "[a-zA-Z0-9?+*/._-]{1,6}".prop_map(SExpr::Atom);
        leaf.prop_recursive(4, 32, 5, |inner| {
            prop::collection::vec(inner, 0..5).prop_map(SExpr::List)
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_round_trips(e in arb_sexpr()) {
            prop_assert_eq!(parse_sexpr(&print_sexpr(&e)).unwrap(), e);
        }
    }
}
