//! Recursive-descent parser for the feature/query formula language.
//!
//! ```text
//! formula := quant | impl
//! impl    := disj ("=>" disj)?
//! disj    := conj ("|" conj)*
//! conj    := unary ("&" unary)*
//! unary   := "!" unary | "(" formula ")" | quant | atom
//! quant   := ("exists" | "forall") IDENT ("," IDENT)* "." formula
//! atom    := IDENT "(" term ("," term)* ")"
//! ```
//!
//! `s<n>` is a target variable, `u<n>` a counting variable, a back-quoted
//! token an object constant; any other identifier must be bound by an
//! enclosing quantifier.

use std::collections::HashMap;

use super::ast::{Atom, Formula, Term};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

const RESERVED: &[&str] = &["count", "sum", "forall_rel", "exists_rel"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    And,
    Or,
    Not,
    Implies,
    Exists,
    Forall,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    let err = |line, column, message: String| Error::Parse {
        line,
        column,
        message,
    };
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        let tok = match c {
            c if c.is_whitespace() => {
                bump(&mut chars);
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '&' | '∧' => Tok::And,
            '|' | '∨' => Tok::Or,
            '!' | '¬' => Tok::Not,
            '⇒' | '→' => Tok::Implies,
            '∃' => Tok::Exists,
            '∀' => Tok::Forall,
            '=' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    out.push(Token {
                        tok: Tok::Implies,
                        line: tl,
                        column: tc,
                    });
                    continue;
                }
                return Err(err(tl, tc, "expected `=>`".into()));
            }
            '`' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match bump(&mut chars) {
                        Some('`') => break,
                        Some(ch) => s.push(ch),
                        None => return Err(err(tl, tc, "unterminated constant".into())),
                    }
                }
                if s.is_empty() {
                    return Err(err(tl, tc, "empty constant".into()));
                }
                out.push(Token {
                    tok: Tok::Quoted(s),
                    line: tl,
                    column: tc,
                });
                continue;
            }
            c if c.is_alphanumeric() || c == '_' || c == '/' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_alphanumeric() || matches!(ch, '_' | '-' | ':' | '/' | '\'') {
                        s.push(ch);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                let tok = match s.as_str() {
                    "exists" => Tok::Exists,
                    "forall" => Tok::Forall,
                    _ => Tok::Ident(s),
                };
                out.push(Token {
                    tok,
                    line: tl,
                    column: tc,
                });
                continue;
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        };
        bump(&mut chars);
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

fn numbered(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
        rest.parse().ok()
    } else {
        None
    }
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    scope: Vec<String>,
    kb: Option<&'a KnowledgeBase>,
    arities: HashMap<String, usize>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, message: impl Into<String>) -> Error {
        Error::Parse {
            line: tok.line,
            column: tok.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.error_at(&t, format!("expected {what}, found {:?}", t.tok)))
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        match self.peek().tok {
            Tok::Exists | Tok::Forall => self.quant(),
            _ => self.implication(),
        }
    }

    fn implication(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.peek().tok == Tok::Implies {
            self.next();
            let rhs = self.disjunction()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.conjunction()?;
        while self.peek().tok == Tok::Or {
            self.next();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.peek().tok == Tok::And {
            self.next();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().tok {
            Tok::Not => {
                self.next();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.next();
                let inner = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Exists | Tok::Forall => self.quant(),
            _ => self.atom(),
        }
    }

    fn quant(&mut self) -> Result<Formula> {
        let q = self.next();
        let mut vars = Vec::new();
        loop {
            let t = self.next();
            let Tok::Ident(name) = &t.tok else {
                return Err(self.error_at(&t, "expected a variable name after quantifier"));
            };
            if numbered(name, 's').is_some() {
                return Err(
                    self.error_at(&t, format!("target variable `{name}` cannot be quantified"))
                );
            }
            if numbered(name, 'u').is_some() {
                return Err(self.error_at(
                    &t,
                    format!("counting variable `{name}` cannot be quantified"),
                ));
            }
            if RESERVED.contains(&name.as_str()) {
                return Err(self.error_at(&t, format!("`{name}` is a reserved word")));
            }
            vars.push(name.clone());
            if self.peek().tok == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::Dot, "`.` after quantified variables")?;
        let depth = self.scope.len();
        self.scope.extend(vars.iter().cloned());
        let body = self.formula();
        self.scope.truncate(depth);
        let mut body = body?;
        for v in vars.into_iter().rev() {
            body = match q.tok {
                Tok::Exists => Formula::exists(v, body),
                _ => Formula::forall(v, body),
            };
        }
        Ok(body)
    }

    fn atom(&mut self) -> Result<Formula> {
        let head = self.next();
        let relation = match &head.tok {
            Tok::Ident(name) if RESERVED.contains(&name.as_str()) => {
                return Err(self.error_at(&head, format!("`{name}` is a reserved word")))
            }
            Tok::Ident(name) => name.clone(),
            other => return Err(self.error_at(&head, format!("expected an atom, found {other:?}"))),
        };
        self.expect(Tok::LParen, "`(` after relation name")?;
        let mut terms = Vec::new();
        loop {
            let t = self.next();
            let term = match &t.tok {
                Tok::Quoted(c) => Term::Const(c.clone()),
                Tok::Ident(name) => {
                    if let Some(i) = numbered(name, 's') {
                        if i == 0 {
                            return Err(self.error_at(&t, "target variables are numbered from s1"));
                        }
                        Term::Target(i)
                    } else if let Some(i) = numbered(name, 'u') {
                        if i == 0 {
                            return Err(
                                self.error_at(&t, "counting variables are numbered from u1")
                            );
                        }
                        Term::Counting(i)
                    } else if self.scope.iter().any(|v| v == name) {
                        Term::Var(name.clone())
                    } else {
                        return Err(self.error_at(&t, format!("unbound variable `{name}`")));
                    }
                }
                other => return Err(self.error_at(&t, format!("expected a term, found {other:?}"))),
            };
            terms.push(term);
            let sep = self.next();
            match sep.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                _ => return Err(self.error_at(&sep, "expected `,` or `)` in argument list")),
            }
        }
        self.check_relation(&head, &relation, terms.len())?;
        Ok(Formula::Atom(Atom { relation, terms }))
    }

    fn check_relation(&mut self, at: &Token, relation: &str, arity: usize) -> Result<()> {
        if let Some(kb) = self.kb {
            let Some(id) = kb.relation_id(relation) else {
                return Err(self.error_at(at, format!("unknown relation `{relation}`")));
            };
            if kb.arity(id) != arity {
                return Err(self.error_at(
                    at,
                    format!(
                        "relation `{relation}` has arity {}, used with {arity} arguments",
                        kb.arity(id)
                    ),
                ));
            }
        }
        match self.arities.get(relation) {
            Some(&prev) if prev != arity => Err(self.error_at(
                at,
                format!("relation `{relation}` used with arities {prev} and {arity}"),
            )),
            _ => {
                self.arities.insert(relation.to_owned(), arity);
                Ok(())
            }
        }
    }
}

/// Parses one formula. With a knowledge base, relation names and arities are
/// checked against its symbol table.
pub fn parse_with(text: &str, kb: Option<&KnowledgeBase>) -> Result<Formula> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
        scope: Vec::new(),
        kb,
        arities: HashMap::new(),
    };
    let f = p.formula()?;
    let end = p.next();
    if end.tok != Tok::Eof {
        return Err(p.error_at(&end, format!("unexpected trailing input {:?}", end.tok)));
    }
    Ok(f)
}

pub fn parse(text: &str) -> Result<Formula> {
    parse_with(text, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Term {
        Term::var(name)
    }

    #[test]
    fn path_feature() {
        let f = parse("exists x . r1(s1, x) & r2(x, s2)").unwrap();
        let expected = Formula::exists(
            "x",
            Formula::and(
                Formula::atom("r1", vec![Term::Target(1), v("x")]),
                Formula::atom("r2", vec![v("x"), Term::Target(2)]),
            ),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn symmetry_axiom() {
        let f = parse("forall x, y . r(x, y) => r(y, x)").unwrap();
        let expected = Formula::forall(
            "x",
            Formula::forall(
                "y",
                Formula::implies(
                    Formula::atom("r", vec![v("x"), v("y")]),
                    Formula::atom("r", vec![v("y"), v("x")]),
                ),
            ),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn counting_atom() {
        let f = parse("r(s1, u1)").unwrap();
        assert_eq!(
            f,
            Formula::atom("r", vec![Term::Target(1), Term::Counting(1)])
        );
        assert_eq!(f.counting_vars().into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn precedence_and_constants() {
        let f = parse("!a(s1) & b(s1) | c(`obj 1`) => d(s1)").unwrap();
        let expected = Formula::implies(
            Formula::or(
                Formula::and(
                    Formula::not(Formula::atom("a", vec![Term::Target(1)])),
                    Formula::atom("b", vec![Term::Target(1)]),
                ),
                Formula::atom("c", vec![Term::Const("obj 1".into())]),
            ),
            Formula::atom("d", vec![Term::Target(1)]),
        );
        assert_eq!(f, expected);
        assert_eq!(
            parse("∃x . r(s1, x) ∧ ¬q(x)").unwrap(),
            parse("exists x . r(s1, x) & !q(x)").unwrap()
        );
    }

    #[test]
    fn errors_carry_positions() {
        match parse("exists x .\n  r(s1, y)").unwrap_err() {
            Error::Parse {
                line,
                column,
                message,
            } => {
                assert_eq!((line, column), (2, 9));
                assert!(message.contains("unbound"));
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(
            parse("exists s1 . r(s1)"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse("forall u1 . r(u1)"),
            Err(Error::Parse { .. })
        ));
        assert!(parse("r(s1) r(s2)").is_err());
        assert!(parse("r(s1, s2) & r(s1)").is_err());
        assert!(parse("count(s1)").is_err());
        assert!(parse("r(s0)").is_err());
    }

    #[test]
    fn checks_against_symbol_table() {
        let mut kb = KnowledgeBase::new();
        kb.add_named("r", &["a", "b"]).unwrap();
        assert!(parse_with("r(s1, s2)", Some(&kb)).is_ok());
        let e = parse_with("q(s1, s2)", Some(&kb)).unwrap_err();
        assert!(e.to_string().contains("unknown relation"));
        let e = parse_with("r(s1)", Some(&kb)).unwrap_err();
        assert!(e.to_string().contains("arity"));
    }
}
