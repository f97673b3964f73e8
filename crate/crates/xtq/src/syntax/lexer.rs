//! Tokenizer for query programs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Num(f64),
    /// `#input`, `#func`
    Hash(String),
    Sym(&'static str),
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Var(s) => format!("'{s}'"),
            Tok::Str(_) => "string literal".into(),
            Tok::Num(n) => format!("number {n}"),
            Tok::Hash(s) => format!("'#{s}'"),
            Tok::Sym(s) => format!("'{s}'"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Spanned>> {
    let mut toks = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! push {
        ($t:expr, $l:expr, $c:expr) => {
            toks.push(Spanned { tok: $t, line: $l, col: $c })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
            for k in 0..n {
                if chars[*i + k] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            }
            *i += n;
        };

        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        // line comments: -- to end of line
        if c == '-' && i + 1 < chars.len() && chars[i + 1] == '-' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            advance(&mut i, &mut line, &mut col, 1);
            loop {
                if i >= chars.len() {
                    return Err(Error::syntax(tl, tc, "unterminated string literal"));
                }
                let ch = chars[i];
                if ch == '"' {
                    advance(&mut i, &mut line, &mut col, 1);
                    break;
                }
                if ch == '\\' && i + 1 < chars.len() {
                    let nx = chars[i + 1];
                    let lit = match nx {
                        'n' => '\n',
                        't' => '\t',
                        '\\' => '\\',
                        '"' => '"',
                        other => other,
                    };
                    s.push(lit);
                    advance(&mut i, &mut line, &mut col, 2);
                    continue;
                }
                s.push(ch);
                advance(&mut i, &mut line, &mut col, 1);
            }
            push!(Tok::Str(s), tl, tc);
            continue;
        }
        if c == '\'' {
            // single-quoted strings appear in prose-style queries
            let mut s = String::new();
            advance(&mut i, &mut line, &mut col, 1);
            loop {
                if i >= chars.len() {
                    return Err(Error::syntax(tl, tc, "unterminated string literal"));
                }
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, 1);
                if ch == '\'' {
                    break;
                }
                s.push(ch);
            }
            push!(Tok::Str(s), tl, tc);
            continue;
        }
        if c == '$' {
            let mut s = String::from("$");
            advance(&mut i, &mut line, &mut col, 1);
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col, 1);
            }
            if s.len() == 1 {
                return Err(Error::syntax(tl, tc, "expected variable name after '$'"));
            }
            push!(Tok::Var(s), tl, tc);
            continue;
        }
        if c == '#' {
            let mut s = String::new();
            advance(&mut i, &mut line, &mut col, 1);
            while i < chars.len() && chars[i].is_alphanumeric() {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col, 1);
            }
            if s != "input" && s != "func" {
                return Err(Error::syntax(tl, tc, format!("unknown source '#{s}'")));
            }
            push!(Tok::Hash(s), tl, tc);
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                // a second dot ends the number (ranges are not numbers)
                if chars[i] == '.' && s.contains('.') {
                    break;
                }
                // ".." ends the number too
                if chars[i] == '.' && i + 1 < chars.len() && chars[i + 1] == '.' {
                    break;
                }
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col, 1);
            }
            let n: f64 = s
                .trim_end_matches('.')
                .parse()
                .map_err(|_| Error::syntax(tl, tc, format!("bad number '{s}'")))?;
            push!(Tok::Num(n), tl, tc);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-')
            {
                // a '-' must be followed by a name character to belong to the
                // name (so `a-b` is one name but `a -` is not)
                if chars[i] == '-'
                    && !(i + 1 < chars.len() && (chars[i + 1].is_alphanumeric() || chars[i + 1] == '_'))
                {
                    break;
                }
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col, 1);
            }
            push!(Tok::Ident(s), tl, tc);
            continue;
        }

        // multi-character symbols, longest first
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let two: Option<&'static str> = match rest.as_str() {
            "=>" => Some("=>"),
            "||" => Some("||"),
            "::" => Some("::"),
            "<<" => Some("<<"),
            "<=" => Some("<="),
            ">=" => Some(">="),
            "!=" => Some("!="),
            "//" => Some("//"),
            ".." => Some(".."),
            _ => None,
        };
        if let Some(sym) = two {
            advance(&mut i, &mut line, &mut col, 2);
            push!(Tok::Sym(sym), tl, tc);
            continue;
        }
        let one: Option<&'static str> = match c {
            '(' => Some("("),
            ')' => Some(")"),
            '{' => Some("{"),
            '}' => Some("}"),
            '[' => Some("["),
            ']' => Some("]"),
            ',' => Some(","),
            ';' => Some(";"),
            '|' => Some("|"),
            '&' => Some("&"),
            '%' => Some("%"),
            '=' => Some("="),
            '<' => Some("<"),
            '>' => Some(">"),
            '/' => Some("/"),
            '@' => Some("@"),
            '~' => Some("~"),
            '*' => Some("*"),
            ':' => Some(":"),
            '.' => Some("."),
            _ => None,
        };
        match one {
            Some(sym) => {
                advance(&mut i, &mut line, &mut col, 1);
                push!(Tok::Sym(sym), tl, tc);
            }
            None => {
                return Err(Error::syntax(tl, tc, format!("unexpected character '{c}'")));
            }
        }
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|s| s.tok).collect()
    }

    #[test]
    fn lexes_queries() {
        let toks = syms(r#"query doc("bib.xml")//book(/title=>$t)"#);
        assert_eq!(toks[0], Tok::Ident("query".into()));
        assert_eq!(toks[1], Tok::Ident("doc".into()));
        assert_eq!(toks[2], Tok::Sym("("));
        assert_eq!(toks[3], Tok::Str("bib.xml".into()));
        assert_eq!(toks[5], Tok::Sym("//"));
        assert_eq!(toks[6], Tok::Ident("book".into()));
        assert!(toks.contains(&Tok::Var("$t".into())));
        assert!(toks.contains(&Tok::Sym("=>")));
    }

    #[test]
    fn distinguishes_compound_symbols() {
        assert_eq!(syms("<< <= < | || = != ::"), vec![
            Tok::Sym("<<"),
            Tok::Sym("<="),
            Tok::Sym("<"),
            Tok::Sym("|"),
            Tok::Sym("||"),
            Tok::Sym("="),
            Tok::Sym("!="),
            Tok::Sym("::"),
        ]);
    }

    #[test]
    fn hyphenated_names() {
        assert_eq!(syms("et-al=>~"), vec![
            Tok::Ident("et-al".into()),
            Tok::Sym("=>"),
            Tok::Sym("~"),
        ]);
    }

    #[test]
    fn numbers_and_ranges() {
        assert_eq!(syms("(1..2)"), vec![
            Tok::Sym("("),
            Tok::Num(1.0),
            Tok::Sym(".."),
            Tok::Num(2.0),
            Tok::Sym(")"),
        ]);
        assert_eq!(syms("2.5"), vec![Tok::Num(2.5)]);
    }

    #[test]
    fn hash_sources() {
        assert_eq!(syms("#input #func"), vec![
            Tok::Hash("input".into()),
            Tok::Hash("func".into()),
        ]);
        assert!(lex("#bogus").is_err());
    }
}
