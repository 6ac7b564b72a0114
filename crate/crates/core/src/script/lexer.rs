use std::fmt;

use super::ScriptError;
use crate::chronology::TimeStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    New,
    Data,
    Recipient,
    Disjoint,
    Equiv,
    Grant,
    Withdraw,
    Retro,
    Collect,
    Access,
    Step,
    Assume,
    True,
    False,
}

impl Keyword {
    const ALL: [(&'static str, Keyword); 14] = [
        ("new", Keyword::New),
        ("data", Keyword::Data),
        ("recipient", Keyword::Recipient),
        ("disjoint", Keyword::Disjoint),
        ("equiv", Keyword::Equiv),
        ("grant", Keyword::Grant),
        ("withdraw", Keyword::Withdraw),
        ("retro", Keyword::Retro),
        ("collect", Keyword::Collect),
        ("access", Keyword::Access),
        ("step", Keyword::Step),
        ("assume", Keyword::Assume),
        ("true", Keyword::True),
        ("false", Keyword::False),
    ];

    fn from_word(word: &str) -> Option<Keyword> {
        Self::ALL.iter().find(|(w, _)| *w == word).map(|(_, k)| *k)
    }

    pub fn as_str(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(_, k)| *k == self)
            .map(|(w, _)| *w)
            .unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    /// A consent label, stored with its leading `:`.
    Label(String),
    Time(TimeStep),
    Newline,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "`{}`", k.as_str()),
            TokenKind::Ident(s) => write!(f, "name `{s}`"),
            TokenKind::Label(s) => write!(f, "label `{s}`"),
            TokenKind::Time(t) => write!(f, "time `{t}`"),
            TokenKind::Newline => f.write_str("end of line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_label_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')
}

/// Splits script text into tokens. Lines end statements and `#` starts a
/// comment that runs to the end of the line.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ScriptError> {
    let mut tokens = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let chars: Vec<(usize, char)> = content.char_indices().collect();
        let mut i = 0;
        let mut emitted = false;
        while i < chars.len() {
            let (offset, c) = chars[i];
            let column = content[..offset].chars().count() + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let take = |i: &mut usize, pred: fn(char) -> bool| {
                let begin = chars[*i].0;
                while *i < chars.len() && pred(chars[*i].1) {
                    *i += 1;
                }
                let end = chars.get(*i).map_or(content.len(), |(o, _)| *o);
                &content[begin..end]
            };
            let kind = if c == ':' {
                i += 1;
                let name = take(&mut i, is_label_char);
                if name.is_empty() {
                    return Err(ScriptError::lex(line, column, "empty consent label"));
                }
                TokenKind::Label(format!(":{name}"))
            } else if c.is_ascii_alphabetic() || c == '_' {
                let word = take(&mut i, is_word_char);
                if let Some(k) = Keyword::from_word(word) {
                    TokenKind::Keyword(k)
                } else if let Ok(t) = word.parse::<TimeStep>() {
                    TokenKind::Time(t)
                } else {
                    TokenKind::Ident(word.to_owned())
                }
            } else {
                return Err(ScriptError::lex(
                    line,
                    column,
                    format!("illegal character `{c}`"),
                ));
            };
            tokens.push(Token { kind, line, column });
            emitted = true;
        }
        if emitted {
            tokens.push(Token {
                kind: TokenKind::Newline,
                line,
                column: content.chars().count() + 1,
            });
        }
    }
    Ok(tokens)
}
