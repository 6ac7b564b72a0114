use super::ast::{AccessSpec, Act, DataDesc, Located, Program, Statement};
use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::ScriptError;
use crate::chronology::TimeStep;

/// Parses a whole script.
pub fn parse_script(text: &str) -> Result<Program, ScriptError> {
    parse(&tokenize(text)?)
}

/// Parses a token stream, one statement per line.
pub fn parse(tokens: &[Token]) -> Result<Program, ScriptError> {
    let mut statements = Vec::new();
    let mut rest = tokens;
    while !rest.is_empty() {
        let end = rest
            .iter()
            .position(|t| t.kind == TokenKind::Newline)
            .unwrap_or(rest.len());
        let (line_tokens, tail) = rest.split_at(end);
        rest = tail.get(1..).unwrap_or(&[]);
        if line_tokens.is_empty() {
            continue;
        }
        let line = line_tokens[0].line;
        let mut cursor = Cursor {
            tokens: line_tokens,
            pos: 0,
            line,
        };
        let statement = cursor.statement()?;
        cursor.finish()?;
        statements.push(Located { line, statement });
    }
    Ok(Program { statements })
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn error(&self, expected: &str) -> ScriptError {
        let found = match self.peek() {
            Some(k) => k.to_string(),
            None => "end of line".to_owned(),
        };
        ScriptError::Syntax {
            line: self.line,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn eat_keyword(&mut self, k: Keyword) -> bool {
        if self.peek() == Some(&TokenKind::Keyword(k)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ScriptError> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(what)),
        }
    }

    fn opt_ident(&mut self) -> Option<String> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Some(s)
            }
            _ => None,
        }
    }

    fn label(&mut self) -> Result<String, ScriptError> {
        match self.peek() {
            Some(TokenKind::Label(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("a consent label like `:consent1`")),
        }
    }

    fn opt_time(&mut self) -> Option<TimeStep> {
        match self.peek() {
            Some(TokenKind::Time(t)) => {
                let t = *t;
                self.pos += 1;
                Some(t)
            }
            _ => None,
        }
    }

    fn finish(&self) -> Result<(), ScriptError> {
        if self.pos == self.tokens.len() {
            Ok(())
        } else {
            Err(self.error("end of line"))
        }
    }

    fn data_desc(&mut self) -> Result<DataDesc, ScriptError> {
        Ok(DataDesc {
            data: self.ident("a data class")?,
            subject: self.ident("a data subject")?,
            recipient: self.ident("a recipient class")?,
        })
    }

    fn act(&mut self) -> Result<Act, ScriptError> {
        if self.eat_keyword(Keyword::Collect) {
            Ok(Act::Collect(self.data_desc()?))
        } else if self.eat_keyword(Keyword::Access) {
            let desc = self.data_desc()?;
            let from = self.opt_time();
            let to = if from.is_some() {
                self.opt_time()
            } else {
                None
            };
            Ok(Act::Access(AccessSpec { desc, from, to }))
        } else {
            Err(self.error("`collect` or `access`"))
        }
    }

    fn statement(&mut self) -> Result<Statement, ScriptError> {
        let Some(TokenKind::Keyword(k)) = self.peek().cloned() else {
            return Err(self.error("a statement keyword"));
        };
        self.pos += 1;
        match k {
            Keyword::New => {
                if self.eat_keyword(Keyword::Data) {
                    let name = self.ident("a data class")?;
                    let parent = self.opt_ident();
                    Ok(Statement::NewData { name, parent })
                } else if self.eat_keyword(Keyword::Recipient) {
                    let name = self.ident("a recipient class")?;
                    let parent = self.opt_ident();
                    Ok(Statement::NewRecipient { name, parent })
                } else if self.eat_keyword(Keyword::Disjoint) {
                    let mut names = vec![self.ident("a class")?, self.ident("a second class")?];
                    while let Some(n) = self.opt_ident() {
                        names.push(n);
                    }
                    Ok(Statement::NewDisjoint { names })
                } else if self.eat_keyword(Keyword::Equiv) {
                    let a = self.ident("a class")?;
                    let b = self.ident("a second class")?;
                    Ok(Statement::NewEquiv { a, b })
                } else {
                    Err(self.error("`data`, `recipient`, `disjoint` or `equiv`"))
                }
            }
            Keyword::Grant => {
                let retro = self.eat_keyword(Keyword::Retro);
                let desc = self.data_desc()?;
                let label = self.label()?;
                Ok(Statement::Grant { retro, desc, label })
            }
            Keyword::Withdraw => {
                let retro = self.eat_keyword(Keyword::Retro);
                let label = self.label()?;
                Ok(Statement::Withdraw { retro, label })
            }
            Keyword::Collect | Keyword::Access => {
                self.pos -= 1;
                Ok(Statement::Act(self.act()?))
            }
            Keyword::Step => Ok(Statement::Step),
            Keyword::Assume => {
                let expected = if self.eat_keyword(Keyword::True) {
                    true
                } else if self.eat_keyword(Keyword::False) {
                    false
                } else {
                    return Err(self.error("`true` or `false`"));
                };
                let act = self.act()?;
                Ok(Statement::Assume { expected, act })
            }
            _ => {
                self.pos -= 1;
                Err(self.error("a statement keyword"))
            }
        }
    }
}
