//! The consent scripting language.
//!
//! One statement per line, `#` comments:
//!
//! ```text
//! stmt     := new data NAME [PARENT]
//!           | new recipient NAME [PARENT]
//!           | new disjoint NAME NAME {NAME}
//!           | new equiv NAME NAME
//!           | grant [retro] desc LABEL
//!           | withdraw [retro] LABEL
//!           | act
//!           | step
//!           | assume (true | false) act
//! act      := collect desc
//!           | access desc [TIME [TIME]]
//! desc     := DATACLASS SUBJECT RECIPIENTCLASS
//! LABEL    := ':' [A-Za-z0-9_.-]+
//! TIME     := 'T' digits
//! ```
//!
//! Keywords are lowercase; class, subject and label names are matched
//! exactly. Subjects, and recipient classes not yet declared, come into
//! existence on first mention.

mod ast;
mod interp;
mod lexer;
mod parser;

use thiserror::Error;

use crate::consent::LedgerError;

pub use ast::{print_program, AccessSpec, Act, DataDesc, Located, Program, Statement};
pub use interp::{
    execute, AssumeResult, EventVerdict, Individual, Interpreter, Outcome, RunReport, RunSummary,
    StatementOutcome,
};
pub use lexer::{tokenize, Keyword, Token, TokenKind};
pub use parser::{parse, parse_script};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("{line}:{column}: {message}")]
    Lex {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Semantic { line: usize, source: LedgerError },
}

impl ScriptError {
    fn lex(line: usize, column: usize, message: impl Into<String>) -> Self {
        ScriptError::Lex {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn line(&self) -> usize {
        match self {
            ScriptError::Lex { line, .. }
            | ScriptError::Syntax { line, .. }
            | ScriptError::Semantic { line, .. } => *line,
        }
    }
}
