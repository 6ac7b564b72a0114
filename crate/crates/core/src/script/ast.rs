use std::fmt;

use serde::Serialize;

use crate::chronology::TimeStep;

/// `DataClass DataSubject RecipientClass`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DataDesc {
    pub data: String,
    pub subject: String,
    pub recipient: String,
}

impl DataDesc {
    pub fn new(data: &str, subject: &str, recipient: &str) -> Self {
        DataDesc {
            data: data.to_owned(),
            subject: subject.to_owned(),
            recipient: recipient.to_owned(),
        }
    }
}

impl fmt::Display for DataDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.data, self.subject, self.recipient)
    }
}

/// An access with the collection times it reaches back to: none means the
/// whole history, `from` alone one step, both the range `[from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AccessSpec {
    pub desc: DataDesc,
    pub from: Option<TimeStep>,
    pub to: Option<TimeStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Act {
    Collect(DataDesc),
    Access(AccessSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statement {
    NewData {
        name: String,
        parent: Option<String>,
    },
    NewRecipient {
        name: String,
        parent: Option<String>,
    },
    NewDisjoint {
        names: Vec<String>,
    },
    NewEquiv {
        a: String,
        b: String,
    },
    Grant {
        retro: bool,
        desc: DataDesc,
        label: String,
    },
    Withdraw {
        retro: bool,
        label: String,
    },
    Act(Act),
    Step,
    Assume {
        expected: bool,
        act: Act,
    },
}

impl Statement {
    pub fn is_declaration(&self) -> bool {
        matches!(
            self,
            Statement::NewData { .. }
                | Statement::NewRecipient { .. }
                | Statement::NewDisjoint { .. }
                | Statement::NewEquiv { .. }
        )
    }
}

impl fmt::Display for Act {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Act::Collect(desc) => write!(f, "collect {desc}"),
            Act::Access(spec) => {
                write!(f, "access {}", spec.desc)?;
                if let Some(from) = spec.from {
                    write!(f, " {from}")?;
                }
                if let Some(to) = spec.to {
                    write!(f, " {to}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let retro = |r: bool| if r { "retro " } else { "" };
        match self {
            Statement::NewData { name, parent } | Statement::NewRecipient { name, parent } => {
                let kw = if matches!(self, Statement::NewData { .. }) {
                    "data"
                } else {
                    "recipient"
                };
                write!(f, "new {kw} {name}")?;
                if let Some(p) = parent {
                    write!(f, " {p}")?;
                }
                Ok(())
            }
            Statement::NewDisjoint { names } => write!(f, "new disjoint {}", names.join(" ")),
            Statement::NewEquiv { a, b } => write!(f, "new equiv {a} {b}"),
            Statement::Grant {
                retro: r,
                desc,
                label,
            } => {
                write!(f, "grant {}{desc} {label}", retro(*r))
            }
            Statement::Withdraw { retro: r, label } => write!(f, "withdraw {}{label}", retro(*r)),
            Statement::Act(act) => write!(f, "{act}"),
            Statement::Step => f.write_str("step"),
            Statement::Assume { expected, act } => write!(f, "assume {expected} {act}"),
        }
    }
}

/// A statement together with the source line it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Located {
    pub line: usize,
    pub statement: Statement,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Program {
    pub statements: Vec<Located>,
}

impl Program {
    /// Numbers statements consecutively from line 1.
    pub fn from_statements(statements: impl IntoIterator<Item = Statement>) -> Self {
        Program {
            statements: statements
                .into_iter()
                .enumerate()
                .map(|(i, statement)| Located {
                    line: i + 1,
                    statement,
                })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().map(|l| &l.statement)
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

/// Canonical rendering: one statement per line, single spaces, no comments.
pub fn print_program<'a>(statements: impl IntoIterator<Item = &'a Statement>) -> String {
    let mut out = String::new();
    for s in statements {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    out
}
