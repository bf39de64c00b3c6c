use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ast::Program;
use crate::error::{Error, Result};

/// Runtime value of the subject language.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum Value {
    Unit,
    Int(i64),
    Bool(bool),
    Array(Vec<Value>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Array(_) => "array",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("()"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl TryFrom<serde_json::Value> for Value {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        use serde_json::Value as J;
        match v {
            J::Null => Ok(Value::Unit),
            J::Bool(b) => Ok(Value::Bool(b)),
            J::Number(n) => n
                .as_i64()
                .map(Value::Int)
                .ok_or_else(|| format!("{n} is not a 64-bit integer")),
            J::Array(items) => items
                .into_iter()
                .map(Value::try_from)
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array),
            other => Err(format!("unsupported value {other}")),
        }
    }
}

impl From<Value> for serde_json::Value {
    fn from(v: Value) -> Self {
        match v {
            Value::Unit => serde_json::Value::Null,
            Value::Int(i) => i.into(),
            Value::Bool(b) => b.into(),
            Value::Array(items) => {
                serde_json::Value::Array(items.into_iter().map(Into::into).collect())
            }
        }
    }
}

/// One test: call `entry(args)`; when `expect` is present the returned value
/// must equal it, otherwise the test only requires that no assertion fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub entry: String,
    #[serde(default)]
    pub args: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Value>,
}

impl TestCase {
    pub fn new(id: &str, entry: &str, args: Vec<Value>, expect: Option<Value>) -> Self {
        TestCase {
            id: id.to_string(),
            entry: entry.to_string(),
            args,
            expect,
        }
    }
}

/// `{"tests": [{"id", "entry", "args", "expect"}]}`
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
}

impl TestSuite {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that every entry function exists and ids are unique.
    pub fn validate(&self, program: &Program) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for t in &self.tests {
            if program.function(&t.entry).is_none() {
                return Err(Error::UnknownFunction(t.entry.clone()));
            }
            if !seen.insert(&t.id) {
                return Err(Error::Unknown {
                    kind: "duplicate test id",
                    value: t.id.clone(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_json() {
        let s = TestSuite::from_json(
            r#"{"tests": [{"id": "t1", "entry": "f", "args": [3, [1, 2], true], "expect": 10},
                          {"id": "t2", "entry": "f"}]}"#,
        )
        .unwrap();
        assert_eq!(
            s.tests[0].args,
            vec![
                Value::Int(3),
                Value::Array(vec![Value::Int(1), Value::Int(2)]),
                Value::Bool(true)
            ]
        );
        assert_eq!(s.tests[0].expect, Some(Value::Int(10)));
        assert_eq!(s.tests[1].expect, None);
        let back: TestSuite = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_floats() {
        assert!(TestSuite::from_json(r#"{"tests": [{"id": "t", "entry": "f", "args": [1.5]}]}"#)
            .is_err());
    }
}
