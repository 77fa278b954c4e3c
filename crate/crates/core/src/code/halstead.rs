use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalsteadClass {
    Operator,
    Operand,
    Ignore,
}

#[derive(Debug, Error)]
pub enum HalsteadTableError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported table version {0}")]
    Version(u32),
    #[error("missing version line")]
    MissingVersion,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Maps token keys to Halstead classes. Identifiers, numbers and strings
/// are looked up by the keys `name`, `number` and `string`; every other
/// token by its source text. Keys absent from the table are ignored.
#[derive(Debug, Clone)]
pub struct HalsteadTable {
    classes: HashMap<String, HalsteadClass>,
}

const BUILTIN: &str = include_str!("../../data/halstead_python.txt");

impl HalsteadTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin halstead table is valid")
    }

    pub fn load(path: &Path) -> Result<Self, HalsteadTableError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, HalsteadTableError> {
        let mut classes = HashMap::new();
        let mut version = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(HalsteadTableError::Syntax {
                    line: i + 1,
                    message: format!("expected `key class`, got {line:?}"),
                });
            };
            if key == "version" {
                let v: u32 = value.parse().map_err(|_| HalsteadTableError::Syntax {
                    line: i + 1,
                    message: format!("bad version {value:?}"),
                })?;
                if v != 1 {
                    return Err(HalsteadTableError::Version(v));
                }
                version = Some(v);
                continue;
            }
            let class = match value {
                "operator" => HalsteadClass::Operator,
                "operand" => HalsteadClass::Operand,
                "ignore" => HalsteadClass::Ignore,
                other => {
                    return Err(HalsteadTableError::Syntax {
                        line: i + 1,
                        message: format!("unknown class {other:?}"),
                    })
                }
            };
            classes.insert(key.to_string(), class);
        }
        if version.is_none() {
            return Err(HalsteadTableError::MissingVersion);
        }
        Ok(Self { classes })
    }

    pub fn classify(&self, key: &str) -> HalsteadClass {
        self.classes.get(key).copied().unwrap_or(HalsteadClass::Ignore)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_classes() {
        let t = HalsteadTable::builtin();
        assert_eq!(t.classify("name"), HalsteadClass::Operand);
        assert_eq!(t.classify("None"), HalsteadClass::Operand);
        assert_eq!(t.classify("def"), HalsteadClass::Operator);
        assert_eq!(t.classify("("), HalsteadClass::Operator);
        assert_eq!(t.classify(")"), HalsteadClass::Ignore);
        assert_eq!(t.classify("$"), HalsteadClass::Ignore);
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(matches!(HalsteadTable::parse("x operator"), Err(HalsteadTableError::MissingVersion)));
        assert!(matches!(HalsteadTable::parse("version 2"), Err(HalsteadTableError::Version(2))));
        assert!(matches!(
            HalsteadTable::parse("version 1\nx maybe"),
            Err(HalsteadTableError::Syntax { line: 2, .. })
        ));
    }
}
