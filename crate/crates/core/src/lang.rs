use alloc::string::{String, ToString};
use core::fmt;

/// Language tag attached to sentences and words (`zh`, `vi`, `syn-src`, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lang(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid language tag {0:?}: expected 1-16 characters from [a-z0-9-]")]
pub struct InvalidLang(pub String);

impl Lang {
    pub fn new(tag: &str) -> Result<Self, InvalidLang> {
        let ok = !tag.is_empty()
            && tag.len() <= 16
            && tag
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
        if ok {
            Ok(Lang(tag.to_string()))
        } else {
            Err(InvalidLang(tag.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn zh() -> Self {
        Lang("zh".to_string())
    }
    pub fn vi() -> Self {
        Lang("vi".to_string())
    }
    pub fn ja() -> Self {
        Lang("ja".to_string())
    }
    pub fn ko() -> Self {
        Lang("ko".to_string())
    }
    pub fn en() -> Self {
        Lang("en".to_string())
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl core::str::FromStr for Lang {
    type Err = InvalidLang;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Lang::new(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_plain_and_hyphenated_tags() {
        assert_eq!(Lang::new("zh").unwrap(), Lang::zh());
        assert_eq!(Lang::new("syn-src").unwrap().as_str(), "syn-src");
    }

    #[test]
    fn rejects_bad_tags() {
        assert!(Lang::new("").is_err());
        assert!(Lang::new("ZH").is_err());
        assert!(Lang::new("z h").is_err());
        assert!(Lang::new("abcdefghijklmnopq").is_err());
    }
}
