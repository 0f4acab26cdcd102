//! Problem files bundled with the crate.

use crate::error::{Error, Result};
use crate::io::ProblemDoc;

pub const NAMES: [&str; 9] = [
    "example1_dc1",
    "example1_dc2",
    "penalty",
    "mixed1",
    "mixed2",
    "mixed3",
    "mixed4",
    "mixed5",
    "mixed6",
];

/// Instances with both integer and continuous variables.
pub const MIXED: [&str; 6] = ["mixed1", "mixed2", "mixed3", "mixed4", "mixed5", "mixed6"];

pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "example1_dc1" => include_str!("../corpus/example1_dc1.json"),
        "example1_dc2" => include_str!("../corpus/example1_dc2.json"),
        "penalty" => include_str!("../corpus/penalty.json"),
        "mixed1" => include_str!("../corpus/mixed1.json"),
        "mixed2" => include_str!("../corpus/mixed2.json"),
        "mixed3" => include_str!("../corpus/mixed3.json"),
        "mixed4" => include_str!("../corpus/mixed4.json"),
        "mixed5" => include_str!("../corpus/mixed5.json"),
        "mixed6" => include_str!("../corpus/mixed6.json"),
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<ProblemDoc> {
    let t = text(name)
        .ok_or_else(|| Error::InvalidArgument(format!("no bundled problem named {name}")))?;
    ProblemDoc::parse(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_file_builds_and_validates() {
        for name in NAMES {
            let doc = load(name).unwrap();
            assert_eq!(doc.name.as_deref(), Some(name));
            let p = doc.to_problem().unwrap();
            p.validate().unwrap();
        }
        assert!(load("missing").is_err());
    }

    #[test]
    fn mixed_instances_are_mixed() {
        for name in MIXED {
            let p = load(name).unwrap().to_problem().unwrap();
            assert!(
                !p.integers().is_empty() && !p.continuous().is_empty(),
                "{name}"
            );
        }
    }
}
