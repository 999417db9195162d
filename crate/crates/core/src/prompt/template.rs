use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Bumped whenever a shipped template changes wording.
pub const TEMPLATE_VERSION: &str = "v1";

const BUILTIN: [&str; 5] = [
    include_str!("../../templates/scenario1.txt"),
    include_str!("../../templates/scenario2.txt"),
    include_str!("../../templates/scenario3.txt"),
    include_str!("../../templates/scenario4.txt"),
    include_str!("../../templates/scenario5.txt"),
];

/// System-prompt templates, one per scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub version: String,
    system: [String; 5],
}

impl Default for Templates {
    fn default() -> Self {
        Self { version: TEMPLATE_VERSION.to_string(), system: BUILTIN.map(str::to_string) }
    }
}

impl Templates {
    /// Loads `scenario1.txt` .. `scenario5.txt` from `dir`.
    pub fn load_dir(dir: &Path, version: impl Into<String>) -> Result<Self> {
        let mut system: [String; 5] = Default::default();
        for (idx, slot) in system.iter_mut().enumerate() {
            let path = dir.join(format!("scenario{}.txt", idx + 1));
            *slot = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        }
        Ok(Self { version: version.into(), system })
    }

    pub fn system(&self, scenario: Scenario) -> &str {
        &self.system[usize::from(scenario.number()) - 1]
    }
}

/// Substitutes `{{name}}` placeholders. Unknown or unterminated
/// placeholders are errors so a typo never reaches a model.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| Error::Template("unterminated `{{` placeholder".into()))?;
        let name = after[..end].trim();
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Template(format!("no value for placeholder `{name}`")))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_placeholders() {
        let s = render("a {{x}} b {{ y }}.", &[("x", "1"), ("y", "2")]).unwrap();
        assert_eq!(s, "a 1 b 2.");
    }

    #[test]
    fn rejects_unknown_and_unterminated() {
        assert!(render("{{missing}}", &[]).is_err());
        assert!(render("{{open", &[("open", "x")]).is_err());
    }

    #[test]
    fn builtin_templates_render_with_standard_vars() {
        let t = Templates::default();
        for s in Scenario::ALL {
            let text = render(t.system(s), &[("formula", "ochiai"), ("threshold", "0.5")]).unwrap();
            assert!(text.contains("program repair assistant"));
            assert!(!text.contains("{{"));
        }
    }

    #[test]
    fn loads_directory() {
        let dir = tempfile::tempdir().unwrap();
        for n in 1..=5 {
            fs::write(dir.path().join(format!("scenario{n}.txt")), format!("t{n}")).unwrap();
        }
        let t = Templates::load_dir(dir.path(), "custom").unwrap();
        assert_eq!(t.system(Scenario::TestsSbfl), "t3");
        assert_eq!(t.version, "custom");
        fs::remove_file(dir.path().join("scenario2.txt")).unwrap();
        assert!(Templates::load_dir(dir.path(), "x").is_err());
    }
}
