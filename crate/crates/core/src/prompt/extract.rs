use crate::error::{Error, Result};
use crate::harness::SourceUnit;

const FENCE: &str = "```";

/// Wraps code in a `c` fence such that [`extract_patch`] returns it unchanged.
pub fn render_fenced(code: &str) -> String {
    format!("{FENCE}c\n{code}\n{FENCE}")
}

/// Splits a model response into the program and the reasoning around it.
///
/// The program is the body of the last fenced block; everything outside
/// fences is reasoning. A response without fences is taken as bare code.
/// An unterminated final fence runs to the end of the response.
pub fn extract_patch(response: &str, label: &str) -> Result<(SourceUnit, String)> {
    if response.trim().is_empty() {
        return Err(Error::Extraction("empty response".into()));
    }

    let mut reasoning: Vec<&str> = Vec::new();
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut open: Option<Vec<&str>> = None;
    for line in response.split('\n') {
        let is_fence = line.trim_start().starts_with(FENCE);
        match open.take() {
            Some(block) if is_fence => blocks.push(block),
            Some(mut block) => {
                block.push(line);
                open = Some(block);
            }
            None if is_fence => open = Some(Vec::new()),
            None => reasoning.push(line),
        }
    }
    if let Some(block) = open {
        blocks.push(block);
    }

    let Some(last) = blocks.pop() else {
        return Ok((SourceUnit::new(response.trim(), label)?, String::new()));
    };
    let code = last.join("\n");
    if code.trim().is_empty() {
        return Err(Error::Extraction("last code block is empty".into()));
    }
    let reasoning = reasoning.join("\n").trim().to_string();
    Ok((SourceUnit::new(code, label)?, reasoning))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reasoning_then_code() {
        let r = "Because X...\n```\nint main(){return 0;}\n```";
        let (code, why) = extract_patch(r, "a1").unwrap();
        assert_eq!(code.code, "int main(){return 0;}");
        assert_eq!(code.label, "a1");
        assert_eq!(why, "Because X...");
    }

    #[test]
    fn last_block_wins() {
        let r = "first try:\n```c\nint a;\n```\nactually:\n```c\nint b;\n```\ndone";
        let (code, why) = extract_patch(r, "x").unwrap();
        assert_eq!(code.code, "int b;");
        assert_eq!(why, "first try:\nactually:\ndone");
    }

    #[test]
    fn bare_code() {
        let (code, why) = extract_patch("int main(){}\n", "x").unwrap();
        assert_eq!(code.code, "int main(){}");
        assert!(why.is_empty());
    }

    #[test]
    fn unterminated_fence_runs_to_end() {
        let (code, why) = extract_patch("why\n```c\nint x;\n", "x").unwrap();
        assert_eq!(code.code, "int x;\n");
        assert_eq!(why, "why");
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(extract_patch("  \n", "x"), Err(Error::Extraction(_))));
        assert!(matches!(extract_patch("text\n```\n\n```", "x"), Err(Error::Extraction(_))));
    }

    proptest! {
        #[test]
        fn fenced_round_trip(
            lines in proptest::collection::vec("[ -~&&[^`]]{0,30}", 1..12),
            trailing_newline in any::<bool>(),
        ) {
            let mut code = lines.join("\n");
            if trailing_newline {
                code.push('\n');
            }
            prop_assume!(!code.trim().is_empty());
            let response = format!("Reasoning here.\n{}\nthanks", render_fenced(&code));
            let (unit, _) = extract_patch(&response, "p").unwrap();
            prop_assert_eq!(unit.code, code);
        }
    }
}
