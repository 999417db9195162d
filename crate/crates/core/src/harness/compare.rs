/// Judge-style output equality: trailing whitespace on each line and
/// trailing blank lines are ignored. Invalid UTF-8 is compared lossily.
pub fn compare_output(actual: &[u8], expected: &[u8]) -> bool {
    normalize(actual) == normalize(expected)
}

fn normalize(bytes: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines: Vec<String> = text.lines().map(|l| l.trim_end().to_string()).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!(compare_output(b"42\n", b"42"));
        assert!(compare_output(b"42 \n", b"42\n"));
        assert!(!compare_output(b"42\n", b"43\n"));
    }

    #[test]
    fn blank_lines_and_crlf() {
        assert!(compare_output(b"1\r\n2\r\n\r\n\n", b"1\n2"));
        assert!(compare_output(b"", b"\n\n"));
        assert!(!compare_output(b"1\n\n2\n", b"1\n2\n"));
        assert!(!compare_output(b" 1\n", b"1\n"));
    }
}
