//! Prompt templates and Python-style list rendering.

pub const M1: &str = include_str!("../../assets/prompts/m1.txt");
pub const M2: &str = include_str!("../../assets/prompts/m2.txt");
pub const M3: &str = include_str!("../../assets/prompts/m3.txt");
pub const PAIRWISE: &str = include_str!("../../assets/prompts/pairwise.txt");
pub const BFS_ROOTS: &str = include_str!("../../assets/prompts/bfs_roots.txt");
pub const BFS_EXPAND: &str = include_str!("../../assets/prompts/bfs_expand.txt");

/// Replaces `{key}` placeholders in one pass; substituted text is never
/// rescanned and unknown braces are copied verbatim.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    'scan: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (key, value) in vars {
            let len = key.len() + 2;
            if tail.len() >= len
                && tail.as_bytes()[len - 1] == b'}'
                && &tail[1..len - 1] == *key
            {
                out.push_str(value);
                rest = &tail[len..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// `'name'` with backslash escapes for quotes and backslashes.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

/// `['a', 'b']`
pub fn node_list<S: AsRef<str>>(names: &[S]) -> String {
    let items: Vec<String> = names.iter().map(|n| quote(n.as_ref())).collect();
    format!("[{}]", items.join(", "))
}

/// `[['a', 'b'], ['b', 'c']]`
pub fn edge_list<S: AsRef<str>>(edges: &[(S, S)]) -> String {
    let items: Vec<String> = edges
        .iter()
        .map(|(u, v)| format!("[{}, {}]", quote(u.as_ref()), quote(v.as_ref())))
        .collect();
    format!("[{}]", items.join(", "))
}
