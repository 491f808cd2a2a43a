//! Strict parser for bracketed lists in model responses.
//!
//! Grammar (whitespace allowed between tokens):
//!
//! ```text
//! value := string | list
//! list  := '[' (value (',' value)*)? ']'
//! string := "'" (char | "\'" | "\\")* "'"
//! dict  := '{' key ':' list (',' key ':' list)* '}'
//! ```
//!
//! The first position at which a complete list (or dict) parses is used;
//! text around it is ignored. A value of the wrong shape is a failure, never
//! a partial result.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Str(String),
    List(Vec<Value>),
}

struct Cursor<'a> {
    s: &'a [u8],
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, pos: usize) -> Self {
        Self {
            s: src.as_bytes(),
            src,
            pos,
        }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        self.ws();
        if self.s.get(self.pos) == Some(&b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Option<String> {
        if !self.eat(b'\'') {
            return None;
        }
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\'' => {
                    self.pos += i + 1;
                    return Some(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('\'' | '\\'))) => out.push(e),
                    _ => return None,
                },
                '\n' => return None,
                c => out.push(c),
            }
        }
        None
    }

    fn list(&mut self) -> Option<Vec<Value>> {
        if !self.eat(b'[') {
            return None;
        }
        let mut items = Vec::new();
        if self.eat(b']') {
            return Some(items);
        }
        loop {
            items.push(self.value()?);
            if self.eat(b']') {
                return Some(items);
            }
            if !self.eat(b',') {
                return None;
            }
        }
    }

    fn value(&mut self) -> Option<Value> {
        self.ws();
        match self.s.get(self.pos)? {
            b'\'' => self.string().map(Value::Str),
            b'[' => self.list().map(Value::List),
            _ => None,
        }
    }

    fn dict(&mut self) -> Option<Vec<(String, Vec<Value>)>> {
        if !self.eat(b'{') {
            return None;
        }
        let mut entries = Vec::new();
        loop {
            let key = self.string()?;
            if !self.eat(b':') {
                return None;
            }
            entries.push((key, self.list()?));
            if self.eat(b'}') {
                return Some(entries);
            }
            if !self.eat(b',') {
                return None;
            }
        }
    }
}

/// First complete list in `text`.
pub fn first_list(text: &str) -> Option<Vec<Value>> {
    text.match_indices('[')
        .find_map(|(i, _)| Cursor::new(text, i).list())
}

fn first_dict(text: &str) -> Option<Vec<(String, Vec<Value>)>> {
    text.match_indices('{')
        .find_map(|(i, _)| Cursor::new(text, i).dict())
}

fn as_names(items: &[Value]) -> Option<Vec<String>> {
    items
        .iter()
        .map(|v| match v {
            Value::Str(s) => Some(s.trim().to_string()),
            Value::List(_) => None,
        })
        .collect()
}

fn as_edges(items: &[Value]) -> Option<Vec<(String, String)>> {
    items
        .iter()
        .map(|v| match v {
            Value::List(pair) => match pair.as_slice() {
                [Value::Str(a), Value::Str(b)] => Some((a.trim().to_string(), b.trim().to_string())),
                _ => None,
            },
            Value::Str(_) => None,
        })
        .collect()
}

/// `['a', 'b']` anywhere in the text.
pub fn parse_node_list(text: &str) -> Result<Vec<String>, String> {
    let list = first_list(text).ok_or("no well-formed list found")?;
    as_names(&list).ok_or_else(|| "list items must be quoted names".to_string())
}

/// `[['a', 'b'], ...]` anywhere in the text.
pub fn parse_edge_list(text: &str) -> Result<Vec<(String, String)>, String> {
    let list = first_list(text).ok_or("no well-formed list found")?;
    as_edges(&list).ok_or_else(|| "list items must be pairs of quoted names".to_string())
}

/// `{'remaining_nodes': [...], 'remaining_edges': [...]}` anywhere in the text.
pub fn parse_nodes_and_edges(text: &str) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let entries = first_dict(text).ok_or("no well-formed dict found")?;
    let mut nodes = None;
    let mut edges = None;
    for (key, list) in &entries {
        let slot_ok = match key.as_str() {
            "remaining_nodes" if nodes.is_none() => {
                nodes = Some(as_names(list).ok_or("remaining_nodes must list quoted names")?);
                true
            }
            "remaining_edges" if edges.is_none() => {
                edges = Some(as_edges(list).ok_or("remaining_edges must list name pairs")?);
                true
            }
            _ => false,
        };
        if !slot_ok {
            return Err(format!("unexpected or repeated key `{key}`"));
        }
    }
    match (nodes, edges) {
        (Some(n), Some(e)) => Ok((n, e)),
        _ => Err("dict needs both remaining_nodes and remaining_edges".into()),
    }
}
