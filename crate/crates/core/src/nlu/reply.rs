//! Lenient parsing of provider replies. Models answer with JSON, Python
//! literals (`None`, single quotes, tuples) or either wrapped in prose or
//! code fences; all of these are accepted.

use serde_json::{Map, Number, Value};

/// First `{...}` object in the reply, parsed leniently.
pub fn parse_object(reply: &str) -> Option<Map<String, Value>> {
    for (i, _) in reply.match_indices('{') {
        let mut p = LiteralParser::new(&reply[i..]);
        if let Some(v) = p.value() {
            let v = unwrap_doubled(v);
            if let Value::Object(m) = v {
                return Some(m);
            }
        }
    }
    None
}

/// First `[...]` list in the reply, as strings.
pub fn parse_string_list(reply: &str) -> Option<Vec<String>> {
    for (i, _) in reply.match_indices('[') {
        let mut p = LiteralParser::new(&reply[i..]);
        if let Some(Value::Array(items)) = p.value() {
            return items
                .into_iter()
                .map(|v| match v {
                    Value::String(s) => Some(s),
                    _ => None,
                })
                .collect();
        }
    }
    None
}

/// `a; b; c` replies, also tolerating commas and newlines.
pub fn parse_delimited(reply: &str) -> Vec<String> {
    let body = reply.trim();
    let body = body.strip_prefix("Domains:").unwrap_or(body);
    body.split([';', ',', '\n'])
        .map(|s| s.trim().trim_matches(|c| matches!(c, '\'' | '"' | '[' | ']' | '.' | '`')).trim())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

// `{{...}}` as written in a few-shot example parses as a set containing one
// dict; treat it as the dict.
fn unwrap_doubled(v: Value) -> Value {
    match v {
        Value::Array(mut items) if items.len() == 1 && items[0].is_object() => items.remove(0),
        other => other,
    }
}

struct LiteralParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> LiteralParser<'a> {
    fn new(s: &'a str) -> Self {
        LiteralParser { s: s.as_bytes(), pos: 0 }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Option<Value> {
        self.ws();
        match self.peek()? {
            b'{' => self.dict_or_set(),
            b'[' => self.seq(b'[', b']'),
            b'(' => self.seq(b'(', b')'),
            b'"' | b'\'' => self.string().map(Value::String),
            c if c == b'-' || c.is_ascii_digit() => self.number(),
            _ => self.word(),
        }
    }

    fn dict_or_set(&mut self) -> Option<Value> {
        self.pos += 1;
        let mut map = Map::new();
        let mut set = Vec::new();
        loop {
            if self.eat(b'}') {
                break;
            }
            let first = self.value()?;
            if self.eat(b':') {
                let key = match first {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                let v = self.value()?;
                map.insert(key, v);
            } else {
                set.push(first);
            }
            if !self.eat(b',') {
                if self.eat(b'}') {
                    break;
                }
                return None;
            }
        }
        if !set.is_empty() {
            if !map.is_empty() {
                return None;
            }
            return Some(Value::Array(set));
        }
        Some(Value::Object(map))
    }

    fn seq(&mut self, open: u8, close: u8) -> Option<Value> {
        debug_assert_eq!(self.peek(), Some(open));
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            if self.eat(close) {
                return Some(Value::Array(items));
            }
            items.push(self.value()?);
            if !self.eat(b',') {
                return self.eat(close).then_some(Value::Array(items));
            }
        }
    }

    fn string(&mut self) -> Option<String> {
        let quote = self.peek()?;
        self.pos += 1;
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            self.pos += 1;
            if c == quote {
                return String::from_utf8(out).ok();
            }
            if c == b'\\' {
                let e = self.peek()?;
                self.pos += 1;
                match e {
                    b'n' => out.push(b'\n'),
                    b't' => out.push(b'\t'),
                    b'r' => out.push(b'\r'),
                    b'u' => {
                        let hex = std::str::from_utf8(self.s.get(self.pos..self.pos + 4)?).ok()?;
                        let ch = char::from_u32(u32::from_str_radix(hex, 16).ok()?)?;
                        self.pos += 4;
                        out.extend_from_slice(ch.to_string().as_bytes());
                    }
                    other => out.push(other),
                }
            } else {
                out.push(c);
            }
        }
        None
    }

    fn number(&mut self) -> Option<Value> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.' | b'e' | b'E')) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).ok()?;
        if let Ok(i) = text.parse::<i64>() {
            return Some(Value::Number(i.into()));
        }
        Number::from_f64(text.parse().ok()?).map(Value::Number)
    }

    fn word(&mut self) -> Option<Value> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        match &self.s[start..self.pos] {
            b"None" | b"null" => Some(Value::Null),
            b"True" | b"true" => Some(Value::Bool(true)),
            b"False" | b"false" => Some(Value::Bool(false)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn python_literal_dict() {
        let r = r#"Response: {"instruction": "Convert the audio", "url": "./a.mp3", "categories": ['movie', 'music'], "question": None}"#;
        let m = parse_object(r).unwrap();
        assert_eq!(m["categories"], json!(["movie", "music"]));
        assert_eq!(m["question"], Value::Null);
    }

    #[test]
    fn doubled_braces() {
        let m = parse_object(r#"{{"url": "www.google.com/audio_file.mp3"}}"#).unwrap();
        assert_eq!(m["url"], json!("www.google.com/audio_file.mp3"));
    }

    #[test]
    fn fenced_and_prose() {
        let r = "Sure! Here it is:\n```json\n{\"data_dict\": {}, \"x\": 1.5, \"ok\": True}\n```";
        let m = parse_object(r).unwrap();
        assert_eq!(m["x"], json!(1.5));
        assert_eq!(m["ok"], json!(true));
        assert!(parse_object("no json here").is_none());
        assert!(parse_object("{\"a\": }").is_none());
    }

    #[test]
    fn lists() {
        assert_eq!(
            parse_string_list(r#"Selected_Actions: ["Schema-Selection", 'generate_SQL']"#).unwrap(),
            vec!["Schema-Selection", "generate_SQL"]
        );
        assert!(parse_string_list("[1, 2]").is_none());
        assert_eq!(parse_delimited("Domains: audio; summarisation;\n"), vec!["audio", "summarisation"]);
    }
}
