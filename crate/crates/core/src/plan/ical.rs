//! iCalendar content lines: `NAME;PARAM=VALUE:VALUE`, CRLF terminated,
//! folded at 75 octets.

use alloc::string::String;
use alloc::vec::Vec;

/// Maximum octets on one physical line, excluding the CRLF.
pub const FOLD_WIDTH: usize = 75;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentLine {
    /// 1-based physical line where the logical line starts.
    pub line: usize,
    pub name: String,
    pub params: Vec<(String, String)>,
    pub value: String,
}

/// Joins folded continuation lines. Accepts CRLF or bare LF. Returns each
/// logical line with the physical line number it started on.
pub fn unfold(text: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if let Some(rest) = raw.strip_prefix(' ').or_else(|| raw.strip_prefix('\t')) {
            if let Some((_, last)) = out.last_mut() {
                last.push_str(rest);
                continue;
            }
        }
        if raw.is_empty() {
            continue;
        }
        out.push((idx + 1, raw.into()));
    }
    out
}

/// Splits one logical line into a physical-line sequence no wider than
/// [`FOLD_WIDTH`] octets, never splitting a UTF-8 sequence.
pub fn fold(line: &str, out: &mut String) {
    let mut budget = FOLD_WIDTH;
    let mut start = 0;
    let mut width = 0;
    for (i, ch) in line.char_indices() {
        let len = ch.len_utf8();
        if width + len > budget {
            out.push_str(&line[start..i]);
            out.push_str("\r\n ");
            start = i;
            width = 0;
            budget = FOLD_WIDTH - 1;
        }
        width += len;
    }
    out.push_str(&line[start..]);
    out.push_str("\r\n");
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-'
}

pub fn parse_line(line: usize, text: &str) -> Result<ContentLine, String> {
    let name_end = text.find(|c: char| !is_name_char(c)).ok_or("line has no ':' separator")?;
    if name_end == 0 {
        return Err("line does not start with a property name".into());
    }
    let name = text[..name_end].to_ascii_uppercase();
    let mut rest = &text[name_end..];
    let mut params = Vec::new();
    while let Some(after) = rest.strip_prefix(';') {
        let eq = after.find('=').ok_or("parameter without '='")?;
        let pname = &after[..eq];
        if pname.is_empty() || !pname.chars().all(is_name_char) {
            return Err(alloc::format!("invalid parameter name {pname:?}"));
        }
        let mut tail = &after[eq + 1..];
        let pvalue;
        if let Some(q) = tail.strip_prefix('"') {
            let close = q.find('"').ok_or("unterminated quoted parameter value")?;
            pvalue = &q[..close];
            tail = &q[close + 1..];
        } else {
            let end = tail.find([';', ':']).ok_or("line has no ':' separator")?;
            pvalue = &tail[..end];
            tail = &tail[end..];
        }
        params.push((pname.to_ascii_uppercase(), String::from(pvalue)));
        rest = tail;
    }
    let value = rest.strip_prefix(':').ok_or("line has no ':' separator")?;
    Ok(ContentLine { line, name, params, value: value.into() })
}

pub fn write_line(name: &str, params: &[(String, String)], value: &str, out: &mut String) {
    let mut line = String::from(name);
    for (k, v) in params {
        line.push(';');
        line.push_str(k);
        line.push('=');
        if v.contains([';', ':', ',']) {
            line.push('"');
            line.push_str(v);
            line.push('"');
        } else {
            line.push_str(v);
        }
    }
    line.push(':');
    line.push_str(value);
    fold(&line, out);
}

/// TEXT escaping: backslash, semicolon, comma and newline.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ';' => out.push_str("\\;"),
            ',' => out.push_str("\\,"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_text(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some(';') => out.push(';'),
            Some(',') => out.push(','),
            Some('n') | Some('N') => out.push('\n'),
            Some(other) => return Err(alloc::format!("invalid escape \\{other}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

/// Splits a TEXT list on unescaped commas, unescaping each item.
pub fn split_text_list(s: &str) -> Result<Vec<String>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let mut items = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' => escaped = true,
            ',' => {
                items.push(unescape_text(&s[start..i])?);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(unescape_text(&s[start..])?);
    Ok(items)
}

pub fn join_text_list(items: &[String]) -> String {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&escape_text(item));
    }
    out
}
