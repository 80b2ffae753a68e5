//! Recovery of `run` commands from free-form text such as LLM responses.

/// One command found in a larger text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCommand {
    /// Source of the command, from `run` to the end of its `expect` clause.
    pub text: String,
    /// Comment lines immediately preceding the command.
    pub comment: Option<String>,
}

impl RawCommand {
    /// The command preceded by its comment, ready to be parsed or stored.
    pub fn with_comment(&self) -> String {
        match &self.comment {
            Some(c) => {
                let lines: String = c.lines().map(|l| format!("// {l}\n")).collect();
                format!("{lines}{}", self.text)
            }
            None => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Word,
    Number,
    Punct(char),
    Comment(String),
}

#[derive(Debug, Clone)]
struct Lexeme {
    kind: Kind,
    text: String,
    start: usize,
    end: usize,
    /// First lexeme on its line.
    line_start: bool,
}

fn scan(src: &str) -> Vec<Lexeme> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let at = |i: usize| chars.get(i).map(|c| c.1);
    let offset = |i: usize| chars.get(i).map_or(src.len(), |c| c.0);
    let mut out = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < chars.len() {
        let c = chars[i].1;
        if c == '\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if (c == '/' && at(i + 1) == Some('/')) || (c == '-' && at(i + 1) == Some('-')) {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            Kind::Comment(src[offset(start + 2)..offset(i)].trim().to_string())
        } else if c == '/' && at(i + 1) == Some('*') {
            i += 2;
            while i < chars.len() && !(chars[i].1 == '*' && at(i + 1) == Some('/')) {
                i += 1;
            }
            let body = src[offset(start + 2)..offset(i)].to_string();
            i = (i + 2).min(chars.len());
            let text = body.lines().map(|l| l.trim().trim_start_matches('*').trim()).filter(|l| !l.is_empty());
            Kind::Comment(text.collect::<Vec<_>>().join("\n"))
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].1.is_alphanumeric() || matches!(chars[i].1, '_' | '\'')) {
                i += 1;
            }
            Kind::Word
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            Kind::Number
        } else {
            i += 1;
            Kind::Punct(c)
        };
        out.push(Lexeme { kind, text: src[offset(start)..offset(i)].to_string(), start: offset(start), end: offset(i), line_start });
        line_start = false;
    }
    out
}

/// Remove markdown code fence lines, keeping everything else.
fn strip_fences(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n")
}

/// Find every `run` command in `text`. A command starts with `run` at the
/// beginning of a line and extends over its block, scope and `expect`
/// clause; surrounding prose and markdown fences are ignored.
pub fn extract_commands(text: &str) -> Vec<RawCommand> {
    let src = strip_fences(text);
    let lx = scan(&src);
    let mut out = Vec::new();
    let mut i = 0;
    while i < lx.len() {
        let l = &lx[i];
        if !(l.kind == Kind::Word && l.text == "run" && l.line_start) {
            i += 1;
            continue;
        }
        let end = command_end(&lx, i);
        let mut comments = Vec::new();
        let mut j = i;
        while j > 0 {
            if let Kind::Comment(c) = &lx[j - 1].kind {
                comments.push(c.clone());
                j -= 1;
            } else {
                break;
            }
        }
        comments.reverse();
        let comment = comments.into_iter().filter(|c| !c.is_empty()).collect::<Vec<_>>().join("\n");
        let body: String = src[l.start..lx[end - 1].end].to_string();
        out.push(RawCommand { text: body, comment: (!comment.is_empty()).then_some(comment) });
        i = end;
    }
    out
}

/// Index one past the last lexeme of the command starting at `i`.
fn command_end(lx: &[Lexeme], i: usize) -> usize {
    let is = |k: usize, w: &str| lx.get(k).is_some_and(|l| l.kind == Kind::Word && l.text == w);
    let punct = |k: usize, c: char| lx.get(k).is_some_and(|l| l.kind == Kind::Punct(c));
    let number = |k: usize| lx.get(k).is_some_and(|l| l.kind == Kind::Number);
    let word = |k: usize| lx.get(k).is_some_and(|l| l.kind == Kind::Word);
    let mut k = i + 1;
    if word(k) && !is(k, "for") && !is(k, "expect") {
        k += 1;
    }
    if punct(k, '{') {
        let mut depth = 0;
        while k < lx.len() {
            match lx[k].kind {
                Kind::Punct('{') => depth += 1,
                Kind::Punct('}') => {
                    depth -= 1;
                    if depth == 0 {
                        k += 1;
                        break;
                    }
                }
                _ => {}
            }
            k += 1;
        }
    }
    // Skip comments between the block and the scope.
    let skip_comments = |mut k: usize| {
        while lx.get(k).is_some_and(|l| matches!(l.kind, Kind::Comment(_))) {
            k += 1;
        }
        k
    };
    let mut end = k;
    k = skip_comments(k);
    if is(k, "for") {
        k += 1;
        loop {
            if is(k, "exactly") {
                k += 1;
            }
            if !number(k) {
                break;
            }
            k += 1;
            end = k;
            let keyword = ["but", "expect", "run", "pred", "fact", "fun", "sig", "abstract", "open"];
            if word(k) && !keyword.iter().any(|w| is(k, w)) {
                k += 1;
                end = k;
            }
            if punct(k, ',') || is(k, "but") {
                k += 1;
            } else {
                break;
            }
        }
        k = skip_comments(end);
    }
    if is(k, "expect") {
        end = if number(k + 1) { k + 2 } else { k + 1 };
    }
    end.max(i + 1)
}
