use std::collections::HashMap;
use std::sync::OnceLock;

const EXCEPTIONS: &str = include_str!("../../data/plural_exceptions.tsv");

/// Tokens this short are never stripped ("gas", "bus", "yes").
const MIN_STRIP_LEN: usize = 4;

fn exceptions() -> &'static HashMap<&'static str, &'static str> {
    static TABLE: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    TABLE.get_or_init(|| {
        EXCEPTIONS
            .lines()
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once('\t'))
            .map(|(surface, lemma)| (surface.trim(), lemma.trim()))
            .collect()
    })
}

/// Collapses regular English plurals and possessives to a singular lemma, one
/// whitespace-separated token at a time. Expects a normalized name.
pub fn lemmatize_plural(name: &str) -> String {
    name.split(' ')
        .map(lemmatize_token)
        .collect::<Vec<_>>()
        .join(" ")
}

fn lemmatize_token(token: &str) -> String {
    let mut t = token;
    loop {
        if let Some(s) = t.strip_suffix("'s") {
            t = s;
        } else if let Some(s) = t.strip_suffix('\'') {
            t = s;
        } else {
            break;
        }
    }
    let table = exceptions();
    if let Some(lemma) = table.get(t) {
        return (*lemma).to_string();
    }
    let stripped = strip_plural(t);
    match table.get(stripped.as_str()) {
        Some(lemma) => (*lemma).to_string(),
        None => stripped,
    }
}

fn strip_plural(t: &str) -> String {
    if t.chars().count() < MIN_STRIP_LEN || !t.ends_with('s') {
        return t.to_string();
    }
    if t.ends_with("ss") || t.ends_with("us") || t.ends_with("is") {
        return t.to_string();
    }
    if let Some(stem) = t.strip_suffix("ies") {
        if stem.chars().count() >= 2 {
            return format!("{stem}y");
        }
        return t.to_string();
    }
    for suffix in ["sses", "ches", "shes", "xes", "zzes"] {
        if t.ends_with(suffix) {
            return t[..t.len() - 2].to_string();
        }
    }
    t[..t.len() - 1].to_string()
}
