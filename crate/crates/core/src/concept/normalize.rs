/// Lowercases, maps underscores to spaces, collapses whitespace runs and trims.
pub fn normalize_name(raw: &str) -> String {
    let lowered = raw.to_lowercase().replace('_', " ");
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}
