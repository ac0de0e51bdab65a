use std::io::Write;

/// `# config_hash=<hex> seed=<n>`, then `episode,cumulative_reward` with
/// 1-based episodes and shortest round-trip float formatting.
pub fn write_history<W: Write>(mut out: W, history: &[f64], config_hash: &str, seed: u64) -> std::io::Result<()> {
    writeln!(out, "# config_hash={config_hash} seed={seed}")?;
    writeln!(out, "episode,cumulative_reward")?;
    for (i, r) in history.iter().enumerate() {
        writeln!(out, "{},{r}", i + 1)?;
    }
    out.flush()
}

/// Inverse of [`write_history`]; the comment line is skipped.
pub fn read_history(text: &str) -> Option<Vec<f64>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next()? != "episode,cumulative_reward" {
        return None;
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let (ep, r) = l.split_once(',')?;
            (ep.parse::<usize>().ok()? == i + 1).then_some(())?;
            r.parse().ok()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let h = [20.0, -5.5, 0.1 + 0.2, 1e-17];
        let mut buf = Vec::new();
        write_history(&mut buf, &h, "ab", 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# config_hash=ab seed=3\nepisode,cumulative_reward\n1,20\n"));
        assert_eq!(read_history(&text).unwrap(), h);
    }
}
