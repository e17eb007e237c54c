//! Text formats read and written by the command line.

use std::fmt::Write as _;

use cutpoints::trajectory::Space;
use cutpoints::{Error, ResistanceProfile, State, StopRule, StreamKey, Trajectory};

/// Profile file: one resistance per line for `k = 1, 2, ...`; blank lines
/// and anything after `#` are ignored.
pub fn parse_profile(text: &str) -> Result<ResistanceProfile, Error> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 =
            line.parse().map_err(|_| Error::InvalidProfile(format!("line {}: not a number: {raw:?}", i + 1)))?;
        values.push(v);
    }
    ResistanceProfile::explicit(values)
}

/// Trajectory dump: a `#` header followed by one state per line.
///
/// ```text
/// # trajectory v1
/// # space line
/// # start 1
/// # stop first_passage 5
/// # seed 7 stream 0
/// # censored_early false
/// 1
/// 2
/// ```
pub fn dump_trajectory(t: &Trajectory) -> String {
    let mut s = String::from("# trajectory v1\n");
    let space = match t.space {
        Space::Line => "line",
        Space::Tree => "tree",
    };
    let _ = writeln!(s, "# space {space}");
    let _ = writeln!(s, "# start {}", t.start);
    let _ = writeln!(s, "# stop {}", t.stop_rule);
    if let Some(key) = t.seed {
        let _ = writeln!(s, "# seed {} stream {}", key.seed, key.stream);
    }
    let _ = writeln!(s, "# censored_early {}", t.censored_early);
    for x in &t.states {
        let _ = writeln!(s, "{x}");
    }
    s
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory, Error> {
    let bad = |msg: String| Error::InvalidInput(format!("trajectory file: {msg}"));
    let mut stop = None;
    let mut space = Space::Line;
    let mut seed = None;
    let mut censored_early = false;
    let mut states: Vec<State> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let fields: Vec<&str> = header.split_whitespace().collect();
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad number in {raw:?}")));
            match fields.as_slice() {
                ["stop", "first_passage", n] => stop = Some(StopRule::FirstPassage(num(n)? as State)),
                ["stop", "absorb", y] => stop = Some(StopRule::Absorb(num(y)? as State)),
                ["stop", "horizon", t] => stop = Some(StopRule::Horizon(num(t)?)),
                ["space", "tree"] => space = Space::Tree,
                ["space", "line"] => space = Space::Line,
                ["seed", s, "stream", i] => seed = Some(StreamKey::new(num(s)?, num(i)?)),
                ["censored_early", v] => censored_early = *v == "true",
                _ => {}
            }
            continue;
        }
        states.push(line.parse().map_err(|_| bad(format!("not a state: {raw:?}")))?);
    }
    let stop = stop.ok_or_else(|| bad("missing `# stop` header".into()))?;
    let mut t = match space {
        Space::Line => Trajectory::line(states, stop)?,
        Space::Tree => {
            let start = *states.first().ok_or_else(|| bad("no states".into()))?;
            Trajectory { space, start, states, stop_rule: stop, seed: None, censored_early: false }
        }
    };
    t.seed = seed;
    t.censored_early = censored_early;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_file() {
        let p = parse_profile("# uniform\n1\n1\n\n1 # third\n").unwrap();
        assert_eq!(p.cutoff(), Some(3));
        assert!(parse_profile("1\nx\n").is_err());
        assert!(parse_profile("1\n-2\n").is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let mut t = Trajectory::line(vec![1, 2, 1, 2, 3], StopRule::FirstPassage(3)).unwrap();
        t.seed = Some(StreamKey::new(4, 2));
        let back = parse_trajectory(&dump_trajectory(&t)).unwrap();
        assert_eq!(back, t);
        assert!(parse_trajectory("1\n2\n").is_err());
    }
}
