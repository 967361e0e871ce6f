//! Text file formats.
//!
//! Event files list one `t,source` line per spike after a short header:
//!
//! ```text
//! # scobul-events v1
//! # channels 300
//! # steps 1000
//! t,source
//! 0,17
//! ```
//!
//! Interval and trajectory files use the same header style. Floats are written
//! in shortest round-trip form, so write → read → write is byte-identical.
//! Network snapshots are plain serde structures (serialized by the caller).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::network::{Network, PlasticityRule};
use crate::neuron::SynapseKind;
use crate::siggen::{EventStream, GroundTruthLog, ScenePhasePoint};
use crate::{Error, Timestep};

pub const EVENTS_SCHEMA: u32 = 1;
pub const SNAPSHOT_SCHEMA: u32 = 1;

pub fn write_events(stream: &EventStream) -> String {
    let mut s = String::with_capacity(16 * stream.n_events() + 64);
    let _ = write!(
        s,
        "# scobul-events v{EVENTS_SCHEMA}\n# channels {}\n# steps {}\nt,source\n",
        stream.n_channels(),
        stream.len()
    );
    for (t, c) in stream.events() {
        let _ = writeln!(s, "{t},{c}");
    }
    s
}

struct Lines<'a> {
    what: &'static str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(what: &'static str, text: &'a str) -> Self {
        Self { what, inner: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse { what: self.what, line: self.line, reason: reason.into() }
    }

    fn next_line(&mut self) -> Option<&'a str> {
        let (i, l) = self.inner.next()?;
        self.line = i + 1;
        Some(l)
    }

    fn expect(&mut self, exact: &str) -> Result<(), Error> {
        match self.next_line() {
            Some(l) if l == exact => Ok(()),
            Some(l) => Err(self.err(format!("expected `{exact}`, found `{l}`"))),
            None => Err(self.err(format!("missing `{exact}`"))),
        }
    }

    fn header_value(&mut self, key: &str) -> Result<u64, Error> {
        let prefix = format!("# {key} ");
        let l = self.next_line().ok_or_else(|| self.err(format!("missing `{prefix}`")))?;
        l.strip_prefix(&prefix)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| self.err(format!("expected `{prefix}<integer>`")))
    }

    fn version(&mut self, tag: &str, supported: u32) -> Result<(), Error> {
        let l = self.next_line().ok_or_else(|| self.err("empty file"))?;
        let v = l
            .strip_prefix(&format!("# {tag} v"))
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| self.err(format!("not a {tag} file")))?;
        if v != supported {
            return Err(self.err(format!("schema version {v} unsupported (expected {supported})")));
        }
        Ok(())
    }

    fn fields<const N: usize>(&self, l: &'a str) -> Result<[&'a str; N], Error> {
        let mut out = [""; N];
        let mut it = l.split(',');
        for slot in &mut out {
            *slot = it.next().ok_or_else(|| self.err(format!("expected {N} fields")))?;
        }
        if it.next().is_some() {
            return Err(self.err(format!("expected {N} fields")));
        }
        Ok(out)
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T, Error> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }
}

pub fn read_events(text: &str) -> Result<EventStream, Error> {
    let mut r = Lines::new("events", text);
    r.version("scobul-events", EVENTS_SCHEMA)?;
    let channels = r.header_value("channels")? as usize;
    let steps = r.header_value("steps")?;
    r.expect("t,source")?;
    let mut stream = EventStream::new(channels);
    let mut current: Vec<u32> = Vec::new();
    let mut t_cur: Timestep = 0;
    let mut last: Option<(Timestep, u32)> = None;
    while let Some(l) = r.next_line() {
        let [t, c] = r.fields::<2>(l)?;
        let t: Timestep = r.num(t)?;
        let c: u32 = r.num(c)?;
        if c as usize >= channels {
            return Err(r.err(format!("source {c} out of range for {channels} channels")));
        }
        if t >= steps {
            return Err(r.err(format!("time {t} beyond declared {steps} steps")));
        }
        if last.is_some_and(|p| p >= (t, c)) {
            return Err(r.err("events out of order or duplicated"));
        }
        last = Some((t, c));
        while t_cur < t {
            stream.push_step(&current);
            current.clear();
            t_cur += 1;
        }
        current.push(c);
    }
    while t_cur < steps {
        stream.push_step(&current);
        current.clear();
        t_cur += 1;
    }
    Ok(stream)
}

pub fn write_intervals(log: &GroundTruthLog) -> String {
    let mut s = format!("# scobul-intervals v{EVENTS_SCHEMA}\n# clusters {}\ncluster,start,end\n", log.n_clusters());
    for (i, iv) in log.intervals.iter().enumerate() {
        for (a, b) in iv {
            let _ = writeln!(s, "{i},{a},{b}");
        }
    }
    s
}

pub fn read_intervals(text: &str) -> Result<GroundTruthLog, Error> {
    let mut r = Lines::new("intervals", text);
    r.version("scobul-intervals", EVENTS_SCHEMA)?;
    let n = r.header_value("clusters")? as usize;
    r.expect("cluster,start,end")?;
    let mut intervals = vec![Vec::new(); n];
    while let Some(l) = r.next_line() {
        let [i, a, b] = r.fields::<3>(l)?;
        let i: usize = r.num(i)?;
        let (a, b): (Timestep, Timestep) = (r.num(a)?, r.num(b)?);
        if i >= n || a >= b {
            return Err(r.err("bad interval"));
        }
        intervals[i].push((a, b));
    }
    Ok(GroundTruthLog { intervals })
}

pub fn write_trajectory(points: &[ScenePhasePoint]) -> String {
    let mut s = format!("# scobul-trajectory v{EVENTS_SCHEMA}\n# steps {}\nt,x,y,vx,vy\n", points.len());
    for (t, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{t},{:?},{:?},{:?},{:?}", p.x, p.y, p.vx, p.vy);
    }
    s
}

pub fn read_trajectory(text: &str) -> Result<Vec<ScenePhasePoint>, Error> {
    let mut r = Lines::new("trajectory", text);
    r.version("scobul-trajectory", EVENTS_SCHEMA)?;
    let n = r.header_value("steps")? as usize;
    r.expect("t,x,y,vx,vy")?;
    let mut out = Vec::with_capacity(n);
    while let Some(l) = r.next_line() {
        let [t, x, y, vx, vy] = r.fields::<5>(l)?;
        if r.num::<usize>(t)? != out.len() {
            return Err(r.err("trajectory steps must be consecutive from 0"));
        }
        out.push(ScenePhasePoint { x: r.num(x)?, y: r.num(y)?, vx: r.num(vx)?, vy: r.num(vy)? });
    }
    if out.len() != n {
        return Err(r.err(format!("{} points for {n} declared steps", out.len())));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseState {
    pub source: u32,
    pub kind: SynapseKind,
    /// Resource (0 for inhibitory synapses and the STDP arm).
    pub resource: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub id: u32,
    pub potential: f64,
    pub threshold: f64,
    pub refractory_remaining: u32,
    pub silence_counter: u64,
    pub period_center: Option<Timestep>,
    pub synapses: Vec<SynapseState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub arm: String,
    pub t: Timestep,
    pub rebirths: u64,
    pub neurons: Vec<NeuronState>,
}

impl Snapshot {
    pub fn of(net: &Network) -> Self {
        let neurons = net
            .neurons()
            .iter()
            .map(|n| {
                let synapses = n
                    .synapses()
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let (resource, weight) = match &net.config().rule {
                            PlasticityRule::Scobul(p) if s.is_plastic() => (n.resource(k), n.weight(k, p)),
                            _ => (0.0, s.cached_weight()),
                        };
                        SynapseState { source: s.source, kind: s.kind, resource, weight }
                    })
                    .collect();
                NeuronState {
                    id: n.id,
                    potential: n.potential,
                    threshold: n.threshold,
                    refractory_remaining: n.refractory_remaining,
                    silence_counter: n.silence_counter,
                    period_center: n.period_center,
                    synapses,
                }
            })
            .collect();
        Self {
            schema_version: SNAPSHOT_SCHEMA,
            arm: net.config().rule.arm_name().to_string(),
            t: net.now(),
            rebirths: net.rebirths(),
            neurons,
        }
    }

    pub fn check_version(&self) -> Result<(), Error> {
        if self.schema_version != SNAPSHOT_SCHEMA {
            return Err(Error::Parse {
                what: "snapshot",
                line: 0,
                reason: format!("schema version {} unsupported (expected {SNAPSHOT_SCHEMA})", self.schema_version),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn events_header_and_trailing_empty_steps() {
        let s = EventStream::from_steps(5, vec![vec![1, 4], vec![], vec![0], vec![]]);
        let text = write_events(&s);
        assert!(text.starts_with("# scobul-events v1\n# channels 5\n# steps 4\nt,source\n0,1\n0,4\n2,0\n"));
        assert_eq!(read_events(&text).unwrap(), s);
    }

    #[test]
    fn rejects_bad_event_files() {
        let ok = "# scobul-events v1\n# channels 3\n# steps 2\nt,source\n";
        assert!(read_events(&format!("{ok}0,3\n")).is_err());
        assert!(read_events(&format!("{ok}1,0\n0,1\n")).is_err());
        assert!(read_events(&format!("{ok}2,0\n")).is_err());
        assert!(read_events(&ok.replace("v1", "v2")).is_err());
        let e = read_events(&format!("{ok}0,x\n")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 5, .. }));
    }

    #[test]
    fn trajectory_and_intervals_round_trip() {
        let pts = vec![
            ScenePhasePoint { x: 0.1, y: 1.0 / 3.0, vx: -2e-3, vy: 0.0 },
            ScenePhasePoint { x: 9.999999999, y: 5.0, vx: 1e-300, vy: -0.0 },
        ];
        let text = write_trajectory(&pts);
        let back = read_trajectory(&text).unwrap();
        assert_eq!(write_trajectory(&back), text);
        let log = GroundTruthLog { intervals: vec![vec![(0, 5), (10, 20)], vec![], vec![(3, 4)]] };
        let text = write_intervals(&log);
        assert_eq!(read_intervals(&text).unwrap(), log);
    }

    proptest! {
        #[test]
        fn event_files_round_trip_bytewise(
            n in 1usize..20,
            steps in prop::collection::vec(prop::collection::btree_set(0u32..20, 0..5), 0..30),
        ) {
            let steps: Vec<Vec<u32>> = steps.into_iter().map(|s| s.into_iter().filter(|&c| (c as usize) < n).collect()).collect();
            let s = EventStream::from_steps(n, steps);
            let text = write_events(&s);
            let back = read_events(&text).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(write_events(&back), text);
        }
    }
}
