//! Text event lists for custom pulse sequences.

use sicspin_core::pulse::{Channel, Drive, Event, MwPulse, PulseEngine, PulseSequence};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Amplitude {
    Gauss(f64),
    Db(f64),
    /// Rotation of the probed transition in units of π.
    Rotation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Mw {
        channel: Channel,
        duration_ns: f64,
        amplitude: Amplitude,
        phase_deg: f64,
    },
    /// Fixed delay plus a multiple of τ.
    Delay { fixed_us: f64, tau_multiple: f64 },
    Optical { duration_us: f64 },
    Echo { window_us: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTemplate {
    steps: Vec<Step>,
}

fn number_with_suffix<'a>(token: &'a str, suffix: &str) -> Option<&'a str> {
    token.strip_suffix(suffix)
}

fn parse_number(line: usize, token: &str, what: &str) -> CliResult<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::config(format!("sequence[{line}]: cannot read {what} from `{token}`")))
}

fn parse_step(line: usize, text: &str) -> CliResult<Step> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let bad = |msg: &str| CliError::config(format!("sequence[{line}] `{text}`: {msg}"));
    match tokens.as_slice() {
        ["mw", channel, duration, amplitude, rest @ ..] => {
            let channel = match *channel {
                "probe" => Channel::Probe,
                "pump" => Channel::Pump,
                _ => return Err(bad("channel must be probe or pump")),
            };
            let duration_ns = number_with_suffix(duration, "ns")
                .ok_or_else(|| bad("pulse length needs an ns suffix"))
                .and_then(|v| parse_number(line, v, "pulse length"))?;
            let amplitude = if let Some(v) = number_with_suffix(amplitude, "dB") {
                Amplitude::Db(parse_number(line, v, "attenuation")?)
            } else if let Some(v) = number_with_suffix(amplitude, "pi") {
                Amplitude::Rotation(parse_number(line, v, "rotation")?)
            } else if let Some(v) = number_with_suffix(amplitude, "G") {
                Amplitude::Gauss(parse_number(line, v, "B1")?)
            } else {
                return Err(bad("amplitude needs a G, dB or pi suffix"));
            };
            let phase_deg = match rest {
                [] => 0.0,
                [p] => number_with_suffix(p, "deg")
                    .ok_or_else(|| bad("phase needs a deg suffix"))
                    .and_then(|v| parse_number(line, v, "phase"))?,
                _ => return Err(bad("too many fields")),
            };
            Ok(Step::Mw {
                channel,
                duration_ns,
                amplitude,
                phase_deg,
            })
        }
        ["delay", t] => {
            if let Some(k) = t.strip_suffix("tau") {
                let tau_multiple = if k.is_empty() { 1.0 } else { parse_number(line, k, "τ multiple")? };
                Ok(Step::Delay { fixed_us: 0.0, tau_multiple })
            } else {
                let v = number_with_suffix(t, "us").ok_or_else(|| bad("delay needs a us suffix or tau"))?;
                Ok(Step::Delay {
                    fixed_us: parse_number(line, v, "delay")?,
                    tau_multiple: 0.0,
                })
            }
        }
        ["optical", t] => {
            let v = number_with_suffix(t, "us").ok_or_else(|| bad("optical length needs a us suffix"))?;
            Ok(Step::Optical {
                duration_us: parse_number(line, v, "optical length")?,
            })
        }
        ["echo"] => Ok(Step::Echo { window_us: 0.0 }),
        ["echo", w] => {
            let v = number_with_suffix(w, "us").ok_or_else(|| bad("echo window needs a us suffix"))?;
            Ok(Step::Echo {
                window_us: parse_number(line, v, "echo window")?,
            })
        }
        _ => Err(bad("unrecognized event")),
    }
}

impl SequenceTemplate {
    pub fn parse(lines: &[String]) -> CliResult<Self> {
        let steps = lines
            .iter()
            .enumerate()
            .map(|(i, l)| parse_step(i, l))
            .collect::<CliResult<Vec<_>>>()?;
        if !steps.iter().any(|s| matches!(s, Step::Echo { .. })) {
            return Err(CliError::config("sequence: at least one `echo` event is required"));
        }
        Ok(SequenceTemplate { steps })
    }

    pub fn instantiate(&self, engine: &PulseEngine, tau_us: f64) -> CliResult<PulseSequence> {
        let events = self
            .steps
            .iter()
            .map(|s| {
                Ok(match *s {
                    Step::Mw {
                        channel,
                        duration_ns,
                        amplitude,
                        phase_deg,
                    } => {
                        let drive = match amplitude {
                            Amplitude::Gauss(b) => Drive::B1Gauss(b),
                            Amplitude::Db(db) => Drive::AttenuationDb(db),
                            Amplitude::Rotation(k) => Drive::B1Gauss(engine.b1_for_rotation(180.0 * k, duration_ns)?),
                        };
                        Event::Mw(MwPulse {
                            channel,
                            duration_ns,
                            drive,
                            phase_deg,
                        })
                    }
                    Step::Delay { fixed_us, tau_multiple } => Event::Delay {
                        duration_us: fixed_us + tau_multiple * tau_us,
                    },
                    Step::Optical { duration_us } => Event::Optical { duration_us },
                    Step::Echo { window_us } => Event::AcquireEcho { window_us },
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(PulseSequence::new(events)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(lines: &[&str]) -> CliResult<SequenceTemplate> {
        SequenceTemplate::parse(&lines.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    #[test]
    fn parses_hahn_variants() {
        let t = parse(&["mw probe 16ns 0.5pi", "delay tau", "mw probe 32ns 3dB 90deg", "delay 2tau", "optical 5us", "echo 0.1us"]).unwrap();
        assert_eq!(t.steps.len(), 6);
        assert_eq!(t.steps[3], Step::Delay { fixed_us: 0.0, tau_multiple: 2.0 });
        assert!(matches!(t.steps[2], Step::Mw { amplitude: Amplitude::Db(d), phase_deg, .. } if d == 3.0 && phase_deg == 90.0));
    }

    #[test]
    fn rejects_malformed_events() {
        assert!(parse(&["mw probe 16 0.5G", "echo"]).is_err());
        assert!(parse(&["mw probe 16ns 0.5", "echo"]).is_err());
        assert!(parse(&["wait 3us", "echo"]).is_err());
        assert!(parse(&["delay 3us"]).unwrap_err().to_string().contains("echo"));
        let e = parse(&["echo", "mw side 16ns 1G"]).unwrap_err();
        assert!(e.to_string().contains("sequence[1]"));
    }
}
