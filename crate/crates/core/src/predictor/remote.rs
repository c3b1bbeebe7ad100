//! Client side of the remote-model protocol.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use super::protocol::{encode, Request, Response, PROTOCOL_VERSION};
use crate::error::PredictError;

#[derive(Debug, Clone, PartialEq)]
pub enum RemoteTarget {
    /// Launch `program args...` and talk over its stdin/stdout.
    Process { program: String, args: Vec<String> },
    /// POST each message to this URL.
    Http { url: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub target: RemoteTarget,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn process(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            target: RemoteTarget::Process {
                program: program.into(),
                args,
            },
            timeout: Duration::from_secs(60),
        }
    }

    /// Run `command` through `sh -c`.
    pub fn shell(command: &str) -> Self {
        Self::process("sh", vec!["-c".into(), command.into()])
    }

    pub fn http(url: impl Into<String>) -> Self {
        Self {
            target: RemoteTarget::Http { url: url.into() },
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

fn transport(message: impl Into<String>, line: Option<String>) -> PredictError {
    PredictError::Transport {
        message: message.into(),
        line,
    }
}

struct ProcessLink {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

enum Link {
    Process(ProcessLink),
    Http { url: String, agent: ureq::Agent },
}

pub(crate) struct Connection {
    link: Link,
    dimension: usize,
    timeout: Duration,
    broken: bool,
}

impl Connection {
    pub(crate) fn open(config: &RemoteConfig) -> Result<Self, PredictError> {
        let link = match &config.target {
            RemoteTarget::Process { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| transport(format!("cannot launch `{program}`: {e}"), None))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let (tx, rx) = mpsc::channel();
                std::thread::spawn(move || {
                    for line in BufReader::new(stdout).lines() {
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                });
                Link::Process(ProcessLink {
                    child,
                    stdin,
                    lines: rx,
                })
            }
            RemoteTarget::Http { url } => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(config.timeout))
                    .build()
                    .into();
                Link::Http {
                    url: url.clone(),
                    agent,
                }
            }
        };
        let mut conn = Connection {
            link,
            dimension: 0,
            timeout: config.timeout,
            broken: false,
        };
        let (resp, line) = conn.round_trip(&Request::Hello)?;
        match resp {
            Response::Hello { dimension, version } => {
                if version != PROTOCOL_VERSION {
                    return Err(PredictError::UnsupportedVersion(version));
                }
                if dimension == 0 {
                    return Err(PredictError::Protocol {
                        message: "hello reported dimension 0".into(),
                        line,
                    });
                }
                conn.dimension = dimension;
                Ok(conn)
            }
            Response::Error { message } => Err(PredictError::Remote(message)),
            _ => Err(PredictError::Protocol {
                message: "expected a hello reply".into(),
                line,
            }),
        }
    }

    pub(crate) fn dimension(&self) -> usize {
        self.dimension
    }

    pub(crate) fn predict(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
        let (resp, line) = self.round_trip(&Request::Predict {
            points: points.to_vec(),
        })?;
        match resp {
            Response::Prediction { values } if values.len() == points.len() => Ok(values),
            Response::Prediction { values } => {
                self.broken = true;
                Err(PredictError::Protocol {
                    message: format!("expected {} values, got {}", points.len(), values.len()),
                    line,
                })
            }
            Response::Error { message } => Err(PredictError::Remote(message)),
            Response::Hello { .. } => {
                self.broken = true;
                Err(PredictError::Protocol {
                    message: "unexpected hello reply".into(),
                    line,
                })
            }
        }
    }

    fn round_trip(&mut self, req: &Request) -> Result<(Response, String), PredictError> {
        if self.broken {
            return Err(transport(
                "connection is broken by an earlier failure",
                None,
            ));
        }
        let result = self.exchange(&encode(req));
        let line = match result {
            Ok(line) => line,
            Err(e) => {
                self.broken = true;
                return Err(e);
            }
        };
        match serde_json::from_str::<Response>(&line) {
            Ok(resp) => Ok((resp, line)),
            Err(e) => {
                self.broken = true;
                Err(PredictError::Protocol {
                    message: format!("malformed reply: {e}"),
                    line,
                })
            }
        }
    }

    fn exchange(&mut self, message: &str) -> Result<String, PredictError> {
        match &mut self.link {
            Link::Process(p) => {
                let write = p
                    .stdin
                    .write_all(message.as_bytes())
                    .and_then(|_| p.stdin.write_all(b"\n"))
                    .and_then(|_| p.stdin.flush());
                if let Err(e) = write {
                    return Err(transport(
                        format!("cannot write to model process: {e}"),
                        None,
                    ));
                }
                match p.lines.recv_timeout(self.timeout) {
                    Ok(Ok(line)) => Ok(line),
                    Ok(Err(e)) => Err(transport(
                        format!("cannot read from model process: {e}"),
                        None,
                    )),
                    Err(RecvTimeoutError::Timeout) => Err(transport(
                        format!("model process did not answer within {:?}", self.timeout),
                        None,
                    )),
                    Err(RecvTimeoutError::Disconnected) => {
                        Err(transport("model process closed its output", None))
                    }
                }
            }
            Link::Http { url, agent } => {
                let mut resp = agent
                    .post(url.as_str())
                    .header("Content-Type", "application/json")
                    .send(message)
                    .map_err(|e| transport(format!("request to {url} failed: {e}"), None))?;
                resp.body_mut()
                    .read_to_string()
                    .map(|s| s.trim().to_string())
                    .map_err(|e| transport(format!("cannot read reply from {url}: {e}"), None))
            }
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Link::Process(p) = &mut self.link {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}
