//! Line-delimited JSON protocol for remote models.
//!
//! Each message is one JSON object on its own line (or one HTTP body):
//!
//! ```text
//! → {"type":"hello"}                        ← {"type":"hello","dimension":3,"version":1}
//! → {"type":"predict","points":[[..],..]}   ← {"type":"prediction","values":[..]}
//!                                           ← {"type":"error","message":"..."}
//! ```
//!
//! Scalars are encoded with the shortest decimal string that round-trips,
//! so values cross the process boundary bit-exactly.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Model;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Hello,
    Predict { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Response {
    Hello { dimension: usize, version: u64 },
    Prediction { values: Vec<f64> },
    Error { message: String },
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages always serialize")
}

/// Answer one request line on behalf of `model`.
pub fn handle_line(model: &dyn Model, line: &str) -> Response {
    let req: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            return Response::Error {
                message: format!("malformed request: {e}"),
            }
        }
    };
    match req {
        Request::Hello => Response::Hello {
            dimension: model.dimension(),
            version: PROTOCOL_VERSION,
        },
        Request::Predict { points } => {
            let d = model.dimension();
            if let Some(i) = points.iter().position(|p| p.len() != d) {
                return Response::Error {
                    message: format!(
                        "point {i} has {} coordinates, expected {d}",
                        points[i].len()
                    ),
                };
            }
            let values: Vec<f64> = points.iter().map(|p| model.predict_one(p)).collect();
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Response::Error {
                    message: format!("prediction for point {i} is not finite"),
                };
            }
            Response::Prediction { values }
        }
    }
}

/// Serve `model` over a line stream until end of input.
pub fn serve_lines<R: BufRead, W: Write>(
    model: &dyn Model,
    reader: R,
    mut writer: W,
) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = handle_line(model, &line);
        writer.write_all(encode(&resp).as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Serve `model` on a single HTTP endpoint: each POST body is one request.
/// Runs until the server fails; `ready` is called with the bound address.
pub fn serve_http(
    model: &dyn Model,
    addr: &str,
    ready: impl FnOnce(std::net::SocketAddr),
) -> std::io::Result<()> {
    let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
    ready(bound);
    for mut request in server.incoming_requests() {
        if *request.method() != tiny_http::Method::Post {
            let _ = request
                .respond(tiny_http::Response::from_string("POST only").with_status_code(405));
            continue;
        }
        let mut body = String::new();
        let resp = match request.as_reader().read_to_string(&mut body) {
            Ok(_) => handle_line(model, body.trim()),
            Err(e) => Response::Error {
                message: format!("unreadable body: {e}"),
            },
        };
        let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
            .expect("static header");
        let _ =
            request.respond(tiny_http::Response::from_string(encode(&resp)).with_header(header));
    }
    Ok(())
}
