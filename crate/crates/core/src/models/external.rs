//! Adapter for black-box models reached over HTTP or a subprocess.
//!
//! Wire format, one request per batch:
//! `{"rows": [[...], ...], "schema": [names]}` → `{"scores": [...]}`.
//! Missing values are sent as `null`. A subprocess receives one request per
//! line on stdin and must answer with one response line on stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{check_width, ModelInfo, Predictor, Task};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "snake_case")]
pub enum Endpoint {
    Http {
        url: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    Subprocess {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

fn default_timeout() -> u64 {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalDescriptor {
    pub info: ModelInfo,
    pub endpoint: Endpoint,
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Batches are forwarded one at a time; the lock serialises requests.
pub struct ExternalModel {
    descriptor: ExternalDescriptor,
    process: Mutex<Option<Process>>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl ExternalModel {
    pub fn new(descriptor: ExternalDescriptor) -> Self {
        ExternalModel {
            descriptor,
            process: Mutex::new(None),
        }
    }

    pub fn descriptor(&self) -> &ExternalDescriptor {
        &self.descriptor
    }

    fn request_body(&self, rows: &[Vec<f64>]) -> Value {
        let rows: Vec<Value> = rows
            .iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|v| if v.is_finite() { json!(v) } else { Value::Null })
                        .collect(),
                )
            })
            .collect();
        json!({ "rows": rows, "schema": self.descriptor.info.features })
    }

    fn exchange(&self, body: &Value) -> Result<Value> {
        let mut guard = self.process.lock().unwrap_or_else(|e| e.into_inner());
        match &self.descriptor.endpoint {
            Endpoint::Http { url, timeout_secs } => {
                let agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs(*timeout_secs)))
                    .build()
                    .new_agent();
                let mut resp = agent.post(url).send_json(body).map_err(|e| match e {
                    ureq::Error::StatusCode(code) => {
                        Error::MalformedResponse(format!("endpoint answered HTTP {code}"))
                    }
                    other => Error::EndpointUnreachable(other.to_string()),
                })?;
                resp.body_mut()
                    .read_json::<Value>()
                    .map_err(|e| Error::MalformedResponse(e.to_string()))
            }
            Endpoint::Subprocess { program, args } => {
                if guard.is_none() {
                    let mut child = Command::new(program)
                        .args(args)
                        .stdin(Stdio::piped())
                        .stdout(Stdio::piped())
                        .stderr(Stdio::inherit())
                        .spawn()
                        .map_err(|e| Error::EndpointUnreachable(format!("{program}: {e}")))?;
                    let stdin = child.stdin.take().expect("piped stdin");
                    let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
                    *guard = Some(Process { child, stdin, stdout });
                }
                let proc = guard.as_mut().expect("process started");
                let mut line = serde_json::to_string(body).expect("request serializes");
                line.push('\n');
                let sent = proc.stdin.write_all(line.as_bytes()).and_then(|_| proc.stdin.flush());
                if let Err(e) = sent {
                    *guard = None;
                    return Err(Error::EndpointUnreachable(e.to_string()));
                }
                let mut reply = String::new();
                match proc.stdout.read_line(&mut reply) {
                    Ok(0) => {
                        *guard = None;
                        Err(Error::EndpointUnreachable("subprocess closed its output".into()))
                    }
                    Ok(_) => serde_json::from_str(&reply).map_err(|e| Error::MalformedResponse(e.to_string())),
                    Err(e) => {
                        *guard = None;
                        Err(Error::EndpointUnreachable(e.to_string()))
                    }
                }
            }
        }
    }
}

/// Validate a response against the batch size and the task's codomain.
pub(crate) fn parse_scores(reply: &Value, expected: usize, task: Task) -> Result<Vec<f64>> {
    let scores = reply
        .get("scores")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::MalformedResponse("missing `scores` array".into()))?;
    if scores.len() != expected {
        return Err(Error::MalformedResponse(format!(
            "expected {expected} scores, got {}",
            scores.len()
        )));
    }
    let scores = scores
        .iter()
        .map(|v| {
            v.as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| Error::MalformedResponse(format!("non-numeric score {v}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if task == Task::BinaryClassification {
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::CodomainViolation(*bad));
        }
    }
    Ok(scores)
}

impl Predictor for ExternalModel {
    fn info(&self) -> &ModelInfo {
        &self.descriptor.info
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_width(rows, self.descriptor.info.features.len())?;
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let reply = self.exchange(&self.request_body(rows))?;
        parse_scores(&reply, rows.len(), self.descriptor.info.task)
    }
}

/// Register an external model.
pub fn wrap_external(endpoint: Endpoint, info: ModelInfo) -> ExternalModel {
    ExternalModel::new(ExternalDescriptor { info, endpoint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Provenance;

    #[test]
    fn response_validation() {
        let ok = json!({"scores": [0.5, 0.5]});
        assert_eq!(parse_scores(&ok, 2, Task::BinaryClassification).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(
            parse_scores(&ok, 3, Task::BinaryClassification),
            Err(Error::MalformedResponse(_))
        ));
        let high = json!({"scores": [1.7]});
        assert_eq!(
            parse_scores(&high, 1, Task::BinaryClassification),
            Err(Error::CodomainViolation(1.7))
        );
        assert_eq!(parse_scores(&high, 1, Task::Regression).unwrap(), vec![1.7]);
        assert!(parse_scores(&json!({"nope": 1}), 1, Task::Regression).is_err());
    }

    #[test]
    fn missing_values_sent_as_null() {
        let m = wrap_external(
            Endpoint::Http { url: "http://127.0.0.1:9".into(), timeout_secs: 1 },
            ModelInfo::new("ext", Task::Regression, Provenance::External, vec!["a".into(), "b".into()]),
        );
        let body = m.request_body(&[vec![1.0, f64::NAN]]);
        assert_eq!(body, json!({"rows": [[1.0, null]], "schema": ["a", "b"]}));
    }

    #[test]
    fn unreachable_http_endpoint() {
        let m = wrap_external(
            Endpoint::Http { url: "http://127.0.0.1:9/score".into(), timeout_secs: 2 },
            ModelInfo::new("ext", Task::Regression, Provenance::External, vec!["a".into()]),
        );
        assert!(matches!(m.predict(&[vec![1.0]]), Err(Error::EndpointUnreachable(_))));
    }

    #[test]
    fn missing_program() {
        let m = wrap_external(
            Endpoint::Subprocess { program: "/nonexistent/model-binary".into(), args: vec![] },
            ModelInfo::new("ext", Task::Regression, Provenance::External, vec!["a".into()]),
        );
        assert!(matches!(m.predict(&[vec![1.0]]), Err(Error::EndpointUnreachable(_))));
    }
}
