use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use super::server::{ErrorBody, SpecResponse};
use crate::env::{EnvError, EnvHandle, StepResult};

/// One remote session, usable wherever an in-process env is.
pub struct RemoteEnv {
    base: String,
    client: Client,
    session: String,
    spec: SpecResponse,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Created {
    session_id: String,
    observation: Vec<f64>,
}

#[derive(Deserialize)]
struct Observation {
    observation: Vec<f64>,
}

fn remote(e: reqwest::Error) -> EnvError {
    EnvError::Remote(e.to_string())
}

fn decode<T: DeserializeOwned>(resp: Response) -> Result<T, EnvError> {
    let status = resp.status();
    if status.is_success() {
        return resp.json().map_err(remote);
    }
    let body: ErrorBody = resp.json().map_err(remote)?;
    Err(match status {
        StatusCode::CONFLICT => EnvError::AwaitingReset,
        _ => EnvError::Remote(format!("{status} {}: {}", body.error, body.message)),
    })
}

impl RemoteEnv {
    /// Fetch the spec and open a session seeded with `seed`. Returns the
    /// handle and the first observation.
    pub fn connect(base_url: &str, seed: u64) -> Result<(Self, Vec<f64>), EnvError> {
        let base = base_url.trim_end_matches('/').to_string();
        let client = Client::new();
        let spec: SpecResponse = decode(client.get(format!("{base}/v1/spec")).send().map_err(remote)?)?;
        let created: Created = decode(
            client
                .post(format!("{base}/v1/sessions"))
                .json(&json!({ "seed": seed }))
                .send()
                .map_err(remote)?,
        )?;
        Ok((
            Self {
                base,
                client,
                session: created.session_id,
                spec,
            },
            created.observation,
        ))
    }

    pub fn session_id(&self) -> &str {
        &self.session
    }

    pub fn spec(&self) -> &SpecResponse {
        &self.spec
    }

    fn url(&self, tail: &str) -> String {
        format!("{}/v1/sessions/{}{tail}", self.base, self.session)
    }
}

impl EnvHandle for RemoteEnv {
    fn obs_dim(&self) -> usize {
        self.spec.obs_dim
    }

    fn act_dim(&self) -> usize {
        self.spec.act_dim
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        let resp = self
            .client
            .post(self.url("/reset"))
            .json(&json!({ "seed": seed }))
            .send()
            .map_err(remote)?;
        Ok(decode::<Observation>(resp)?.observation)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if action.len() != self.spec.act_dim {
            return Err(EnvError::ActionLength {
                expected: self.spec.act_dim,
                got: action.len(),
            });
        }
        let resp = self
            .client
            .post(self.url("/step"))
            .json(&json!({ "action": action }))
            .send()
            .map_err(remote)?;
        decode(resp)
    }
}

impl Drop for RemoteEnv {
    fn drop(&mut self) {
        let _ = self.client.delete(self.url("")).send();
    }
}
