use std::time::Duration;

use pulsecloud_core::device::{Transport, TransportError, UpdateRequest, UpdateResponse};

/// Sends device updates as `GET /update?...` over real HTTP.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
    update_url: String,
}

impl HttpTransport {
    pub fn new(server_url: &str) -> Self {
        Self {
            agent: agent(),
            update_url: format!("{}/update", server_url.trim_end_matches('/')),
        }
    }
}

/// An agent that hands back 4xx/5xx responses instead of failing on them.
pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into()
}

impl Transport for HttpTransport {
    fn send_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse, TransportError> {
        let params = req.params();
        let mut resp = self
            .agent
            .get(&self.update_url)
            .query_pairs(params.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .call()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(UpdateResponse { status, body: body.trim().to_string() })
    }
}
