//! OpenAI-compatible chat completions and embeddings over HTTP.

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, EmbeddingRequest, GatewayError, LlmProvider, ProviderConfig};

pub struct OpenAiProvider {
    agent: ureq::Agent,
    config: ProviderConfig,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

fn map_transport(e: ureq::Error) -> GatewayError {
    match e {
        ureq::Error::Timeout(_) => GatewayError::Timeout,
        ureq::Error::StatusCode(code) => status_error(code, String::new()),
        other => GatewayError::Transport(other.to_string()),
    }
}

fn status_error(status: u16, body: String) -> GatewayError {
    match status {
        401 | 403 => GatewayError::AuthFailure,
        429 => GatewayError::RateLimited,
        408 => GatewayError::Timeout,
        _ => GatewayError::Api {
            status,
            message: body.chars().take(500).collect(),
        },
    }
}

/// Truncate to `dim` entries and rescale to unit length.
pub fn truncate_and_renormalize(mut v: Vec<f64>, dim: usize) -> Vec<f64> {
    v.truncate(dim);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

impl OpenAiProvider {
    pub fn new(config: ProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, config }
    }

    fn endpoint(&self, path: &str) -> String {
        format!(
            "{}/{}",
            self.config.base_url.as_str().trim_end_matches('/'),
            path
        )
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> Result<String, GatewayError> {
        let mut resp = self
            .agent
            .post(&self.endpoint(path))
            .header(
                "Authorization",
                &format!("Bearer {}", self.config.api_key.expose()),
            )
            .send_json(body)
            .map_err(map_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if (200..300).contains(&status) {
            Ok(text)
        } else {
            Err(status_error(status, text))
        }
    }
}

impl LlmProvider for OpenAiProvider {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let body = json!({
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let text = self.post("chat/completions", &body)?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::Malformed("response has no message content".into()))
    }

    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
        let with_dims = json!({
            "model": request.model_id,
            "input": request.text,
            "dimensions": request.dimension,
        });
        let text = match self.post("embeddings", &with_dims) {
            // Some servers do not know the `dimensions` parameter.
            Err(GatewayError::Api { status: 400, .. }) => self.post(
                "embeddings",
                &json!({"model": request.model_id, "input": request.text}),
            )?,
            other => other?,
        };
        let parsed: EmbeddingResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::Malformed(e.to_string()))?;
        let v = parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| GatewayError::Malformed("response has no embedding".into()))?;
        match v.len().cmp(&request.dimension) {
            std::cmp::Ordering::Equal => Ok(v),
            std::cmp::Ordering::Greater => Ok(truncate_and_renormalize(v, request.dimension)),
            std::cmp::Ordering::Less => Err(GatewayError::DimensionUnsupported {
                requested: request.dimension,
                available: v.len(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_renormalizes() {
        let v = truncate_and_renormalize(vec![3.0, 4.0, 12.0], 2);
        assert_eq!(v, vec![0.6, 0.8]);
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_error(401, String::new()), GatewayError::AuthFailure);
        assert_eq!(status_error(429, String::new()), GatewayError::RateLimited);
        assert!(status_error(503, "busy".into()).is_transient());
        assert!(!status_error(400, "bad".into()).is_transient());
    }
}
