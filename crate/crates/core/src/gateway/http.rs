use serde_json::{json, Value};

use super::{GatewayConfig, GatewayError, ScoredText};

pub(super) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<Value, GatewayError> {
    let unavailable = |message: String| GatewayError::EndpointUnavailable {
        endpoint: url.to_string(),
        message,
    };
    let mut request = client.post(url).json(body);
    if let Some(key) = api_key {
        request = request.bearer_auth(key);
    }
    let response = request.send().map_err(|e| unavailable(e.to_string()))?;
    let status = response.status();
    let text = response.text().map_err(|e| unavailable(e.to_string()))?;
    if status.is_server_error() || status.as_u16() == 429 {
        return Err(unavailable(format!("HTTP {status}: {}", truncate(&text))));
    }
    if !status.is_success() {
        return Err(GatewayError::Protocol {
            endpoint: url.to_string(),
            message: format!("HTTP {status}: {}", truncate(&text)),
        });
    }
    serde_json::from_str(&text).map_err(|e| GatewayError::Protocol {
        endpoint: url.to_string(),
        message: format!("invalid JSON: {e}"),
    })
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(300) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn protocol(endpoint: &str, message: impl Into<String>) -> GatewayError {
    GatewayError::Protocol {
        endpoint: endpoint.to_string(),
        message: message.into(),
    }
}

pub(super) fn chat_body(cfg: &GatewayConfig, prompt: &str, k: usize) -> Value {
    json!({
        "model": cfg.sampler_model,
        "messages": [{"role": "user", "content": prompt}],
        "n": k,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
        "seed": cfg.seed,
    })
}

pub(super) fn parse_chat(endpoint: &str, response: &Value, k: usize) -> Result<Vec<String>, GatewayError> {
    let choices = response["choices"]
        .as_array()
        .ok_or_else(|| protocol(endpoint, "missing choices"))?;
    let mut indexed: Vec<(u64, String)> = choices
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let text = c["message"]["content"]
                .as_str()
                .or_else(|| c["text"].as_str())
                .ok_or_else(|| protocol(endpoint, "choice without content"))?;
            Ok((c["index"].as_u64().unwrap_or(i as u64), text.to_string()))
        })
        .collect::<Result<_, GatewayError>>()?;
    if indexed.len() != k {
        return Err(protocol(endpoint, format!("expected {k} choices, got {}", indexed.len())));
    }
    indexed.sort_by_key(|(i, _)| *i);
    Ok(indexed.into_iter().map(|(_, t)| t).collect())
}

/// Prompt scoring through the completions endpoint: echo the prompt back
/// with per-token log-probabilities and generate nothing.
pub(super) fn echo_body(cfg: &GatewayConfig, prefix: &str, suffix: &str) -> Value {
    json!({
        "model": cfg.scorer_model,
        "prompt": format!("{prefix}{suffix}"),
        "max_tokens": 0,
        "echo": true,
        "logprobs": 0,
        "temperature": 0,
    })
}

pub(super) fn parse_echo(endpoint: &str, response: &Value, prefix: &str) -> Result<ScoredText, GatewayError> {
    let lp = &response["choices"][0]["logprobs"];
    let tokens: Vec<String> = lp["tokens"]
        .as_array()
        .ok_or_else(|| protocol(endpoint, "missing logprobs.tokens"))?
        .iter()
        .map(|t| t.as_str().unwrap_or_default().to_string())
        .collect();
    let token_logprobs: Vec<f64> = lp["token_logprobs"]
        .as_array()
        .ok_or_else(|| protocol(endpoint, "missing logprobs.token_logprobs"))?
        .iter()
        // The first token has no conditioning context and is reported as null.
        .map(|v| v.as_f64().unwrap_or(0.0))
        .collect();
    let offsets: Vec<u64> = lp["text_offset"]
        .as_array()
        .ok_or_else(|| protocol(endpoint, "missing logprobs.text_offset"))?
        .iter()
        .map(|v| v.as_u64().unwrap_or(0))
        .collect();
    if tokens.len() != token_logprobs.len() || tokens.len() != offsets.len() {
        return Err(protocol(endpoint, "logprob arrays differ in length"));
    }
    if token_logprobs.iter().any(|&l| l > 1e-9) {
        return Err(protocol(endpoint, "positive log-probability"));
    }
    let prefix_chars = prefix.chars().count() as u64;
    let prompt_boundary = offsets.iter().position(|&o| o >= prefix_chars).unwrap_or(tokens.len());
    Ok(ScoredText {
        tokens,
        token_logprobs,
        prompt_boundary,
    })
}

pub(super) fn embedding_body(cfg: &GatewayConfig, texts: &[String]) -> Value {
    json!({"model": cfg.embedder_model, "input": texts})
}

pub(super) fn parse_embeddings(endpoint: &str, response: &Value, n: usize) -> Result<Vec<Vec<f64>>, GatewayError> {
    let data = response["data"]
        .as_array()
        .ok_or_else(|| protocol(endpoint, "missing data"))?;
    if data.len() != n {
        return Err(protocol(endpoint, format!("expected {n} embeddings, got {}", data.len())));
    }
    let mut out = vec![Vec::new(); n];
    for (i, item) in data.iter().enumerate() {
        let index = item["index"].as_u64().map_or(i, |x| x as usize);
        let v: Vec<f64> = item["embedding"]
            .as_array()
            .ok_or_else(|| protocol(endpoint, "missing embedding"))?
            .iter()
            .map(|x| x.as_f64().unwrap_or(0.0))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || index >= n {
            return Err(protocol(endpoint, "zero or misindexed embedding"));
        }
        out[index] = v.into_iter().map(|x| x / norm).collect();
    }
    Ok(out)
}
