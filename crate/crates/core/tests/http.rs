//! HTTP clients against a local one-request-per-connection server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;
use std::time::Duration;

use ssff::knowledge::{SearchError, SearchProvider, SerpApiClient};
use ssff::llm::{
    ApiKey, ChatRequest, EmbeddingRequest, GatewayError, LlmProvider, OpenAiProvider,
    ProviderConfig,
};
use url::Url;

struct Captured {
    request_line: String,
    headers: Vec<String>,
    body: String,
}

/// Answer each connection with the next canned `(status, body)`.
fn serve(responses: Vec<(u16, &'static str)>) -> (Url, JoinHandle<Vec<Captured>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = Url::parse(&format!("http://{}/v1", listener.local_addr().unwrap())).unwrap();
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let chunked = headers
                .iter()
                .any(|h| h.eq_ignore_ascii_case("transfer-encoding: chunked"));
            let buf = if chunked {
                read_chunked(&mut reader)
            } else {
                let mut buf = vec![0u8; length];
                reader.read_exact(&mut buf).unwrap();
                buf
            };
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            seen.push(Captured {
                request_line: request_line.trim_end().to_string(),
                headers,
                body: String::from_utf8(buf).unwrap(),
            });
        }
        seen
    });
    (url, handle)
}

fn read_chunked(reader: &mut impl BufRead) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let mut size = String::new();
        reader.read_line(&mut size).unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        let mut chunk = vec![0u8; n + 2];
        reader.read_exact(&mut chunk).unwrap();
        if n == 0 {
            return out;
        }
        out.extend_from_slice(&chunk[..n]);
    }
}

fn provider(url: Url) -> OpenAiProvider {
    let mut c = ProviderConfig::new(url, ApiKey::new("sk-test"));
    c.timeout = Duration::from_secs(5);
    OpenAiProvider::new(c)
}

#[test]
fn chat_round_trip() {
    let (url, server) = serve(vec![(
        200,
        r#"{"choices":[{"message":{"content":"Recommendation: Hold"}}]}"#,
    )]);
    let answer = provider(url)
        .chat(&ChatRequest::new("sys", "hello", "gpt-4o-mini"))
        .unwrap();
    assert_eq!(answer, "Recommendation: Hold");
    let seen = server.join().unwrap();
    assert_eq!(seen[0].request_line, "POST /v1/chat/completions HTTP/1.1");
    assert!(seen[0]
        .headers
        .iter()
        .any(|h| h == "authorization: Bearer sk-test" || h == "Authorization: Bearer sk-test"));
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["model"], "gpt-4o-mini");
    assert_eq!(body["messages"][1]["content"], "hello");
}

#[test]
fn chat_status_codes() {
    let (url, server) = serve(vec![(401, "{}"), (429, "{}"), (200, r#"{"choices":[]}"#)]);
    let p = provider(url);
    let req = ChatRequest::new("sys", "hi", "m");
    assert_eq!(p.chat(&req).unwrap_err(), GatewayError::AuthFailure);
    assert_eq!(p.chat(&req).unwrap_err(), GatewayError::RateLimited);
    assert!(matches!(p.chat(&req), Err(GatewayError::Malformed(_))));
    server.join().unwrap();
}

#[test]
fn embedding_falls_back_without_dimensions() {
    let (url, server) = serve(vec![
        (400, r#"{"error":"unknown parameter dimensions"}"#),
        (200, r#"{"data":[{"embedding":[3.0,4.0,12.0]}]}"#),
    ]);
    let v = provider(url)
        .embed(&EmbeddingRequest::new("text", 2))
        .unwrap();
    assert_eq!(v, vec![0.6, 0.8]);
    let seen = server.join().unwrap();
    let first: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    let second: serde_json::Value = serde_json::from_str(&seen[1].body).unwrap();
    assert_eq!(first["dimensions"], 2);
    assert!(second.get("dimensions").is_none());
}

#[test]
fn serp_results_are_ranked_and_truncated() {
    let (url, server) = serve(vec![(
        200,
        r#"{"organic_results":[
            {"position":2,"title":"b","link":"https://b.example.com/x","snippet":"two"},
            {"position":1,"title":"a","link":"https://a.example.com/y","snippet":"one"},
            {"position":3,"title":"bad","snippet":"no link"},
            {"position":4,"title":"d","link":"https://d.example.com/","snippet":"four"}
        ]}"#,
    )]);
    let client = SerpApiClient::new(
        url.join("search.json").unwrap(),
        "key-1",
        Duration::from_secs(5),
        Duration::ZERO,
    );
    let results = client.search("edtech market size", 2).unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0].title, "a");
    assert_eq!(results[1].source_rank, 2);
    assert_eq!(results[0].keyword, "edtech market size");
    let seen = server.join().unwrap();
    let line = &seen[0].request_line;
    assert!(line.starts_with("GET /search.json?"), "{line}");
    assert!(
        line.contains("q=edtech+market+size") || line.contains("q=edtech%20market%20size"),
        "{line}"
    );
    assert!(line.contains("api_key=key-1"));
}

#[test]
fn serp_errors() {
    let (url, server) = serve(vec![
        (429, "{}"),
        (401, "{}"),
        (200, r#"{"error":"Your account has run out of searches."}"#),
    ]);
    let client = SerpApiClient::new(url, "k", Duration::from_secs(5), Duration::ZERO);
    assert!(matches!(
        client.search("q", 3),
        Err(SearchError::QuotaExceeded)
    ));
    assert!(matches!(
        client.search("q", 3),
        Err(SearchError::AuthFailure)
    ));
    assert!(matches!(
        client.search("q", 3),
        Err(SearchError::QuotaExceeded)
    ));
    server.join().unwrap();
}
