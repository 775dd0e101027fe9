use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use hieralloc_ingest::remote::load_cached;
use hieralloc_ingest::{fetch_remote_history, FetchError, RemoteSource};

/// Serves one canned HTTP response and reports the request head it saw.
fn serve_once(status: &'static str, body: String) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/history", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                break;
            }
            head.push_str(&line);
        }
        let _ = tx.send(head);
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(response.as_bytes()).unwrap();
    });
    (url, rx)
}

fn thirty_days(regions: &[&str]) -> String {
    let mut items = Vec::new();
    for region in regions {
        for day in 1..=30 {
            items.push(format!(
                r#"{{"region":"{region}","date":"2021-04-{day:02}","active":{}}}"#,
                1000 + day
            ));
        }
    }
    format!("[{}]", items.join(","))
}

#[test]
fn two_regions_thirty_days() {
    let (url, head) = serve_once("200 OK", thirty_days(&["Goa", "Kerala"]));
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let mut source = RemoteSource::new(url);
    source.bearer_token = Some("s3cret".into());
    source.cache_path = Some(cache.clone());

    let history = fetch_remote_history(&source, None).unwrap();
    assert_eq!(history.len(), 2);
    assert!(history.values().all(|s| s.len() == 30));

    let head = head.recv().unwrap();
    assert!(head.starts_with("GET /history"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer s3cret"));

    let (cached, reloaded) = load_cached(&cache).unwrap();
    assert_eq!(reloaded, history);
    assert!(cached.fetched_at.ends_with('Z'));
}

#[test]
fn region_filter_applies() {
    let (url, _) = serve_once("200 OK", thirty_days(&["Goa", "Kerala"]));
    let history = fetch_remote_history(&RemoteSource::new(url), Some(&["Kerala".to_string()])).unwrap();
    assert_eq!(history.keys().collect::<Vec<_>>(), vec!["Kerala"]);
}

#[test]
fn server_error_carries_status() {
    let (url, _) = serve_once("500 Internal Server Error", "{}".into());
    match fetch_remote_history(&RemoteSource::new(url), None) {
        Err(e @ FetchError::Status { status: 500 }) => assert!(e.is_retryable()),
        other => panic!("expected status error, got {other:?}"),
    }
}

#[test]
fn negative_active_is_a_schema_error() {
    let body = r#"[{"region":"Goa","date":"2021-04-20","active":-1}]"#.to_string();
    let (url, _) = serve_once("200 OK", body);
    match fetch_remote_history(&RemoteSource::new(url), None) {
        Err(FetchError::Schema { field, .. }) => assert_eq!(field, "[0].active"),
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = fetch_remote_history(&RemoteSource::new(format!("http://127.0.0.1:{port}/")), None).unwrap_err();
    assert!(matches!(err, FetchError::Transport { .. }));
    assert!(err.is_retryable());
}
