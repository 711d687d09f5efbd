use std::path::Path;

use egoassist_core::config::RunConfig;
use egoassist_service::client::ApiClient;
use egoassist_service::{router, AppState};

/// Starts a server for `config` on an ephemeral port and returns its base URL.
pub fn spawn(config: RunConfig) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let state = AppState::new(config).unwrap();
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(state)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// A config from TOML text with its run directory under `run_dir`.
pub fn config(toml: &str, run_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse(toml, "test").unwrap();
    cfg.service.run_dir = run_dir.to_path_buf();
    cfg
}

#[allow(dead_code)]
pub fn client(toml: &str, run_dir: &Path) -> ApiClient {
    ApiClient::new(spawn(config(toml, run_dir)))
}
