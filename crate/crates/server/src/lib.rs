//! A small ThingSpeak-compatible telemetry service.
//!
//! Channels carry up to eight numeric fields and a pair of API keys. Devices
//! post to `/update` with the write key; readers fetch
//! `/channels/{id}/feeds.json` with the read key or a bearer session from
//! `/login`. Every accepted entry is appended to a JSON-lines file before it
//! is acknowledged.
//!
//! ```no_run
//! use std::sync::Arc;
//! use pulsecloud_server::{spawn, AppState, Store, StoreConfig, SystemClock};
//!
//! let store = Store::open(StoreConfig::new("/tmp/pulsecloud")).unwrap();
//! let ch = store.create_channel("patient-1", &["temperature_c", "pulse_bpm"], chrono::Utc::now()).unwrap();
//! let state = AppState { store: Arc::new(store), clock: Arc::new(SystemClock) };
//! let server = spawn(state, "127.0.0.1:0".parse().unwrap()).unwrap();
//! println!("{} write key {}", server.url(), ch.write_key);
//! ```

pub mod auth;
pub mod clock;
mod error;
pub mod http;
pub mod model;
pub mod storage;
pub mod store;

use std::net::SocketAddr;
use std::thread::JoinHandle;

use tokio::sync::oneshot;

pub use clock::{ManualClock, ServerClock, SystemClock};
pub use error::{Error, Result};
pub use http::{router, AppState};
pub use model::{Channel, FeedEntry};
pub use store::{Credential, Store, StoreConfig, UpdateError};

/// A server running on its own runtime thread. Dropping it shuts it down.
#[derive(Debug)]
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting, finishes in-flight requests and joins the thread.
    pub fn shutdown(mut self) -> Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(r)) => Ok(r?),
            Some(Err(_)) => Err(Error::Io(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

fn bind(listen: SocketAddr) -> Result<std::net::TcpListener> {
    let l = std::net::TcpListener::bind(listen)?;
    l.set_nonblocking(true)?;
    Ok(l)
}

fn runtime() -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
}

/// Binds `listen` (port 0 picks one) and serves in the background.
pub fn spawn(state: AppState, listen: SocketAddr) -> Result<RunningServer> {
    let std_listener = bind(listen)?;
    let addr = std_listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name(format!("pulsecloud-server-{}", addr.port()))
        .spawn(move || {
            runtime()?.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        })?;
    Ok(RunningServer { addr, shutdown: Some(tx), thread: Some(thread) })
}

/// Serves on the current thread until the process is stopped. `on_bound`
/// runs once the socket is listening.
pub fn serve_blocking(state: AppState, listen: SocketAddr, on_bound: impl FnOnce(SocketAddr)) -> Result<()> {
    let std_listener = bind(listen)?;
    on_bound(std_listener.local_addr()?);
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(std_listener)?;
        axum::serve(listener, router(state)).await
    })?;
    Ok(())
}
