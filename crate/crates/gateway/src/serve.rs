//! Live session service: one worker thread runs the pipeline, WebSocket
//! clients receive its events through a broadcast channel and send tags back.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use nordwatch_core::features::{FeatureConfig, FeatureKey};
use nordwatch_core::labeling::JudgeMode;
use nordwatch_core::session::{Session, SessionConfig, UnsupervisedConfig};
use nordwatch_core::stream::replay::{replay, Speed};
use nordwatch_core::stream::{ClassLabel, ClassSet, RawSlot};
use tokio::sync::broadcast;
use tracing::{info, warn};

use crate::cli::{check_source, Problems, ServeArgs};
use crate::data;
use crate::wire::{parse_inbound, Envelope, Request, WireEvent};
use crate::{GatewayError, Result};

/// Events buffered per client before the oldest are dropped.
pub const CLIENT_BUFFER: usize = 1000;
/// Shortest gap between two displayed slots (25 events per second).
pub const DISPLAY_INTERVAL: Duration = Duration::from_millis(40);

type Event = Arc<serde_json::Value>;

#[derive(Debug)]
enum Command {
    Tag {
        label: ClassLabel,
        slot: Option<u64>,
        source: String,
    },
    Explain,
}

#[derive(Clone)]
struct AppState {
    events: broadcast::Sender<Event>,
    commands: mpsc::Sender<Command>,
    classes: Arc<ClassSet>,
    clients: Arc<AtomicUsize>,
}

struct WorkerOptions {
    speed: Speed,
    explain_every: u64,
    metrics_interval: Duration,
    wait_clients: usize,
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let mut p = Problems::default();
    let dataset = check_source(&mut p, &args.source);
    let mode = p.check(args.judge_mode.parse::<JudgeMode>());
    let speed = p.check(Speed::new(args.speed));
    if args.stride == 0 {
        p.push("--stride must be at least 1");
    }
    if args.tick == 0 {
        p.push("--tick must be at least 1");
    }
    if !(args.metrics_interval > 0.0) {
        p.push(format!(
            "--metrics-interval must be > 0, got {}",
            args.metrics_interval
        ));
    }
    p.finish()?;
    let dataset = dataset.unwrap();

    let loaded = data::load(dataset, &args.source, 1)?.remove(0);
    let descriptor = loaded.stream.descriptor.clone();
    let n_classes = descriptor.classes.len();
    let config = SessionConfig {
        features: FeatureConfig::default(),
        params: data::model_params(dataset, n_classes, loaded.seed),
        stride: args.stride,
        unsupervised: UnsupervisedConfig {
            tick_slots: args.tick,
            mode: mode.unwrap(),
        },
        min_run: 25,
    };
    let mut session = Session::new(descriptor.clone(), config)?;
    if let Some(path) = &args.tags {
        if !path.exists() {
            return Err(GatewayError::Data(format!(
                "tag file `{}` does not exist",
                path.display()
            )));
        }
        for tag in nordwatch_core::labeling::read_tags(std::fs::File::open(path)?)? {
            session.add_tag(tag.label, Some(tag.slot), &tag.source)?;
        }
    }

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| {
                GatewayError::Config(format!("cannot bind {}:{}: {e}", args.host, args.port))
            })?;
        let addr = listener.local_addr()?;
        println!("listening on {addr}");
        use std::io::Write as _;
        std::io::stdout().flush()?;

        let (events, _) = broadcast::channel(CLIENT_BUFFER);
        let (commands, inbox) = mpsc::channel();
        let state = AppState {
            events: events.clone(),
            commands,
            classes: Arc::new(descriptor.classes.clone()),
            clients: Arc::new(AtomicUsize::new(0)),
        };
        let opts = WorkerOptions {
            speed: speed.unwrap(),
            explain_every: args.explain_every,
            metrics_interval: Duration::from_secs_f64(args.metrics_interval),
            wait_clients: args.wait_clients,
        };
        let clients = state.clients.clone();
        let slots = loaded.stream.slots;
        thread::spawn(move || worker(session, slots, opts, events, inbox, clients));

        let app = Router::new()
            .route("/ws", get(ws_handler))
            .route("/health", get(|| async { "ok" }))
            .with_state(state);
        axum::serve(listener, app).await?;
        Ok(())
    })
}

fn emit(events: &broadcast::Sender<Event>, event: WireEvent) {
    let value = serde_json::to_value(event).expect("wire events serialize");
    // no receivers is fine: nobody is watching yet
    let _ = events.send(Arc::new(value));
}

struct Worker {
    session: Session,
    events: broadcast::Sender<Event>,
    display_key: Option<FeatureKey>,
    ended: bool,
}

impl Worker {
    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Tag {
                label,
                slot,
                source,
            } => match self.session.add_tag(label, slot, &source) {
                Ok(tag) => {
                    if self.ended {
                        if let Err(e) = self.session.flush_tags() {
                            emit(
                                &self.events,
                                WireEvent::Error {
                                    message: e.to_string(),
                                },
                            );
                        }
                    }
                    emit(&self.events, WireEvent::tag_ack(&tag));
                }
                Err(e) => emit(
                    &self.events,
                    WireEvent::Error {
                        message: e.to_string(),
                    },
                ),
            },
            Command::Explain => self.explain(),
        }
    }

    fn explain(&mut self) {
        if let Some(report) = self.session.explain() {
            if report.display_key.is_some() {
                self.display_key = report.display_key;
            }
            emit(&self.events, WireEvent::explanation(&report));
        }
    }

    fn metrics(&self) {
        emit(&self.events, WireEvent::Metrics(self.session.metrics()));
    }
}

fn worker(
    session: Session,
    slots: Vec<RawSlot>,
    opts: WorkerOptions,
    events: broadcast::Sender<Event>,
    inbox: mpsc::Receiver<Command>,
    clients: Arc<AtomicUsize>,
) {
    while clients.load(Ordering::SeqCst) < opts.wait_clients {
        thread::sleep(Duration::from_millis(10));
    }
    info!(slots = slots.len(), "replay started");
    let mut w = Worker {
        session,
        events,
        display_key: None,
        ended: false,
    };
    let mut last_metrics = Instant::now();
    let mut last_display: Option<Instant> = None;
    let mut count = 0u64;
    replay(slots, opts.speed, |slot| {
        while let Ok(cmd) = inbox.try_recv() {
            w.handle(cmd);
        }
        count += 1;
        let step = match w.session.push(&slot) {
            Ok(step) => step,
            Err(e) => {
                warn!("pipeline stopped: {e}");
                emit(
                    &w.events,
                    WireEvent::Error {
                        message: e.to_string(),
                    },
                );
                return false;
            }
        };
        if let Some(fv) = &step.sample {
            if last_display.is_none_or(|t| t.elapsed() >= DISPLAY_INTERVAL) {
                last_display = Some(Instant::now());
                emit(&w.events, WireEvent::slot(fv));
                let key = w.display_key.or_else(|| fv.keys().next().copied());
                if let Some((key, value)) = key.and_then(|k| fv.get(&k).map(|v| (k, v))) {
                    emit(
                        &w.events,
                        WireEvent::Feature {
                            n: fv.n,
                            key: key.to_string(),
                            value,
                        },
                    );
                }
            }
            if opts.explain_every > 0 && fv.n % opts.explain_every == 0 {
                w.explain();
            }
        }
        if let Some(p) = step.prediction.as_ref().filter(|p| p.learned) {
            emit(&w.events, WireEvent::prediction(p));
        }
        if last_metrics.elapsed() >= opts.metrics_interval {
            last_metrics = Instant::now();
            w.metrics();
        }
        true
    });
    w.ended = true;
    if let Err(e) = w.session.flush_tags() {
        emit(
            &w.events,
            WireEvent::Error {
                message: e.to_string(),
            },
        );
    }
    emit(&w.events, WireEvent::End { slots: count });
    w.metrics();
    info!(slots = count, "replay finished");
    loop {
        match inbox.recv_timeout(opts.metrics_interval) {
            Ok(cmd) => w.handle(cmd),
            Err(mpsc::RecvTimeoutError::Timeout) => w.metrics(),
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        }
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn send(
    socket: &mut futures::stream::SplitSink<WebSocket, Message>,
    seq: &mut u64,
    event: &serde_json::Value,
) -> bool {
    *seq += 1;
    let text = serde_json::to_string(&Envelope { seq: *seq, event }).expect("envelope serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn client(socket: WebSocket, state: AppState) {
    let mut events = state.events.subscribe();
    state.clients.fetch_add(1, Ordering::SeqCst);
    let (mut tx, mut rx) = socket.split();
    let mut seq = 0u64;
    loop {
        tokio::select! {
            ev = events.recv() => {
                let ok = match ev {
                    Ok(v) => send(&mut tx, &mut seq, &v).await,
                    Err(broadcast::error::RecvError::Lagged(dropped)) => {
                        let gap = serde_json::to_value(WireEvent::Gap { dropped }).unwrap();
                        send(&mut tx, &mut seq, &gap).await
                    }
                    Err(broadcast::error::RecvError::Closed) => false,
                };
                if !ok {
                    break;
                }
            }
            msg = rx.next() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let cmd = match parse_inbound(&text, &state.classes) {
                    Ok(Request::Tag { label, slot, source }) => Command::Tag { label, slot, source },
                    Ok(Request::Explain) => Command::Explain,
                    Err(message) => {
                        let err = serde_json::to_value(WireEvent::Error { message }).unwrap();
                        if !send(&mut tx, &mut seq, &err).await {
                            break;
                        }
                        continue;
                    }
                };
                if state.commands.send(cmd).is_err() {
                    break;
                }
            }
        }
    }
    state.clients.fetch_sub(1, Ordering::SeqCst);
}
