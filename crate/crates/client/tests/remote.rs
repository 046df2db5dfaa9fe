
use std::sync::Arc;

use councils_client::{Client, ClientError};
use councils_core::api::{ApiContext, Params};
use councils_core::dataset::load_events;
use councils_server::{bind, router, serve};

#[test]
fn remote_calls_decode_to_library_results() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = councils_testkit::fixture_store(dir.path());
    let ctx = ApiContext::new(store.clone(), None);
    let id = load_events(&store).unwrap()[0].id.clone();

    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async move {
        let listener = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(serve(listener, router(Arc::new(ApiContext::new(store, None)), None), async {
            stopped.await.ok();
        }));

        let client = Client::new(&base).unwrap();
        assert_eq!(client.instances().await.unwrap(), ctx.instances().unwrap());
        let p = Params::from_pairs([("limit", "4"), ("offset", "2")]);
        assert_eq!(client.events(&p).await.unwrap(), ctx.events(&p).unwrap());
        assert_eq!(client.event(&id).await.unwrap(), ctx.event_card(&id).unwrap());
        assert_eq!(client.transcript(&id).await.unwrap(), ctx.transcript(&id).unwrap());
        assert_eq!(client.minutes(&id).await.unwrap(), ctx.minutes(&id).unwrap());
        let p = Params::from_pairs([("q", "missing middle housing"), ("sort", "date")]);
        assert_eq!(client.search(&p).await.unwrap(), ctx.search(&p).unwrap());
        let p = Params::from_pairs([("gram", "polic"), ("gram", "housing"), ("pool", "true"), ("aggregate", "monthly")]);
        assert_eq!(client.ngrams(&p).await.unwrap(), ctx.ngrams(&p).unwrap());

        match client.event("0000000000000000").await {
            Err(ClientError::Api { status: 404, error }) => assert!(error.contains("0000000000000000")),
            other => panic!("expected 404, got {other:?}"),
        }
        match client.search(&Params::default()).await {
            Err(ClientError::Api { status: 400, .. }) => {}
            other => panic!("expected 400, got {other:?}"),
        }

        stop.send(()).unwrap();
        server.await.unwrap().unwrap();
    });
}

#[test]
fn bind_conflict_is_reported() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let first = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
        let addr = first.local_addr().unwrap();
        assert!(matches!(bind(addr).await, Err(councils_server::ServeError::Bind { .. })));
    });
}

#[test]
fn unreachable_server_is_transport_error() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let client = Client::new("http://127.0.0.1:9").unwrap();
    assert!(matches!(rt.block_on(client.instances()), Err(ClientError::Transport { .. })));
}
