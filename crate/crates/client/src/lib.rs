//! Typed access to the `/api/*` endpoints. Responses decode into the same
//! types the library returns, so a remote call and a local call can be
//! compared directly.

use councils_core::analytics::UsageSeries;
use councils_core::api::{
    ErrorBody, EventCard, EventsResponse, InstancesResponse, MinutesResponse, Params, SearchResponse,
};
use councils_core::domain::Transcript;
use serde::de::DeserializeOwned;
use url::Url;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server URL {0:?}")]
    InvalidUrl(String),
    #[error("request to {url} failed: {source}")]
    Transport { url: String, source: reqwest::Error },
    #[error("server answered {status}: {error}")]
    Api { status: u16, error: String },
    #[error("cannot decode response from {url}: {source}")]
    Decode { url: String, source: serde_json::Error },
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: Url,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Result<Self, ClientError> {
        let base = Url::parse(base).map_err(|_| ClientError::InvalidUrl(base.to_string()))?;
        if base.cannot_be_a_base() || !matches!(base.scheme(), "http" | "https") {
            return Err(ClientError::InvalidUrl(base.to_string()));
        }
        Ok(Client { http: reqwest::Client::new(), base })
    }

    pub fn url(&self, segments: &[&str], params: &Params) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("checked in new").pop_if_empty().extend(segments);
        if !params.pairs().is_empty() {
            url.query_pairs_mut().extend_pairs(params.pairs());
        }
        url
    }

    /// Status code and body bytes, without interpreting either.
    pub async fn get_raw(&self, segments: &[&str], params: &Params) -> Result<(u16, Vec<u8>), ClientError> {
        let url = self.url(segments, params);
        let transport = |source| ClientError::Transport { url: url.to_string(), source };
        let response = self.http.get(url.clone()).send().await.map_err(transport)?;
        let status = response.status().as_u16();
        let body = response.bytes().await.map_err(transport)?;
        Ok((status, body.to_vec()))
    }

    async fn get<T: DeserializeOwned>(&self, segments: &[&str], params: &Params) -> Result<T, ClientError> {
        let (status, body) = self.get_raw(segments, params).await?;
        if status != 200 {
            let error = serde_json::from_slice::<ErrorBody>(&body)
                .map(|b| b.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&body).into_owned());
            return Err(ClientError::Api { status, error });
        }
        serde_json::from_slice(&body)
            .map_err(|source| ClientError::Decode { url: self.url(segments, params).to_string(), source })
    }

    pub async fn instances(&self) -> Result<InstancesResponse, ClientError> {
        self.get(&["api", "instances"], &Params::default()).await
    }

    pub async fn events(&self, params: &Params) -> Result<EventsResponse, ClientError> {
        self.get(&["api", "events"], params).await
    }

    pub async fn event(&self, id: &str) -> Result<EventCard, ClientError> {
        self.get(&["api", "events", id], &Params::default()).await
    }

    pub async fn transcript(&self, id: &str) -> Result<Transcript, ClientError> {
        self.get(&["api", "events", id, "transcript"], &Params::default()).await
    }

    pub async fn minutes(&self, id: &str) -> Result<MinutesResponse, ClientError> {
        self.get(&["api", "events", id, "minutes"], &Params::default()).await
    }

    pub async fn search(&self, params: &Params) -> Result<SearchResponse, ClientError> {
        self.get(&["api", "search"], params).await
    }

    pub async fn ngrams(&self, params: &Params) -> Result<Vec<UsageSeries>, ClientError> {
        self.get(&["api", "ngrams"], params).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_building() {
        let c = Client::new("http://127.0.0.1:8080/").unwrap();
        let p = Params::from_pairs([("gram", "missing middle"), ("instance", "a")]);
        assert_eq!(
            c.url(&["api", "ngrams"], &p).as_str(),
            "http://127.0.0.1:8080/api/ngrams?gram=missing+middle&instance=a"
        );
        assert_eq!(c.url(&["api", "events", "a/b"], &Params::default()).as_str(), "http://127.0.0.1:8080/api/events/a%2Fb");
        let prefixed = Client::new("http://example.org/councils").unwrap();
        assert_eq!(prefixed.url(&["api", "instances"], &Params::default()).path(), "/councils/api/instances");
    }

    #[test]
    fn rejects_bad_base() {
        assert!(Client::new("not a url").is_err());
        assert!(Client::new("ftp://example.org").is_err());
    }
}
