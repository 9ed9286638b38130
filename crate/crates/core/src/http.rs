//! Shared blocking HTTP plumbing: agent construction, error classification
//! and bounded exponential backoff.

use std::thread;
use std::time::Duration;

use ureq::Agent;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HttpError {
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("request timed out")]
    Timeout,
    #[error("cannot decode response: {0}")]
    Decode(String),
}

impl HttpError {
    /// Transport failures, timeouts, rate limits and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            HttpError::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            HttpError::Network(_) | HttpError::Timeout => true,
            HttpError::Decode(_) => false,
        }
    }
}

impl From<ureq::Error> for HttpError {
    fn from(e: ureq::Error) -> Self {
        match e {
            ureq::Error::StatusCode(status) => HttpError::Status {
                status,
                body: String::new(),
            },
            ureq::Error::Timeout(_) => HttpError::Timeout,
            ureq::Error::Json(e) => HttpError::Decode(e.to_string()),
            other => HttpError::Network(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or the
    /// retry budget is spent. Returns the result and the number of retries used.
    pub fn run<T, E>(&self, mut op: impl FnMut() -> Result<T, E>, retryable: impl Fn(&E) -> bool) -> (Result<T, E>, u32) {
        let mut attempt = 0;
        loop {
            match op() {
                Ok(v) => return (Ok(v), attempt),
                Err(e) if attempt < self.max_retries && retryable(&e) => {
                    let delay = self.delay(attempt);
                    tracing::debug!(attempt, ?delay, "retrying after transient failure");
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return (Err(e), attempt),
            }
        }
    }
}

pub fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

/// Turns a non-2xx response into [`HttpError::Status`], otherwise returns the body text.
pub fn read_body(mut resp: ureq::http::Response<ureq::Body>) -> Result<String, HttpError> {
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(HttpError::from)?;
    if (200..300).contains(&status) {
        Ok(body)
    } else {
        let mut body = body;
        body.truncate(512);
        Err(HttpError::Status { status, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_retries: 5,
            initial_backoff: Duration::from_millis(10),
            max_backoff: Duration::from_millis(35),
        };
        assert_eq!(p.delay(0), Duration::from_millis(10));
        assert_eq!(p.delay(1), Duration::from_millis(20));
        assert_eq!(p.delay(2), Duration::from_millis(35));
    }

    #[test]
    fn retries_until_success() {
        let p = RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::ZERO,
            max_backoff: Duration::ZERO,
        };
        let mut calls = 0;
        let (res, retries) = p.run(
            || {
                calls += 1;
                if calls < 3 {
                    Err(HttpError::Timeout)
                } else {
                    Ok(calls)
                }
            },
            HttpError::is_retryable,
        );
        assert_eq!(res, Ok(3));
        assert_eq!(retries, 2);
    }

    #[test]
    fn non_retryable_stops() {
        let p = RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::ZERO,
            max_backoff: Duration::ZERO,
        };
        let mut calls = 0;
        let (res, _) = p.run::<(), _>(
            || {
                calls += 1;
                Err(HttpError::Status {
                    status: 400,
                    body: String::new(),
                })
            },
            HttpError::is_retryable,
        );
        assert!(res.is_err());
        assert_eq!(calls, 1);
    }
}
