//! Versioned JSON envelope shared by every command.

use serde::Serialize;

pub const SCHEMA: &str = "sobolev-report/1";

/// `{"schema": ..., "command": ..., "seed": ..., <body fields>}`.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub body: &'a T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, seed: Option<u64>, body: &'a T) -> Self {
        Envelope {
            schema: SCHEMA,
            command,
            seed,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Body {
        value: f64,
    }

    #[test]
    fn envelope_flattens_the_body() {
        let v: serde_json::Value = serde_json::from_str(
            &Envelope::new("estimate", Some(3), &Body { value: 1.5 }).to_json(),
        )
        .unwrap();
        assert_eq!(v["schema"], "sobolev-report/1");
        assert_eq!(v["command"], "estimate");
        assert_eq!(v["seed"], 3);
        assert_eq!(v["value"], 1.5);
    }
}
