//! Models shipped with the crate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::InMemoryResolver;
use crate::dsl::parse_model;
use crate::model::Model;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExampleModel {
    pub id: &'static str,
    pub title: &'static str,
    pub text: &'static str,
    /// Data files by the relative path used inside `text`.
    pub files: &'static [(&'static str, &'static str)],
}

pub const EXAMPLES: &[ExampleModel] = &[
    ExampleModel {
        id: "rebound_demo",
        title: "Efficiency rebound",
        text: include_str!("../examples/rebound_demo.mag"),
        files: &[],
    },
    ExampleModel {
        id: "second_hand_platform",
        title: "Second-hand clothing platform",
        text: include_str!("../examples/second_hand_platform.mag"),
        files: &[(
            "data/monthly_users.csv",
            include_str!("../examples/data/monthly_users.csv"),
        )],
    },
];

pub fn example(id: &str) -> Option<&'static ExampleModel> {
    EXAMPLES.iter().find(|e| e.id == id)
}

impl ExampleModel {
    /// The parsed model. Shipped files are valid, so this does not fail.
    pub fn model(&self) -> Model {
        let r = parse_model(self.text);
        r.model.unwrap_or_else(|| {
            panic!(
                "shipped model `{}` is invalid: {:?}",
                self.id, r.diagnostics
            )
        })
    }

    /// Resolver serving the bundled data files.
    pub fn resolver(&self) -> InMemoryResolver {
        InMemoryResolver::new(
            self.files
                .iter()
                .map(|(p, t)| (p.to_string(), t.to_string()))
                .collect::<BTreeMap<_, _>>(),
        )
    }
}

pub fn second_hand_platform() -> &'static ExampleModel {
    example("second_hand_platform").expect("shipped")
}

pub fn rebound_demo() -> &'static ExampleModel {
    example("rebound_demo").expect("shipped")
}
