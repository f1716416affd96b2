use serde::{Deserialize, Serialize};

use super::CategoricalSpace;
use crate::error::{invalid, Result};

/// A conjunction of `item = level` constraints over full cells.
///
/// The empty conjunction is the sure event.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    constraints: Vec<(usize, usize)>,
}

impl Event {
    pub fn always() -> Self {
        Event::default()
    }

    pub fn new(constraints: Vec<(usize, usize)>) -> Self {
        Event { constraints }
    }

    pub fn constraints(&self) -> &[(usize, usize)] {
        &self.constraints
    }

    pub fn contains(&self, cell: &[usize]) -> bool {
        self.constraints.iter().all(|&(j, l)| cell[j] == l)
    }

    /// Parse `item=level,item=level` (or `*` for the sure event), resolving
    /// names and labels against `space`.
    pub fn parse(spec: &str, space: &CategoricalSpace) -> Result<Self> {
        let spec = spec.trim();
        if spec.is_empty() || spec == "*" || spec.eq_ignore_ascii_case("true") {
            return Ok(Event::always());
        }
        let mut constraints = Vec::new();
        for part in spec.split(',') {
            let (item, level) = part
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected item=level, got {part:?}")))?;
            let j = space
                .item_index(item.trim())
                .ok_or_else(|| invalid(format!("unknown item {item:?}")))?;
            let l = space
                .level_index(j, level.trim())
                .ok_or_else(|| invalid(format!("unknown level {level:?} for item {item:?}")))?;
            constraints.push((j, l));
        }
        Ok(Event { constraints })
    }

    pub fn validate(&self, space: &CategoricalSpace) -> Result<()> {
        for &(j, l) in &self.constraints {
            if j >= space.item_count() || l >= space.levels()[j] {
                return Err(invalid(format!("constraint item {} level {} out of range", j + 1, l + 1)));
            }
        }
        Ok(())
    }
}

/// A named event whose probability is tracked as a functional.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Functional {
    pub name: String,
    pub event: Event,
}

impl Functional {
    pub fn new(name: impl Into<String>, event: Event) -> Self {
        Functional {
            name: name.into(),
            event,
        }
    }

    /// Parse `name=spec` as accepted by the command line.
    pub fn parse(arg: &str, space: &CategoricalSpace) -> Result<Self> {
        let (name, spec) = arg
            .split_once('=')
            .ok_or_else(|| invalid(format!("functional must look like name=spec, got {arg:?}")))?;
        if name.trim().is_empty() {
            return Err(invalid("functional name is empty"));
        }
        Ok(Functional::new(name.trim(), Event::parse(spec, space)?))
    }
}
