use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{DataResolver, LookupTable, TimeSeries};
use crate::diagnostics::{self as codes, has_errors, Diagnostic};
use crate::expr::{eval_at_site, eval_expression, format_number, Builtin, Env, Expr, NoDelays};
use crate::graph::{build_dependency_graph, evaluation_order};
use crate::model::{Model, VariableKind};
use crate::validate::{eval_constant, model_fingerprint, validate_model};

use super::{apply_scenario, Scenario, SimError};

/// Exogenous series keyed by variable id.
pub type LoadedData = BTreeMap<String, TimeSeries>;

/// Resolve every data binding of `model` once, for reuse across runs.
pub fn load_data(model: &Model, resolver: &dyn DataResolver) -> Result<LoadedData, SimError> {
    let mut out = LoadedData::new();
    for v in &model.variables {
        if v.kind != VariableKind::ExogenousData {
            continue;
        }
        let Some(binding) = model.data_bindings.get(&v.id) else {
            continue;
        };
        let series = resolver
            .resolve(&v.id, binding)
            .map_err(|source| SimError::Data {
                variable: v.id.clone(),
                source,
            })?;
        out.insert(v.id.clone(), series);
    }
    Ok(out)
}

/// Series of one simulation on the grid `t_start + n*dt`, `n = 0..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario_name: String,
    pub model_id: String,
    /// Fingerprint of the base model, shared by all scenarios of it.
    pub model_fingerprint: String,
    /// Fingerprint of the model after applying the scenario.
    pub scenario_fingerprint: String,
    pub t_start: f64,
    pub t_stop: f64,
    pub dt: f64,
    pub time_unit: String,
    pub times: Vec<f64>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub diagnostics: Vec<Diagnostic>,
}

impl RunResult {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn series(&self, id: &str) -> Option<&[f64]> {
        self.series.get(id).map(Vec::as_slice)
    }

    /// Keep only the named series. Unknown names are an error.
    pub fn select(&self, ids: &[String]) -> Result<RunResult, Diagnostic> {
        let mut out = self.clone();
        out.series.clear();
        for id in ids {
            let s = self.series.get(id).ok_or_else(|| {
                Diagnostic::new(codes::E_UNKNOWN_SERIES, format!("run has no series `{id}`"))
                    .at_element(id.as_str())
            })?;
            out.series.insert(id.clone(), s.clone());
        }
        Ok(out)
    }

    /// `t` then one column per series in id order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for id in self.series.keys() {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (n, t) in self.times.iter().enumerate() {
            out.push_str(&format_number(*t));
            for s in self.series.values() {
                write!(out, ",{}", format_number(s[n])).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run result serializes")
    }
}

/// Run one scenario, resolving data through `resolver`.
pub fn run(
    model: &Model,
    scenario: &Scenario,
    resolver: &dyn DataResolver,
) -> Result<RunResult, SimError> {
    check_base(model)?;
    let data = load_data(model, resolver)?;
    run_checked(model, scenario, &data)
}

/// Run one scenario against already loaded data.
pub fn run_loaded(
    model: &Model,
    scenario: &Scenario,
    data: &LoadedData,
) -> Result<RunResult, SimError> {
    check_base(model)?;
    run_checked(model, scenario, data)
}

/// Run several scenarios of one model in parallel. The model and data are
/// shared read-only; each run owns all of its state. Results keep the order
/// of `scenarios`.
pub fn run_scenarios(
    model: &Model,
    scenarios: &[Scenario],
    resolver: &dyn DataResolver,
) -> Vec<Result<RunResult, SimError>> {
    if let Err(e) = check_base(model) {
        return scenarios.iter().map(|_| Err(e.clone())).collect();
    }
    let data = match load_data(model, resolver) {
        Ok(d) => d,
        Err(e) => return scenarios.iter().map(|_| Err(e.clone())).collect(),
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| {
                let data = &data;
                scope.spawn(move || run_checked(model, s, data))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    })
}

fn check_base(model: &Model) -> Result<(), SimError> {
    let diags = validate_model(model);
    if has_errors(&diags) {
        return Err(SimError::InvalidModel(diags));
    }
    Ok(())
}

fn run_checked(
    model: &Model,
    scenario: &Scenario,
    data: &LoadedData,
) -> Result<RunResult, SimError> {
    let effective = apply_scenario(model, scenario).map_err(SimError::Scenario)?;
    let diags = validate_model(&effective);
    if has_errors(&diags) {
        return Err(SimError::InvalidModel(diags));
    }
    let warnings = diags
        .into_iter()
        .filter(|d| d.code == codes::W_DELAY_ROUND)
        .collect();
    let mut result = simulate(&effective, data, warnings)?;
    result.scenario_name = scenario.name.clone();
    result.model_fingerprint = model_fingerprint(model);
    result.scenario_fingerprint = model_fingerprint(&effective);
    Ok(result)
}

struct SlotEnv<'a> {
    slots: &'a HashMap<&'a str, usize>,
    values: &'a [f64],
    tables: &'a [LookupTable],
}

impl Env for SlotEnv<'_> {
    fn value(&self, id: &str) -> Option<f64> {
        self.slots.get(id).map(|&i| self.values[i])
    }

    fn table(&self, id: &str) -> Option<&LookupTable> {
        self.tables.iter().find(|t| t.id == id)
    }
}

enum DelayKind {
    Smooth {
        tau: f64,
        state: f64,
    },
    Fixed {
        steps: usize,
        init: f64,
        buffer: VecDeque<f64>,
    },
}

struct DelaySite<'m> {
    owner: &'m str,
    input: &'m Expr,
    /// global index of the owner's first site
    owner_base: usize,
    /// index of this site within the owner's expression
    local: usize,
    kind: DelayKind,
}

impl DelaySite<'_> {
    fn output(&self) -> f64 {
        match &self.kind {
            DelayKind::Smooth { state, .. } => *state,
            DelayKind::Fixed {
                steps,
                init,
                buffer,
            } => {
                if buffer.len() == *steps {
                    buffer[0]
                } else {
                    *init
                }
            }
        }
    }

    fn commit(&mut self, input: f64, dt: f64) {
        match &mut self.kind {
            DelayKind::Smooth { tau, state } => *state += dt / *tau * (input - *state),
            DelayKind::Fixed { steps, buffer, .. } => {
                buffer.push_back(input);
                if buffer.len() > *steps {
                    buffer.pop_front();
                }
            }
        }
    }
}

struct Aux<'m> {
    id: &'m str,
    slot: usize,
    expr: &'m Expr,
    site_base: usize,
}

struct StockSlot {
    slot: usize,
    inflows: Vec<usize>,
    outflows: Vec<usize>,
    non_negative: bool,
    clamped: bool,
}

fn eval_error(id: &str, t: f64, e: crate::expr::EvalError) -> SimError {
    SimError::Eval {
        code: e.code(),
        variable: id.to_string(),
        t,
        message: e.to_string(),
    }
}

fn simulate(
    m: &Model,
    data: &LoadedData,
    mut diagnostics: Vec<Diagnostic>,
) -> Result<RunResult, SimError> {
    let spec = &m.time_spec;
    let steps = spec.steps().expect("validated time spec");
    let dt = spec.dt;

    let ids: Vec<&str> = m
        .variables
        .iter()
        .map(|v| v.id.as_str())
        .chain(m.stocks.iter().map(|s| s.id.as_str()))
        .collect();
    let slots: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut values = vec![0.0; ids.len()];

    let order = evaluation_order(&build_dependency_graph(m))
        .expect("validated model has no algebraic loop");
    let mut auxes = Vec::new();
    let mut sites: Vec<DelaySite> = Vec::new();
    for id in &order {
        let Some(v) = m.variable(id) else { continue };
        let Some(expr) = &v.expression else { continue };
        let slot = slots[id.as_str()];
        match v.kind {
            VariableKind::Constant => {
                let env = SlotEnv {
                    slots: &slots,
                    values: &values,
                    tables: &m.lookups,
                };
                values[slot] = eval_expression(expr, &env, spec.t_start, &NoDelays)
                    .map_err(|e| eval_error(id, spec.t_start, e))?;
            }
            VariableKind::Auxiliary => {
                let site_base = sites.len();
                for (local, site) in expr.delay_sites().into_iter().enumerate() {
                    let Expr::Call(b, args) = site else {
                        unreachable!()
                    };
                    let param = |e: &Expr| {
                        eval_constant(m, e, spec.t_start).expect("validated delay parameter")
                    };
                    let kind = match b {
                        Builtin::Smooth => DelayKind::Smooth {
                            tau: param(&args[1]),
                            state: param(&args[2]),
                        },
                        _ => DelayKind::Fixed {
                            steps: (param(&args[1]) / dt).round() as usize,
                            init: param(&args[2]),
                            buffer: VecDeque::new(),
                        },
                    };
                    sites.push(DelaySite {
                        owner: &v.id,
                        input: &args[0],
                        owner_base: site_base,
                        local,
                        kind,
                    });
                }
                auxes.push(Aux {
                    id: &v.id,
                    slot,
                    expr,
                    site_base,
                });
            }
            VariableKind::ExogenousData => {}
        }
    }
    let exogenous: Vec<(&str, usize, &TimeSeries)> = m
        .variables
        .iter()
        .filter(|v| v.kind == VariableKind::ExogenousData)
        .map(|v| {
            (
                v.id.as_str(),
                slots[v.id.as_str()],
                data.get(&v.id).expect("data loaded for every binding"),
            )
        })
        .collect();

    let mut stocks: Vec<StockSlot> = m
        .stocks
        .iter()
        .map(|s| StockSlot {
            slot: slots[s.id.as_str()],
            inflows: s.inflows.iter().map(|f| slots[f.as_str()]).collect(),
            outflows: s.outflows.iter().map(|f| slots[f.as_str()]).collect(),
            non_negative: s.non_negative,
            clamped: false,
        })
        .collect();
    let mut levels = Vec::with_capacity(stocks.len());
    for s in &m.stocks {
        let env = SlotEnv {
            slots: &slots,
            values: &values,
            tables: &m.lookups,
        };
        let v = eval_expression(&s.initial, &env, spec.t_start, &NoDelays)
            .map_err(|e| eval_error(&s.id, spec.t_start, e))?;
        levels.push(if s.non_negative { v.max(0.0) } else { v });
    }

    let mut history: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); ids.len()];
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs: Vec<f64> = sites.iter().map(DelaySite::output).collect();
    let mut inputs = vec![0.0; sites.len()];

    for n in 0..=steps {
        let t = spec.time_at(n);
        times.push(t);
        for (id, slot, series) in &exogenous {
            values[*slot] = series.sample(t).map_err(|source| SimError::Data {
                variable: id.to_string(),
                source,
            })?;
        }
        for (s, level) in stocks.iter().zip(&levels) {
            values[s.slot] = *level;
        }
        for a in &auxes {
            let env = SlotEnv {
                slots: &slots,
                values: &values,
                tables: &m.lookups,
            };
            let v = eval_expression(a.expr, &env, t, &outputs[a.site_base..])
                .map_err(|e| eval_error(a.id, t, e))?;
            values[a.slot] = v;
        }
        for (h, v) in history.iter_mut().zip(&values) {
            h.push(*v);
        }
        if n == steps {
            break;
        }

        for (s, level) in stocks.iter_mut().zip(levels.iter_mut()) {
            let net: f64 = s.inflows.iter().map(|&i| values[i]).sum::<f64>()
                - s.outflows.iter().map(|&i| values[i]).sum::<f64>();
            let next = *level + dt * net;
            if s.non_negative && next < 0.0 {
                if !s.clamped {
                    s.clamped = true;
                    let id = ids[s.slot];
                    diagnostics.push(
                        Diagnostic::new(
                            codes::W_CLAMP,
                            format!(
                                "stock `{id}` would fall to {next} at t = {}; clamped at 0",
                                spec.time_at(n + 1)
                            ),
                        )
                        .at_element(id),
                    );
                }
                *level = 0.0;
            } else {
                *level = next;
            }
        }

        {
            let env = SlotEnv {
                slots: &slots,
                values: &values,
                tables: &m.lookups,
            };
            for (k, site) in sites.iter().enumerate() {
                inputs[k] = eval_at_site(
                    site.input,
                    &env,
                    t,
                    &outputs[site.owner_base..],
                    site.local + 1,
                )
                .map_err(|e| eval_error(site.owner, t, e))?;
            }
        }
        for (k, site) in sites.iter_mut().enumerate() {
            site.commit(inputs[k], dt);
            outputs[k] = site.output();
        }
    }

    let series = ids
        .iter()
        .zip(history)
        .map(|(id, h)| (id.to_string(), h))
        .collect();
    Ok(RunResult {
        scenario_name: String::new(),
        model_id: m.id.clone(),
        model_fingerprint: String::new(),
        scenario_fingerprint: String::new(),
        t_start: spec.t_start,
        t_stop: spec.t_stop,
        dt,
        time_unit: spec.time_unit.clone(),
        times,
        series,
        diagnostics,
    })
}
