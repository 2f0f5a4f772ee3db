//! Browser bindings: plan inspection, one simulated grid cell, and the full
//! bandwidth x latency sweep for the heatmap page in `www/`.
//!
//! The `*_json`/`*_csv` functions hold the logic and run on any target; the
//! exported wrappers only convert errors for JavaScript.

use std::collections::BTreeMap;

use flowunits::bundled;
use flowunits::netsim::{simulate, Bandwidth, NetworkCondition, SimReport};
use flowunits::planner::{plan, ExecutionGraph, JobSpec, Strategy};
use flowunits::topology::ZoneTopology;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// A bundled name, or a topology document if the text starts with `{`.
fn topology(spec: &str) -> Result<ZoneTopology, String> {
    let spec = spec.trim();
    if spec.starts_with('{') { ZoneTopology::parse(spec) } else { bundled::topology(spec) }.map_err(|e| e.to_string())
}

fn job(pipeline: &str, locations: &str, strategy: Strategy, events: u64, seed: u64) -> Result<JobSpec, String> {
    let graph = bundled::pipeline(pipeline, bundled::DEFAULT_WINDOW)
        .ok_or_else(|| format!("unknown pipeline `{pipeline}`"))?
        .map_err(|e| e.to_string())?;
    let locations: Vec<&str> = locations.split(',').map(str::trim).filter(|l| !l.is_empty()).collect();
    Ok(JobSpec::new(graph, locations, strategy).with_workload(events, seed))
}

fn plan_for(t: &ZoneTopology, job: &JobSpec) -> Result<ExecutionGraph, String> {
    job.validate(t).map_err(|e| e.to_string())?;
    plan(job, t).map_err(|e| e.to_string())
}

fn condition(bandwidth: &str, latency_ms: f64) -> Result<NetworkCondition, String> {
    let c = NetworkCondition::new(bandwidth.parse::<Bandwidth>()?, latency_ms);
    c.validate()?;
    Ok(c)
}

/// Units with the zones they run in, and instance counts per operator.
pub fn plan_summary_json(topology_spec: &str, pipeline: &str, locations: &str, strategy: &str) -> Result<String, String> {
    let t = topology(topology_spec)?;
    let p = plan_for(&t, &job(pipeline, locations, strategy.parse()?, 0, 0)?)?;
    let units: Vec<_> = p
        .units
        .iter()
        .map(|u| {
            let zones: Vec<&str> =
                p.unit_instances.iter().filter(|ui| ui.unit == u.id).map(|ui| ui.zone.as_str()).collect();
            let members: Vec<String> = u.members.iter().map(|&m| p.graph.operator(m).label()).collect();
            json!({"unit": u.label(), "layer": u.layer, "operators": members, "zones": zones})
        })
        .collect();
    let instances: BTreeMap<String, usize> =
        p.graph.operators().iter().map(|o| (o.label(), p.instance_count(o.id))).collect();
    Ok(json!({"units": units, "instances": instances, "channels": p.channels.len()}).to_string())
}

fn link_bytes(r: &SimReport) -> BTreeMap<&str, u64> {
    r.links.iter().map(|(k, v)| (k.as_str(), v.bytes)).collect()
}

/// Both strategies under one condition: makespans, ratio and bytes per link.
pub fn run_cell_json(
    topology_spec: &str,
    pipeline: &str,
    locations: &str,
    bandwidth: &str,
    latency_ms: f64,
    events: u64,
    seed: u64,
) -> Result<String, String> {
    let t = topology(topology_spec)?;
    let cond = condition(bandwidth, latency_ms)?;
    let run = |s| -> Result<SimReport, String> {
        let j = job(pipeline, locations, s, events, seed)?;
        let p = plan_for(&t, &j)?;
        Ok(simulate(&p, &t, &cond, &j).map_err(|e| e.to_string())?.report)
    };
    let (bl, fu) = (run(Strategy::Baseline)?, run(Strategy::FlowUnits)?);
    Ok(json!({
        "baseline_makespan_s": bl.makespan_s,
        "flowunits_makespan_s": fu.makespan_s,
        "ratio": bl.makespan_s / fu.makespan_s,
        "same_output": bl.sink_digest == fu.sink_digest,
        "baseline_link_bytes": link_bytes(&bl),
        "flowunits_link_bytes": link_bytes(&fu),
    })
    .to_string())
}

/// Sequential sweep; same CSV columns and row order as the command line.
pub fn grid_csv(
    topology_spec: &str,
    pipeline: &str,
    locations: &str,
    bandwidths: &str,
    latencies_ms: &str,
    events: u64,
    seed: u64,
) -> Result<String, String> {
    let t = topology(topology_spec)?;
    let fu_job = job(pipeline, locations, Strategy::FlowUnits, events, seed)?;
    let bl_job = fu_job.clone().with_strategy(Strategy::Baseline);
    let (fu_plan, bl_plan) = (plan_for(&t, &fu_job)?, plan_for(&t, &bl_job)?);
    let latencies: Vec<f64> = latencies_ms
        .split(',')
        .map(|l| l.trim().parse::<f64>().map_err(|_| format!("invalid latency `{l}`")))
        .collect::<Result<_, _>>()?;
    let mut out = String::from("bandwidth,latency,baseline_makespan_s,flowunits_makespan_s,ratio\n");
    for bw in bandwidths.split(',').map(str::trim) {
        for &lat in &latencies {
            let cond = condition(bw, lat)?;
            let bl = simulate(&bl_plan, &t, &cond, &bl_job).map_err(|e| e.to_string())?.report;
            let fu = simulate(&fu_plan, &t, &cond, &fu_job).map_err(|e| e.to_string())?.report;
            let ratio = bl.makespan_s / fu.makespan_s;
            out += &format!("{},{lat},{},{},{ratio}\n", cond.bandwidth, bl.makespan_s, fu.makespan_s);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn plan_summary(topology: &str, pipeline: &str, locations: &str, strategy: &str) -> Result<String, JsError> {
    plan_summary_json(topology, pipeline, locations, strategy).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn run_cell(
    topology: &str,
    pipeline: &str,
    locations: &str,
    bandwidth: &str,
    latency_ms: f64,
    events: u32,
    seed: u32,
) -> Result<String, JsError> {
    run_cell_json(topology, pipeline, locations, bandwidth, latency_ms, events.into(), seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn grid(
    topology: &str,
    pipeline: &str,
    locations: &str,
    bandwidths: &str,
    latencies_ms: &str,
    events: u32,
    seed: u32,
) -> Result<String, JsError> {
    grid_csv(topology, pipeline, locations, bandwidths, latencies_ms, events.into(), seed.into()).map_err(|e| JsError::new(&e))
}
