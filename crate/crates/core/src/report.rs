//! Plain-text episode outputs.

use std::fmt::Write as _;

use crate::dynamics::AgentState;
use crate::sim::StepRecord;

pub const TRACE_HEADER: &str = "t,agent_id,px,py,vx,vy,ux,uy,theta,speed,min_h_c,min_h_vo";

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

fn opt(out: &mut String, v: f64) {
    if v.is_finite() {
        num(out, v);
    }
}

/// Trace as CSV, one row per agent per recorded instant. Car-only columns
/// are blank for integrator agents and barrier minima are blank for agents
/// without neighbors. Floats round-trip exactly.
pub fn trace_csv(trace: &[StepRecord]) -> String {
    let mut out = String::with_capacity(128 * trace.len().max(1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for rec in trace {
        for (id, a) in rec.agents.iter().enumerate() {
            let p = a.state.position();
            let v = a.state.velocity();
            num(&mut out, rec.t);
            write!(out, ",{id}").unwrap();
            for x in [p.x, p.y, v.x, v.y, a.u.x, a.u.y] {
                out.push(',');
                num(&mut out, x);
            }
            out.push(',');
            if let AgentState::Car(c) = a.state {
                num(&mut out, c.theta);
                out.push(',');
                num(&mut out, c.v);
            } else {
                out.push(',');
            }
            out.push(',');
            opt(&mut out, a.min_h_c);
            out.push(',');
            opt(&mut out, a.min_h_vo);
            out.push('\n');
        }
    }
    out
}
