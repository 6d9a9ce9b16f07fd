//! `check`: standalone feasibility report for `(P, s, r_c)`.

use byzcode::{validate_config, MechanismConfig};

use crate::config::feasibility_hint;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub feasible: bool,
    pub text: String,
}

pub fn cmd_check(workers: usize, s: usize, rc: usize) -> CheckReport {
    // d does not affect feasibility; r_c keeps d_c = 1 for the report
    match validate_config(workers, s, rc, rc) {
        Ok(cfg) => CheckReport {
            feasible: true,
            text: feasible_text(&cfg),
        },
        Err(err) => {
            let hint = feasibility_hint(&err, workers, s, rc);
            CheckReport {
                feasible: false,
                text: format!("infeasible: {err}{hint}"),
            }
        }
    }
}

fn feasible_text(cfg: &MechanismConfig) -> String {
    format!(
        "feasible: P = {p}, s = {s}, r_c = {rc}\n\
         r = 2s + r_c = {r}\n\
         q = P / r = {q}\n\
         d_c = ceil(d / {rc})",
        p = cfg.workers(),
        s = cfg.max_adversaries(),
        rc = cfg.compression(),
        r = cfg.redundancy(),
        q = cfg.groups(),
    )
}
