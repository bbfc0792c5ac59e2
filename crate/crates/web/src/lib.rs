//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every method returns flat `f64` buffers so the page can draw without a
//! serialization layer. Values are in the objective's reported sign.

use cglo::baselines::{random_search as rs, RandomSearchConfig};
use cglo::cglo::{CgloConfig, Iteration, Session};
use cglo::objectives::{self, StochasticObjective};
use wasm_bindgen::prelude::*;

fn objective(name: &str, seed: u64) -> Result<StochasticObjective, String> {
    objectives::by_name(name, seed).map_err(|e| e.to_string())
}

fn preset(name: &str, seed: u64, budget: u64) -> CgloConfig {
    if name == "sun2d" {
        CgloConfig::sun_2d(seed, budget)
    } else {
        CgloConfig::paper_1d(seed, budget)
    }
}

fn describe(it: &Iteration) -> String {
    let ending = if it.local.switched {
        "switched"
    } else if it.local.exhausted {
        "budget spent"
    } else {
        "effort cap"
    };
    format!(
        "region {} (gEI {:.3e}): {} new point(s), {}; allocation B1 = {}, B2 = {}",
        it.global.region, it.global.gei_value, it.local.n_new, ending, it.allocation.b1, it.allocation.b2
    )
}

/// One optimizer run that the page advances an iteration at a time.
#[wasm_bindgen]
pub struct Demo {
    session: Session,
    last: String,
}

#[wasm_bindgen]
impl Demo {
    /// `objective` is `paper1d` or `sun2d`.
    #[wasm_bindgen(constructor)]
    pub fn new(objective_name: &str, seed: u64, budget: u64) -> Result<Demo, String> {
        let obj = objective(objective_name, seed)?;
        let cfg = preset(objective_name, seed, budget);
        let session = Session::new(obj, cfg).map_err(|e| e.to_string())?;
        let n = session.state().data.len();
        Ok(Demo { session, last: format!("initial design: {n} points") })
    }

    pub fn dim(&self) -> usize {
        self.session.objective().dim()
    }

    /// Runs one iteration; `false` once the budget is spent.
    pub fn step(&mut self) -> Result<bool, String> {
        match self.session.step().map_err(|e| e.to_string())? {
            Some(it) => {
                self.last = format!("iteration {}: {}", self.session.state().iteration, describe(&it));
                Ok(!self.session.is_done())
            }
            None => Ok(false),
        }
    }

    #[wasm_bindgen(js_name = isDone)]
    pub fn is_done(&self) -> bool {
        self.session.is_done()
    }

    #[wasm_bindgen(js_name = lastStep)]
    pub fn last_step(&self) -> String {
        self.last.clone()
    }

    pub fn consumed(&self) -> u64 {
        self.session.state().budget.consumed()
    }

    pub fn total(&self) -> u64 {
        self.session.state().budget.total()
    }

    pub fn iteration(&self) -> usize {
        self.session.state().iteration
    }

    /// `[lower.., upper..]`.
    pub fn bounds(&self) -> Vec<f64> {
        let b = self.session.objective().bounds();
        b.lower().iter().chain(b.upper()).copied().collect()
    }

    /// Incumbent `[x.., sample mean, true mean]`.
    pub fn best(&self) -> Vec<f64> {
        let obj = self.session.objective();
        let (_, x, mean) = self.session.state().best();
        let mut out = x.to_vec();
        out.push(obj.report_value(mean));
        out.push(obj.report_value(obj.mean(x)));
        out
    }

    /// Known optimum `[x.., value]`, empty when none is recorded.
    pub fn optimum(&self) -> Vec<f64> {
        let obj = self.session.objective();
        obj.true_opt()
            .map(|o| o.x.iter().copied().chain([obj.report_value(o.value)]).collect())
            .unwrap_or_default()
    }

    /// Design points as rows `[x.., sample mean, reps, region]`.
    pub fn design(&self) -> Vec<f64> {
        let obj = self.session.objective();
        self.session
            .state()
            .data
            .points()
            .iter()
            .flat_map(|p| {
                p.x.iter()
                    .copied()
                    .chain([obj.report_value(p.sample_mean()), p.reps() as f64, p.region as f64])
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Region centers, `dim` values per region.
    pub fn centers(&self) -> Vec<f64> {
        self.session.state().partition.centers().concat()
    }

    /// One-dimensional profile on `n` grid points, rows
    /// `[x, true mean, global mean, global sd, overall mean, overall sd]`.
    pub fn curve(&self, n: usize) -> Result<Vec<f64>, String> {
        if self.dim() != 1 || n < 2 {
            return Err(format!("curve needs a 1-d objective and n >= 2 (dim {}, n {n})", self.dim()));
        }
        let obj = self.session.objective();
        let model = &self.session.state().model;
        let (lo, hi) = (obj.bounds().lower()[0], obj.bounds().upper()[0]);
        let mut out = Vec::with_capacity(6 * n);
        for i in 0..n {
            let x = [lo + (hi - lo) * i as f64 / (n - 1) as f64];
            let g = model.predict_global(&x);
            let o = model.predict_overall(&x);
            out.extend([
                x[0],
                obj.report_value(obj.mean(&x)),
                obj.report_value(g.mean),
                g.sd(),
                obj.report_value(o.mean),
                o.sd(),
            ]);
        }
        Ok(out)
    }

    /// Overall-model mean (or the true mean) on an `n` x `n` grid, row-major
    /// with the second coordinate varying slowest.
    pub fn surface(&self, n: usize, truth: bool) -> Result<Vec<f64>, String> {
        if self.dim() != 2 || n < 2 {
            return Err(format!("surface needs a 2-d objective and n >= 2 (dim {}, n {n})", self.dim()));
        }
        let obj = self.session.objective();
        let model = &self.session.state().model;
        let b = obj.bounds();
        let at = |axis: usize, i: usize| b.lower()[axis] + b.width(axis) * i as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let x = [at(0, i), at(1, j)];
                let v = if truth { obj.mean(&x) } else { model.predict_overall(&x).mean };
                out.push(obj.report_value(v));
            }
        }
        Ok(out)
    }
}

/// Random search on the same budget: `[x.., sample mean, true mean]`.
#[wasm_bindgen(js_name = randomSearch)]
pub fn random_search(objective_name: &str, seed: u64, budget: u64) -> Result<Vec<f64>, String> {
    let obj = objective(objective_name, seed)?;
    let cfg = RandomSearchConfig::for_budget(budget, 25, seed);
    let r = rs(&obj, &cfg).map_err(|e| e.to_string())?;
    let mut out = r.best_x.clone();
    out.push(obj.report_value(r.best_mean));
    out.push(obj.report_value(obj.mean(&r.best_x)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_session_steps_and_draws() {
        let mut d = Demo::new("paper1d", 1, 600).unwrap();
        assert_eq!(d.dim(), 1);
        let n0 = d.design().len() / 4;
        assert_eq!(n0, 12);
        assert_eq!(d.consumed(), 240);
        while d.step().unwrap() {}
        assert!(d.is_done());
        assert!(d.consumed() <= 600);
        assert!(d.last_step().starts_with("iteration "));
        let c = d.curve(50).unwrap();
        assert_eq!(c.len(), 300);
        assert!(c.iter().all(|v| v.is_finite()));
        assert_eq!(d.best().len(), 3);
        assert_eq!(d.centers().len(), 3);
        assert!(d.surface(10, false).is_err());
    }

    #[test]
    fn two_dimensional_surface_has_grid_shape() {
        let d = Demo::new("sun2d", 2, 1000).unwrap();
        assert_eq!(d.bounds().len(), 4);
        let s = d.surface(8, false).unwrap();
        assert_eq!(s.len(), 64);
        assert!(s.iter().all(|v| v.is_finite()));
        assert!(d.curve(8).is_err());
        assert_eq!(d.optimum().len(), 3);
    }

    #[test]
    fn unknown_objective_is_reported() {
        assert!(Demo::new("branin", 0, 1000).is_err());
        assert!(random_search("branin", 0, 1000).is_err());
    }

    #[test]
    fn random_search_matches_the_budget_rule() {
        let r = random_search("paper1d", 4, 500).unwrap();
        assert_eq!(r.len(), 3);
        assert!((0.0..=1.0).contains(&r[0]));
    }
}
