//! Paired-score model: every game's score sum and difference are
//! independent normals whose means come from team strength ratios, a scale
//! constant, and a home advantage. All positive quantities are carried as
//! logarithms, so the parameter vector is unconstrained.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovError, Result};
use crate::objective::ObjectiveFunction;
use crate::sampler::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    pub team1: usize,
    pub team2: usize,
    pub score1: f64,
    pub score2: f64,
    /// Whether team1 had home advantage in this game.
    pub home: bool,
}

/// Parameter layout: log-strengths for teams 1..n_teams (team 0 is fixed
/// at strength 1), then log k, log delta, log sigma_s, log sigma_d.
#[derive(Debug, Clone)]
pub struct BasketballModel {
    games: Vec<Game>,
    n_teams: usize,
}

impl BasketballModel {
    pub fn new(games: Vec<Game>, n_teams: usize) -> Result<Self> {
        if n_teams < 2 {
            return Err(CovError::InvalidOptions(format!(
                "need at least 2 teams, got {n_teams}"
            )));
        }
        for g in &games {
            if g.team1 >= n_teams || g.team2 >= n_teams || g.team1 == g.team2 {
                return Err(CovError::InvalidOptions(format!(
                    "game pairs team {} with team {} but there are {n_teams} teams",
                    g.team1, g.team2
                )));
            }
        }
        Ok(BasketballModel { games, n_teams })
    }

    pub fn n_teams(&self) -> usize {
        self.n_teams
    }

    pub fn games(&self) -> &[Game] {
        &self.games
    }

    fn idx_k(&self) -> usize {
        self.n_teams - 1
    }

    fn strength(&self, theta: &DVector<f64>, team: usize) -> f64 {
        if team == 0 {
            0.0
        } else {
            theta[team - 1]
        }
    }

    /// Mean scores (t1, t2) for one game at the given parameters.
    pub fn game_means(&self, theta: &DVector<f64>, game: &Game) -> (f64, f64) {
        let k = self.idx_k();
        let si = self.strength(theta, game.team1);
        let sj = self.strength(theta, game.team2);
        let u = if game.home { theta[k + 1] } else { 0.0 } - theta[k] + si - sj;
        let v = -theta[k] + sj - si;
        (u.exp(), v.exp())
    }

    /// Exact second derivatives of the negative log-likelihood.
    pub fn analytic_hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let k = self.idx_k();
        let (idx_delta, idx_s, idx_d) = (k + 1, k + 2, k + 3);
        let es = (-2.0 * theta[idx_s]).exp();
        let ed = (-2.0 * theta[idx_d]).exp();
        let mut h = DMatrix::zeros(n, n);
        // Supports of the two log-mean gradients; at most 4 entries each.
        let mut su: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut sv: Vec<(usize, f64)> = Vec::with_capacity(3);
        for game in &self.games {
            let (t1, t2) = self.game_means(theta, game);
            let rd = (game.score1 - game.score2) - (t1 - t2);
            let rs = (game.score1 + game.score2) - (t1 + t2);
            su.clear();
            sv.clear();
            if game.team1 > 0 {
                su.push((game.team1 - 1, 1.0));
                sv.push((game.team1 - 1, -1.0));
            }
            if game.team2 > 0 {
                su.push((game.team2 - 1, -1.0));
                sv.push((game.team2 - 1, 1.0));
            }
            su.push((k, -1.0));
            sv.push((k, -1.0));
            if game.home {
                su.push((idx_delta, 1.0));
            }
            // Rank-one blocks over the mean parameters.
            let cuu = ed * (t1 * t1 - rd * t1) + es * (t1 * t1 - rs * t1);
            let cvv = ed * (t2 * t2 + rd * t2) + es * (t2 * t2 - rs * t2);
            let cuv = (es - ed) * t1 * t2;
            for &(p, cp) in &su {
                for &(q, cq) in &su {
                    h[(p, q)] += cuu * cp * cq;
                }
                for &(q, cq) in &sv {
                    h[(p, q)] += cuv * cp * cq;
                    h[(q, p)] += cuv * cp * cq;
                }
            }
            for &(p, cp) in &sv {
                for &(q, cq) in &sv {
                    h[(p, q)] += cvv * cp * cq;
                }
            }
            // Mean-scale cross terms and the scale diagonal.
            for &(p, cp) in &su {
                let cd = 2.0 * ed * rd * t1 * cp;
                let cs = 2.0 * es * rs * t1 * cp;
                h[(p, idx_d)] += cd;
                h[(idx_d, p)] += cd;
                h[(p, idx_s)] += cs;
                h[(idx_s, p)] += cs;
            }
            for &(p, cp) in &sv {
                let cd = -2.0 * ed * rd * t2 * cp;
                let cs = 2.0 * es * rs * t2 * cp;
                h[(p, idx_d)] += cd;
                h[(idx_d, p)] += cd;
                h[(p, idx_s)] += cs;
                h[(idx_s, p)] += cs;
            }
            h[(idx_d, idx_d)] += 2.0 * rd * rd * ed;
            h[(idx_s, idx_s)] += 2.0 * rs * rs * es;
        }
        h
    }

    /// Builds a seeded league: a connectivity ring so every team is linked,
    /// then random pairings, with scores drawn from the model itself.
    /// Returns the model and the generating parameter vector.
    pub fn synthesize(
        n_teams: usize,
        n_games: usize,
        rng: &mut RngStream,
    ) -> (BasketballModel, DVector<f64>) {
        let dim = n_teams + 3;
        let mut truth = DVector::zeros(dim);
        for t in 1..n_teams {
            truth[t - 1] = 0.12 * rng.normal();
        }
        truth[n_teams - 1] = -(100.0_f64).ln(); // log k: mean scores near 100
        truth[n_teams] = 1.06_f64.ln(); // log delta: 6% home advantage
        truth[n_teams + 1] = 16.0_f64.ln(); // log sigma_s
        truth[n_teams + 2] = 11.0_f64.ln(); // log sigma_d
        let sigma_s = 16.0;
        let sigma_d = 11.0;

        let skeleton = BasketballModel {
            games: Vec::new(),
            n_teams,
        };
        let mut games = Vec::with_capacity(n_games);
        for g in 0..n_games {
            let (team1, team2) = if g < n_teams {
                (g, (g + 1) % n_teams)
            } else {
                let i = (rng.uniform() * n_teams as f64) as usize;
                let mut j = (rng.uniform() * (n_teams - 1) as f64) as usize;
                if j >= i {
                    j += 1;
                }
                (i.min(n_teams - 1), j.min(n_teams - 1))
            };
            let home = rng.uniform() < 0.5;
            let mut game = Game {
                team1,
                team2,
                score1: 0.0,
                score2: 0.0,
                home,
            };
            let (t1, t2) = skeleton.game_means(&truth, &game);
            let sum = t1 + t2 + sigma_s * rng.normal();
            let diff = t1 - t2 + sigma_d * rng.normal();
            game.score1 = 0.5 * (sum + diff);
            game.score2 = 0.5 * (sum - diff);
            games.push(game);
        }
        (BasketballModel { games, n_teams }, truth)
    }

    /// Data-informed starting point: strengths from score-for/score-against
    /// ratios, the scale from the average score, spreads from the sample
    /// deviations of sums and differences.
    pub fn default_start(&self) -> DVector<f64> {
        let n = self.n_teams;
        let mut scored = vec![0.0f64; n];
        let mut conceded = vec![0.0f64; n];
        let mut played = vec![0usize; n];
        let (mut sum_acc, mut sum_sq) = (0.0f64, 0.0f64);
        let (mut diff_acc, mut diff_sq) = (0.0f64, 0.0f64);
        for g in &self.games {
            scored[g.team1] += g.score1;
            conceded[g.team1] += g.score2;
            scored[g.team2] += g.score2;
            conceded[g.team2] += g.score1;
            played[g.team1] += 1;
            played[g.team2] += 1;
            let s = g.score1 + g.score2;
            let d = g.score1 - g.score2;
            sum_acc += s;
            sum_sq += s * s;
            diff_acc += d;
            diff_sq += d * d;
        }
        let n_games = self.games.len().max(1) as f64;
        let mean_score = (sum_acc / n_games / 2.0).max(1.0);
        let ratio = |team: usize| {
            if played[team] == 0 || conceded[team] <= 0.0 || scored[team] <= 0.0 {
                0.0
            } else {
                0.5 * (scored[team] / conceded[team]).ln()
            }
        };
        let base = ratio(0);
        let mut start = DVector::zeros(self.dim());
        for t in 1..n {
            start[t - 1] = ratio(t) - base;
        }
        start[n - 1] = -mean_score.ln();
        start[n] = 0.0;
        let var_sum = (sum_sq / n_games - (sum_acc / n_games).powi(2)).max(1.0);
        let var_diff = (diff_sq / n_games - (diff_acc / n_games).powi(2)).max(1.0);
        start[n + 1] = 0.5 * var_sum.ln();
        start[n + 2] = 0.5 * var_diff.ln();
        start
    }
}

impl ObjectiveFunction for BasketballModel {
    fn dim(&self) -> usize {
        self.n_teams + 3
    }

    fn eval(&self, theta: &DVector<f64>) -> f64 {
        let k = self.idx_k();
        let (lam_s, lam_d) = (theta[k + 2], theta[k + 3]);
        let es = (-2.0 * lam_s).exp();
        let ed = (-2.0 * lam_d).exp();
        let ln_pi = std::f64::consts::PI.ln();
        let mut nll = 0.0;
        for game in &self.games {
            let (t1, t2) = self.game_means(theta, game);
            let rd = (game.score1 - game.score2) - (t1 - t2);
            let rs = (game.score1 + game.score2) - (t1 + t2);
            nll += ln_pi + lam_s + lam_d + 0.5 * rd * rd * ed + 0.5 * rs * rs * es;
        }
        nll
    }
}
