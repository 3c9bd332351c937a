//! Per-school objective weights from survey first choices, reweighted by race.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, LoadError};
use crate::instance::SchoolId;
use crate::objectives::{Objective, SchoolWeights};

/// The survey factors that become weights, in column order.
pub const FACTORS: [Objective; 3] = [Objective::Distance, Objective::Balance, Objective::Feeder];

/// Race shares; keys are race labels.
pub type RaceShares = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyResponse {
    pub respondent_id: String,
    /// `None` when unspecified.
    pub race: Option<String>,
    pub affiliations: Vec<SchoolId>,
    /// Ranks of distance, balance and feeder; 1 is highest.
    pub ranks: [u32; 3],
}

impl SurveyResponse {
    /// First-place mass over [`FACTORS`]; ties at the top split it equally.
    pub fn first_choice(&self) -> [f64; 3] {
        let top = *self.ranks.iter().min().expect("three ranks");
        let k = self.ranks.iter().filter(|&&r| r == top).count() as f64;
        self.ranks.map(|r| if r == top { 1.0 / k } else { 0.0 })
    }

    pub fn is_tied(&self) -> bool {
        self.first_choice().iter().all(|&m| m < 1.0)
    }

    /// Influence per affiliated school, capped so that total influence
    /// never exceeds that of a three-school respondent.
    pub fn multiplier(&self) -> f64 {
        (3.0 / self.affiliations.len() as f64).min(1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchoolDemographics {
    pub shares: BTreeMap<SchoolId, RaceShares>,
}

impl SchoolDemographics {
    pub fn validate(&self) -> Result<(), String> {
        for (s, shares) in &self.shares {
            if shares.values().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("school {s}: race shares must lie in [0, 1]"));
            }
            let sum: f64 = shares.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("school {s}: race shares sum to {sum}, expected 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WeightsError {
    #[error("respondent {respondent}: school {school} has no demographics")]
    UnknownSchool { respondent: String, school: SchoolId },
    #[error("respondent {0}: no affiliated schools")]
    NoAffiliations(String),
}

/// Race-share vector for a respondent: one-hot when declared, otherwise the
/// mean of the affiliated schools' vectors.
pub fn impute_race(response: &SurveyResponse, demographics: &SchoolDemographics) -> Result<RaceShares, WeightsError> {
    if response.affiliations.is_empty() {
        return Err(WeightsError::NoAffiliations(response.respondent_id.clone()));
    }
    let mut rows = Vec::with_capacity(response.affiliations.len());
    for &s in &response.affiliations {
        rows.push(demographics.shares.get(&s).ok_or_else(|| WeightsError::UnknownSchool {
            respondent: response.respondent_id.clone(),
            school: s,
        })?);
    }
    if let Some(race) = &response.race {
        return Ok(RaceShares::from([(race.clone(), 1.0)]));
    }
    let k = rows.len() as f64;
    let mut out = RaceShares::new();
    for row in rows {
        for (race, v) in row {
            *out.entry(race.clone()).or_insert(0.0) += v / k;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchoolWeightRow {
    pub school: SchoolId,
    /// Distance, balance, feeder.
    pub w: [f64; 3],
    pub respondents: usize,
    /// Races present at the school but absent among its respondents.
    pub missing_races: Vec<String>,
    pub tied_respondents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedWeights {
    pub rows: Vec<SchoolWeightRow>,
}

impl DerivedWeights {
    pub fn get(&self, school: SchoolId) -> Option<[f64; 3]> {
        self.rows.iter().find(|r| r.school == school).map(|r| r.w)
    }

    /// As objective weights; compactness and capacity keep weight 1.
    pub fn to_school_weights(&self) -> SchoolWeights {
        let mut sw = SchoolWeights::uniform();
        for r in &self.rows {
            for (obj, w) in FACTORS.into_iter().zip(r.w) {
                sw.set(r.school, obj, w);
            }
        }
        sw
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), Error> {
        let ctx = || path.display().to_string();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(ctx(), std::io::Error::other(e)))?;
        let wrap = |e: csv::Error| Error::io(ctx(), std::io::Error::other(e));
        w.write_record(["school_id", "w_distance", "w_balance", "w_feeder"]).map_err(wrap)?;
        for r in &self.rows {
            w.write_record([r.school.to_string(), r.w[0].to_string(), r.w[1].to_string(), r.w[2].to_string()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(ctx(), e))
    }
}

/// Weights for every school in `demographics` plus any affiliated school.
/// Schools without respondents get `(1/3, 1/3, 1/3)`.
pub fn derive_weights(responses: &[SurveyResponse], demographics: &SchoolDemographics) -> Result<DerivedWeights, WeightsError> {
    let imputed: Vec<RaceShares> = responses
        .iter()
        .map(|r| impute_race(r, demographics))
        .collect::<Result<_, _>>()?;
    let mut by_school: BTreeMap<SchoolId, Vec<usize>> =
        demographics.shares.keys().map(|&s| (s, Vec::new())).collect();
    for (i, r) in responses.iter().enumerate() {
        let distinct: BTreeSet<SchoolId> = r.affiliations.iter().copied().collect();
        for s in distinct {
            by_school.entry(s).or_default().push(i);
        }
    }

    let mut rows = Vec::with_capacity(by_school.len());
    for (school, members) in by_school {
        if members.is_empty() {
            rows.push(SchoolWeightRow {
                school,
                w: [1.0 / 3.0; 3],
                respondents: 0,
                missing_races: Vec::new(),
                tied_respondents: 0,
            });
            continue;
        }
        let district = &demographics.shares[&school];
        let mass: f64 = members.iter().map(|&i| responses[i].multiplier()).sum();
        let mut sigma = RaceShares::new();
        for &i in &members {
            let m = responses[i].multiplier();
            for (race, x) in &imputed[i] {
                *sigma.entry(race.clone()).or_insert(0.0) += x * m / mass;
            }
        }
        let present = |r: &str| sigma.get(r).is_some_and(|&s| s > 0.0);
        let missing_races: Vec<String> = district
            .iter()
            .filter(|(r, &d)| d > 0.0 && !present(r))
            .map(|(r, _)| r.clone())
            .collect();
        let kept: f64 = district.iter().filter(|(r, _)| present(r)).map(|(_, d)| d).sum();

        let mut acc = [0.0; 3];
        let mut norm = 0.0;
        for &i in &members {
            let factor: f64 = if kept > 0.0 {
                imputed[i]
                    .iter()
                    .filter(|(r, _)| present(r))
                    .map(|(r, x)| x * district.get(r).copied().unwrap_or(0.0) / kept / sigma[r])
                    .sum()
            } else {
                1.0
            };
            let m = responses[i].multiplier() * factor;
            for (a, c) in acc.iter_mut().zip(responses[i].first_choice()) {
                *a += m * c;
            }
            norm += m;
        }
        let w = if norm > 0.0 { acc.map(|a| a / norm) } else { [1.0 / 3.0; 3] };
        rows.push(SchoolWeightRow {
            school,
            w,
            respondents: members.len(),
            missing_races,
            tied_respondents: members.iter().filter(|&&i| responses[i].is_tied()).count(),
        });
    }
    Ok(DerivedWeights { rows })
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, Vec<String>), LoadError> {
    let file = path.display().to_string();
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => LoadError::Io { file: file.clone(), source },
            other => LoadError::Format {
                file: file.clone(),
                message: format!("{other:?}"),
            },
        })?;
    let headers = r
        .headers()
        .map_err(|e| LoadError::Format {
            file: file.clone(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    Ok((r, headers))
}

struct Cols<'a> {
    file: String,
    headers: &'a [String],
}

impl Cols<'_> {
    fn pos(&self, name: &str) -> Result<usize, LoadError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| LoadError::Format {
            file: self.file.clone(),
            message: format!("missing column `{name}`"),
        })
    }

    fn err(&self, row: usize, field: &str, message: String) -> LoadError {
        LoadError::Field {
            file: self.file.clone(),
            row,
            field: field.into(),
            message,
        }
    }
}

/// Reads `survey.csv`: respondent_id, race, affiliations (`;`-separated
/// school ids), rank_distance, rank_balance, rank_feeder.
pub fn read_survey(path: &Path) -> Result<Vec<SurveyResponse>, LoadError> {
    let (mut r, headers) = open(path)?;
    let c = Cols {
        file: path.display().to_string(),
        headers: &headers,
    };
    let id = c.pos("respondent_id")?;
    let race = c.pos("race")?;
    let aff = c.pos("affiliations")?;
    let ranks = [c.pos("rank_distance")?, c.pos("rank_balance")?, c.pos("rank_feeder")?];
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| LoadError::Format {
            file: c.file.clone(),
            message: e.to_string(),
        })?;
        let race_v = rec[race].trim();
        let affiliations = rec[aff]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map(SchoolId).map_err(|_| c.err(row, "affiliations", format!("bad school id `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if affiliations.is_empty() {
            return Err(c.err(row, "affiliations", "no affiliated schools".into()));
        }
        let mut rk = [0u32; 3];
        for (k, (&col, name)) in ranks.iter().zip(["rank_distance", "rank_balance", "rank_feeder"]).enumerate() {
            rk[k] = rec[col]
                .parse()
                .ok()
                .filter(|&v: &u32| v >= 1)
                .ok_or_else(|| c.err(row, name, format!("expected a rank >= 1, got `{}`", &rec[col])))?;
        }
        out.push(SurveyResponse {
            respondent_id: rec[id].to_string(),
            race: (!race_v.is_empty() && !race_v.eq_ignore_ascii_case("unspecified")).then(|| race_v.to_string()),
            affiliations,
            ranks: rk,
        });
    }
    Ok(out)
}

/// Reads `demographics.csv`: school_id, race, share.
pub fn read_demographics(path: &Path) -> Result<SchoolDemographics, LoadError> {
    let (mut r, headers) = open(path)?;
    let c = Cols {
        file: path.display().to_string(),
        headers: &headers,
    };
    let (cs, cr, cv) = (c.pos("school_id")?, c.pos("race")?, c.pos("share")?);
    let mut d = SchoolDemographics::default();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| LoadError::Format {
            file: c.file.clone(),
            message: e.to_string(),
        })?;
        let s = rec[cs]
            .parse()
            .map(SchoolId)
            .map_err(|_| c.err(row, "school_id", format!("bad school id `{}`", &rec[cs])))?;
        let v: f64 = rec[cv]
            .parse()
            .ok()
            .filter(|v: &f64| (0.0..=1.0).contains(v))
            .ok_or_else(|| c.err(row, "share", format!("expected a share in [0, 1], got `{}`", &rec[cv])))?;
        if d.shares.entry(s).or_default().insert(rec[cr].to_string(), v).is_some() {
            return Err(c.err(row, "race", format!("duplicate race `{}` for school {s}", &rec[cr])));
        }
    }
    d.validate().map_err(LoadError::Consistency)?;
    Ok(d)
}

/// Reads `weights.csv` as written by [`DerivedWeights::write_csv`].
pub fn read_weights(path: &Path) -> Result<SchoolWeights, LoadError> {
    let (mut r, headers) = open(path)?;
    let c = Cols {
        file: path.display().to_string(),
        headers: &headers,
    };
    let cs = c.pos("school_id")?;
    let cols = [c.pos("w_distance")?, c.pos("w_balance")?, c.pos("w_feeder")?];
    let mut sw = SchoolWeights::uniform();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| LoadError::Format {
            file: c.file.clone(),
            message: e.to_string(),
        })?;
        let s = rec[cs]
            .parse()
            .map(SchoolId)
            .map_err(|_| c.err(row, "school_id", format!("bad school id `{}`", &rec[cs])))?;
        for (obj, &col) in FACTORS.iter().zip(&cols) {
            let v: f64 = rec[col]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| c.err(row, &headers[col], format!("expected a nonnegative weight, got `{}`", &rec[col])))?;
            sw.set(s, *obj, v);
        }
    }
    Ok(sw)
}
