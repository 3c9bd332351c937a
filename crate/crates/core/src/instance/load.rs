use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::geometry::read_geojson;
use super::{
    AdjacencyGraph, ConstraintConfig, Edge, Instance, InstanceData, Level, LevelSet,
    PlanningUnit, School, SchoolId, Student, StudentId, UnitId,
};
use crate::error::LoadError;

/// Locations of the district files. [`InstancePaths::in_dir`] fills in the
/// conventional names.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePaths {
    pub schools: PathBuf,
    pub units: PathBuf,
    pub students: PathBuf,
    pub distances: PathBuf,
    pub adjacency: PathBuf,
    /// Unit-level distance rows inherited by students that have none of
    /// their own (synthetic data).
    pub unit_distances: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
    /// Derive capacity bounds from a `serviceable` column in schools.csv.
    pub capacity_from_serviceable: bool,
}

impl InstancePaths {
    /// Standard layout; optional files are picked up only if present.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Self {
            schools: dir.join("schools.csv"),
            units: dir.join("units.csv"),
            students: dir.join("students.csv"),
            distances: dir.join("distances.csv"),
            adjacency: dir.join("adjacency.csv"),
            unit_distances: opt("unit_distances.csv"),
            geometry: opt("units.geojson"),
            capacity_from_serviceable: false,
        }
    }
}

/// A CSV file read into memory with header lookup and located errors.
struct Table {
    file: String,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

struct Row<'a> {
    table: &'a Table,
    /// 1-based line number, counting the header.
    line: usize,
    rec: &'a csv::StringRecord,
}

impl Table {
    fn read(path: &Path) -> Result<Self, LoadError> {
        let file = path.display().to_string();
        let handle = std::fs::File::open(path).map_err(|source| LoadError::Io {
            file: file.clone(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(handle);
        let headers = rdr
            .headers()
            .map_err(|e| LoadError::Format {
                file: file.clone(),
                message: e.to_string(),
            })?
            .clone();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec.map_err(|e| LoadError::Format {
                file: file.clone(),
                message: e.to_string(),
            })?);
        }
        Ok(Self {
            file,
            columns,
            rows,
        })
    }

    fn require(&self, cols: &[&str]) -> Result<(), LoadError> {
        for c in cols {
            if !self.columns.contains_key(*c) {
                return Err(LoadError::Format {
                    file: self.file.clone(),
                    message: format!("missing column `{c}`"),
                });
            }
        }
        Ok(())
    }

    fn has(&self, col: &str) -> bool {
        self.columns.contains_key(col)
    }

    fn iter(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().enumerate().map(move |(i, rec)| Row {
            table: self,
            line: i + 2,
            rec,
        })
    }
}

impl Row<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> LoadError {
        LoadError::Field {
            file: self.table.file.clone(),
            row: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, field: &str) -> &str {
        self.table
            .columns
            .get(field)
            .and_then(|&i| self.rec.get(i))
            .unwrap_or("")
    }

    fn opt<T: FromStr>(&self, field: &str) -> Result<Option<T>, LoadError> {
        let s = self.raw(field);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| self.err(field, format!("cannot parse `{s}`")))
    }

    fn get<T: FromStr>(&self, field: &str) -> Result<T, LoadError> {
        self.opt(field)?
            .ok_or_else(|| self.err(field, "missing value"))
    }

    fn count(&self, field: &str) -> Result<u64, LoadError> {
        let s = self.raw(field);
        if s.starts_with('-') {
            return Err(self.err(field, format!("negative count {s}")));
        }
        self.get(field)
    }

    fn miles(&self, field: &str) -> Result<f64, LoadError> {
        let d: f64 = self.get(field)?;
        if !d.is_finite() || d < 0.0 {
            return Err(self.err(field, format!("distance must be finite and nonnegative, got {d}")));
        }
        Ok(d)
    }

    fn flag(&self, field: &str) -> Result<bool, LoadError> {
        match self.raw(field).to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => Ok(true),
            "0" | "false" | "no" => Ok(false),
            other => Err(self.err(field, format!("expected a boolean, got `{other}`"))),
        }
    }
}

/// Reads and cross-checks the district files, then builds the instance
/// under `config` (which fixes the candidate sets).
pub fn load_instance(paths: &InstancePaths, config: &ConstraintConfig) -> Result<Instance, LoadError> {
    let data = read_instance_data(paths)?;
    Instance::build(data, config)
}

pub(crate) fn read_instance_data(paths: &InstancePaths) -> Result<InstanceData, LoadError> {
    let schools_t = Table::read(&paths.schools)?;
    schools_t.require(&["school_id", "level"])?;
    let units_t = Table::read(&paths.units)?;
    units_t.require(&["unit_id", "level", "sq_school", "n_students", "n_group"])?;
    let students_t = Table::read(&paths.students)?;
    students_t.require(&["student_id", "level", "sq_school", "in_group"])?;
    let dist_t = Table::read(&paths.distances)?;
    dist_t.require(&["student_id", "school_id", "miles"])?;
    let adj_t = Table::read(&paths.adjacency)?;
    adj_t.require(&["level", "unit_a", "unit_b"])?;

    // schools
    let mut schools = Vec::new();
    let mut serviceable = Vec::new();
    let mut school_level: HashMap<SchoolId, Level> = HashMap::new();
    for row in schools_t.iter() {
        let id = SchoolId(row.get("school_id")?);
        let level: Level = row.get("level")?;
        if level == 0 {
            return Err(row.err("level", "levels are positive integers"));
        }
        if school_level.insert(id, level).is_some() {
            return Err(row.err("school_id", format!("duplicate school id {id}")));
        }
        let (cap_min, cap_max, cap_desired) = if paths.capacity_from_serviceable {
            if !schools_t.has("serviceable") {
                return Err(row.err("serviceable", "column required to derive capacities"));
            }
            serviceable.push(row.count("serviceable")?);
            (0, 0, 0)
        } else {
            (row.count("cap_min")?, row.count("cap_max")?, row.count("cap_desired")?)
        };
        schools.push((
            row.line,
            School {
                id,
                level,
                cap_min,
                cap_max,
                cap_desired,
                sq_enrolled: 0,
                sq_group: 0,
                site_unit: row.opt::<u32>("site_unit")?.map(UnitId),
            },
        ));
    }
    let levels = LevelSet::new(school_level.values().copied().collect::<BTreeSet<_>>().into_iter().collect())
        .ok_or_else(|| LoadError::Format {
            file: schools_t.file.clone(),
            message: "no schools".into(),
        })?;

    // units
    let mut units = Vec::new();
    let mut unit_level: HashMap<UnitId, Level> = HashMap::new();
    for row in units_t.iter() {
        let id = UnitId(row.get("unit_id")?);
        let level: Level = row.get("level")?;
        if unit_level.insert(id, level).is_some() {
            return Err(row.err("unit_id", format!("duplicate unit id {id}")));
        }
        let sq = SchoolId(row.get("sq_school")?);
        match school_level.get(&sq) {
            None => return Err(row.err("sq_school", format!("unknown school id {sq}"))),
            Some(&l) if l != level => {
                return Err(row.err("sq_school", format!("school {sq} is at level {l}, unit at {level}")))
            }
            _ => {}
        }
        let n_students = row.count("n_students")?;
        let n_group = row.count("n_group")?;
        if n_group > n_students {
            return Err(row.err("n_group", "exceeds n_students"));
        }
        let centroid = match (row.opt::<f64>("x")?, row.opt::<f64>("y")?) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        };
        units.push(PlanningUnit {
            id,
            level,
            n_students,
            n_group,
            sq_school: sq,
            centroid,
        });
    }
    for (line, s) in &schools {
        if let Some(site) = s.site_unit {
            if !unit_level.contains_key(&site) {
                return Err(LoadError::Field {
                    file: schools_t.file.clone(),
                    row: *line,
                    field: "site_unit".into(),
                    message: format!("unknown unit id {site}"),
                });
            }
        }
    }
    let mut schools: Vec<School> = schools.into_iter().map(|(_, s)| s).collect();
    if paths.capacity_from_serviceable {
        derive_capacities(&mut schools, &serviceable, &units);
    }

    // students
    let mut students = Vec::new();
    let mut student_pos: HashMap<StudentId, usize> = HashMap::new();
    for row in students_t.iter() {
        let id = StudentId(row.get("student_id")?);
        let level: Level = row.get("level")?;
        if levels.position(level).is_none() {
            return Err(row.err("level", format!("level {level} has no schools")));
        }
        let sq = SchoolId(row.get("sq_school")?);
        if !school_level.contains_key(&sq) {
            return Err(row.err("sq_school", format!("unknown school id {sq}")));
        }
        let mut residence = BTreeMap::new();
        for &l in levels.levels() {
            let col = format!("unit_l{l}");
            let Some(u) = row.opt::<u32>(&col)? else {
                if l == level {
                    return Err(row.err(&col, "no residence unit at the student's own level"));
                }
                continue;
            };
            let u = UnitId(u);
            match unit_level.get(&u) {
                None => return Err(row.err(&col, format!("unknown unit id {u}"))),
                Some(&ul) if ul != l => {
                    return Err(row.err(&col, format!("unit {u} is at level {ul}")))
                }
                _ => {}
            }
            if l >= level {
                residence.insert(l, u);
            }
        }
        if student_pos.insert(id, students.len()).is_some() {
            return Err(row.err("student_id", format!("duplicate student id {id}")));
        }
        students.push(Student {
            id,
            level,
            residence_units: residence,
            sq_school: sq,
            in_group: row.flag("in_group")?,
            distances: BTreeMap::new(),
        });
    }

    // distances
    for row in dist_t.iter() {
        let sid = StudentId(row.get("student_id")?);
        let &pos = student_pos
            .get(&sid)
            .ok_or_else(|| row.err("student_id", format!("unknown student id {sid}")))?;
        let school = SchoolId(row.get("school_id")?);
        if !school_level.contains_key(&school) {
            return Err(row.err("school_id", format!("unknown school id {school}")));
        }
        students[pos].distances.insert(school, row.miles("miles")?);
    }
    if let Some(path) = &paths.unit_distances {
        let t = Table::read(path)?;
        t.require(&["unit_id", "school_id", "miles"])?;
        let mut by_unit: HashMap<UnitId, BTreeMap<SchoolId, f64>> = HashMap::new();
        for row in t.iter() {
            let u = UnitId(row.get("unit_id")?);
            if !unit_level.contains_key(&u) {
                return Err(row.err("unit_id", format!("unknown unit id {u}")));
            }
            let school = SchoolId(row.get("school_id")?);
            if !school_level.contains_key(&school) {
                return Err(row.err("school_id", format!("unknown school id {school}")));
            }
            by_unit.entry(u).or_default().insert(school, row.miles("miles")?);
        }
        for st in students.iter_mut().filter(|s| s.distances.is_empty()) {
            let home = st.residence_units[&st.level];
            if let Some(d) = by_unit.get(&home) {
                st.distances = d.clone();
            }
        }
    }

    // adjacency
    let mut adjacency = AdjacencyGraph::default();
    for row in adj_t.iter() {
        let level: Level = row.get("level")?;
        let a = UnitId(row.get("unit_a")?);
        let b = UnitId(row.get("unit_b")?);
        for (u, field) in [(a, "unit_a"), (b, "unit_b")] {
            match unit_level.get(&u) {
                None => return Err(row.err(field, format!("unknown unit id {u}"))),
                Some(&ul) if ul != level => {
                    return Err(row.err(field, format!("unit {u} is at level {ul}")))
                }
                _ => {}
            }
        }
        if a == b {
            return Err(row.err("unit_b", "self-loop"));
        }
        let len = row.opt::<f64>("shared_boundary_len")?;
        if len.is_some_and(|l| !(l >= 0.0)) {
            return Err(row.err("shared_boundary_len", "must be nonnegative"));
        }
        adjacency.levels.entry(level).or_default().push(Edge::new(a, b, len));
    }

    let geometry = match &paths.geometry {
        Some(p) => read_geojson(p)?,
        None => BTreeMap::new(),
    };

    Ok(InstanceData {
        levels,
        schools,
        units,
        students,
        adjacency,
        geometry,
    })
}

/// Capacity bounds from status-quo enrollment `e` and serviceable capacity
/// `c`: max = max(e, c), min = floor(0.85 min(e, c)), desired = c.
fn derive_capacities(schools: &mut [School], serviceable: &[u64], units: &[PlanningUnit]) {
    let mut enrolled: HashMap<SchoolId, u64> = HashMap::new();
    for u in units {
        *enrolled.entry(u.sq_school).or_insert(0) += u.n_students;
    }
    for (s, &c) in schools.iter_mut().zip(serviceable) {
        let e = enrolled.get(&s.id).copied().unwrap_or(0);
        s.cap_max = e.max(c);
        s.cap_min = (e.min(c) * 85) / 100;
        s.cap_desired = c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny1;
    use crate::instance::write_instance_files;

    fn tiny1_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write_instance_files(&tiny1(&ConstraintConfig::default()), dir.path()).unwrap();
        dir
    }

    #[test]
    fn tiny1_files_roundtrip() {
        let dir = tiny1_dir();
        let inst = load_instance(&InstancePaths::in_dir(dir.path()), &ConstraintConfig::default()).unwrap();
        assert_eq!(inst.units().len(), 4);
        assert_eq!(inst.schools().len(), 2);
        assert_eq!(inst.students().len(), 40);
        assert_eq!(inst.schools()[0].sq_enrolled, 20);
        assert_eq!(inst.schools()[0].sq_group, 10);
        assert_eq!(inst.level_group(1), 12);
    }

    #[test]
    fn unknown_school_names_file_and_id() {
        let dir = tiny1_dir();
        let p = dir.path().join("units.csv");
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[1] = "1,1,99,10,4".into();
        std::fs::write(&p, lines.join("\n") + "\n").unwrap();
        let err = load_instance(&InstancePaths::in_dir(dir.path()), &ConstraintConfig::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("units.csv"), "{err}");
        assert!(err.contains("99"), "{err}");
    }

    #[test]
    fn empty_students_is_a_count_mismatch() {
        let dir = tiny1_dir();
        let header = std::fs::read_to_string(dir.path().join("students.csv")).unwrap();
        let header = header.lines().next().unwrap().to_string();
        std::fs::write(dir.path().join("students.csv"), header + "\n").unwrap();
        std::fs::write(dir.path().join("distances.csv"), "student_id,school_id,miles\n").unwrap();
        let err = load_instance(&InstancePaths::in_dir(dir.path()), &ConstraintConfig::default())
            .unwrap_err();
        assert!(matches!(err, LoadError::Consistency(_)), "{err}");
    }

    #[test]
    fn missing_file_and_negative_distance() {
        let dir = tiny1_dir();
        let mut paths = InstancePaths::in_dir(dir.path());
        std::fs::write(
            dir.path().join("distances.csv"),
            "student_id,school_id,miles\n1,1,-2\n",
        )
        .unwrap();
        let err = load_instance(&paths, &ConstraintConfig::default()).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("miles"), "{err}");
        paths.schools = dir.path().join("nope.csv");
        assert!(matches!(
            load_instance(&paths, &ConstraintConfig::default()),
            Err(LoadError::Io { .. })
        ));
    }

    #[test]
    fn serviceable_capacity_rule() {
        let mut schools = vec![
            School {
                id: SchoolId(1),
                level: 1,
                cap_min: 0,
                cap_max: 0,
                cap_desired: 0,
                sq_enrolled: 0,
                sq_group: 0,
                site_unit: None,
            };
            2
        ];
        schools[1].id = SchoolId(2);
        let units = vec![
            PlanningUnit {
                id: UnitId(1),
                level: 1,
                n_students: 500,
                n_group: 0,
                sq_school: SchoolId(1),
                centroid: None,
            },
            PlanningUnit {
                id: UnitId(2),
                level: 1,
                n_students: 300,
                n_group: 0,
                sq_school: SchoolId(2),
                centroid: None,
            },
        ];
        derive_capacities(&mut schools, &[400, 400], &units);
        // over capacity: max is the enrollment, min is 0.85 of serviceable
        assert_eq!((schools[0].cap_min, schools[0].cap_max), (340, 500));
        assert_eq!((schools[1].cap_min, schools[1].cap_max), (255, 400));
    }
}
