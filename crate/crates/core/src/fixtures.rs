//! Small hand-checkable districts used by tests, examples and the Python
//! smoke test.

use std::collections::BTreeMap;

use crate::instance::{
    AdjacencyGraph, ConstraintConfig, Edge, Instance, InstanceData, Level, LevelSet,
    PlanningUnit, School, SchoolId, Student, StudentId, UnitId,
};

/// Incremental builder for toy instances. Unit student counts are derived
/// from the students added.
#[derive(Debug, Default)]
pub struct FixtureBuilder {
    data: InstanceData,
    next_student: u64,
}

impl FixtureBuilder {
    pub fn new(levels: Vec<Level>) -> Self {
        Self {
            data: InstanceData {
                levels: LevelSet::new(levels).expect("valid level list"),
                adjacency: AdjacencyGraph::default(),
                ..InstanceData::default()
            },
            next_student: 1,
        }
    }

    pub fn school(mut self, id: u32, level: Level, caps: (u64, u64, u64)) -> Self {
        self.data.schools.push(School {
            id: SchoolId(id),
            level,
            cap_min: caps.0,
            cap_max: caps.1,
            cap_desired: caps.2,
            sq_enrolled: 0,
            sq_group: 0,
            site_unit: None,
        });
        self
    }

    pub fn site(mut self, school: u32, unit: u32) -> Self {
        if let Some(s) = self.data.schools.iter_mut().find(|s| s.id.0 == school) {
            s.site_unit = Some(UnitId(unit));
        }
        self
    }

    pub fn unit(mut self, id: u32, level: Level, sq_school: u32) -> Self {
        self.data.units.push(PlanningUnit {
            id: UnitId(id),
            level,
            n_students: 0,
            n_group: 0,
            sq_school: SchoolId(sq_school),
            centroid: None,
        });
        self
    }

    pub fn edge(mut self, level: Level, a: u32, b: u32, len: Option<f64>) -> Self {
        self.data
            .adjacency
            .levels
            .entry(level)
            .or_default()
            .push(Edge::new(UnitId(a), UnitId(b), len));
        self
    }

    /// Adds `count` students residing in `unit`, the first `group` of them in
    /// the target group. `later` lists residence units at higher levels.
    pub fn students(
        mut self,
        unit: u32,
        count: u64,
        group: u64,
        later: &[(Level, u32)],
        distances: &[(u32, f64)],
    ) -> Self {
        let u = self
            .data
            .units
            .iter_mut()
            .find(|u| u.id.0 == unit)
            .expect("unit added before its students");
        u.n_students += count;
        u.n_group += group;
        let (level, sq) = (u.level, u.sq_school);
        for k in 0..count {
            let mut residence = BTreeMap::new();
            residence.insert(level, UnitId(unit));
            for &(l, p) in later {
                residence.insert(l, UnitId(p));
            }
            self.data.students.push(Student {
                id: StudentId(self.next_student),
                level,
                residence_units: residence,
                sq_school: sq,
                in_group: k < group,
                distances: distances.iter().map(|&(s, d)| (SchoolId(s), d)).collect(),
            });
            self.next_student += 1;
        }
        self
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    pub fn build(self, config: &ConstraintConfig) -> Instance {
        Instance::build(self.data, config).expect("fixture is valid")
    }
}

/// Unit ids of TINY-1, in path order.
pub const P1: UnitId = UnitId(1);
pub const P2: UnitId = UnitId(2);
pub const P3: UnitId = UnitId(3);
pub const P4: UnitId = UnitId(4);
pub const SCHOOL_A: SchoolId = SchoolId(1);
pub const SCHOOL_B: SchoolId = SchoolId(2);

/// The canonical four-unit, two-school desk district.
///
/// Path p1-p2-p3-p4; ten students per unit with (4, 6, 2, 0) group members;
/// p1, p2 zoned to A and p3, p4 to B; capacities 5..35 with 20 desired.
pub fn tiny1_data() -> InstanceData {
    FixtureBuilder::new(vec![1])
        .school(1, 1, (5, 35, 20))
        .school(2, 1, (5, 35, 20))
        .unit(1, 1, 1)
        .unit(2, 1, 1)
        .unit(3, 1, 2)
        .unit(4, 1, 2)
        .site(1, 1)
        .site(2, 4)
        .edge(1, 1, 2, Some(1.0))
        .edge(1, 2, 3, Some(1.0))
        .edge(1, 3, 4, Some(1.0))
        .students(1, 10, 4, &[], &[(1, 1.0), (2, 3.0)])
        .students(2, 10, 6, &[], &[(1, 1.0), (2, 2.0)])
        .students(3, 10, 2, &[], &[(1, 2.0), (2, 1.0)])
        .students(4, 10, 0, &[], &[(1, 3.0), (2, 1.0)])
        .into_data()
}

pub fn tiny1(config: &ConstraintConfig) -> Instance {
    Instance::build(tiny1_data(), config).expect("TINY-1 is valid")
}

/// Two-level district: one elementary school E1 (id 10) over units 101
/// (12 students) and 102 (8 students); middle schools M1 (20) and M2 (21)
/// over units 201 and 202. Students of 101 move on to 201, those of 102 to 202.
pub fn two_level(config: &ConstraintConfig) -> Instance {
    FixtureBuilder::new(vec![1, 2])
        .school(10, 1, (0, 40, 20))
        .school(20, 2, (0, 40, 10))
        .school(21, 2, (0, 40, 10))
        .unit(101, 1, 10)
        .unit(102, 1, 10)
        .unit(201, 2, 20)
        .unit(202, 2, 21)
        .edge(1, 101, 102, Some(1.0))
        .edge(2, 201, 202, Some(1.0))
        .students(101, 12, 3, &[(2, 201)], &[(10, 1.0)])
        .students(102, 8, 4, &[(2, 202)], &[(10, 1.0)])
        .students(201, 10, 2, &[], &[(20, 1.0), (21, 1.5)])
        .students(202, 10, 5, &[], &[(20, 1.5), (21, 1.0)])
        .build(config)
}
