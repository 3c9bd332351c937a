use std::path::Path;

use serde_json::json;

use super::geometry::shape_to_geometry;
use super::Instance;
use crate::error::Error;

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>, Error> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(name: &str, e: csv::Error) -> Error {
    Error::io(name.to_string(), std::io::Error::other(e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the instance in the input file layout (schools, units, students,
/// distances, adjacency, plus units.geojson when geometry is present).
/// Rows are sorted by id, so output bytes depend only on the instance.
pub fn write_instance_files(instance: &Instance, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let name = "schools.csv";
    let mut w = writer(dir, name)?;
    let rec = |w: &mut csv::Writer<_>, r: Vec<String>| w.write_record(&r).map_err(|e| csv_err(name, e));
    rec(&mut w, ["school_id", "level", "cap_min", "cap_max", "cap_desired", "site_unit"].map(String::from).to_vec())?;
    for s in instance.schools() {
        rec(
            &mut w,
            vec![
                s.id.to_string(),
                s.level.to_string(),
                s.cap_min.to_string(),
                s.cap_max.to_string(),
                s.cap_desired.to_string(),
                opt(s.site_unit),
            ],
        )?;
    }
    w.flush().map_err(|e| Error::io(name, e))?;

    let name = "units.csv";
    let with_xy = instance.units().iter().any(|u| u.centroid.is_some());
    let mut w = writer(dir, name)?;
    let mut header = vec!["unit_id", "level", "sq_school", "n_students", "n_group"];
    if with_xy {
        header.extend(["x", "y"]);
    }
    w.write_record(&header).map_err(|e| csv_err(name, e))?;
    for u in instance.units() {
        let mut r = vec![
            u.id.to_string(),
            u.level.to_string(),
            u.sq_school.to_string(),
            u.n_students.to_string(),
            u.n_group.to_string(),
        ];
        if with_xy {
            r.push(opt(u.centroid.map(|c| c.0)));
            r.push(opt(u.centroid.map(|c| c.1)));
        }
        w.write_record(&r).map_err(|e| csv_err(name, e))?;
    }
    w.flush().map_err(|e| Error::io(name, e))?;

    let name = "students.csv";
    let levels = instance.levels().levels().to_vec();
    let mut w = writer(dir, name)?;
    let mut header: Vec<String> = ["student_id", "level", "sq_school", "in_group"].map(String::from).to_vec();
    header.extend(levels.iter().map(|l| format!("unit_l{l}")));
    w.write_record(&header).map_err(|e| csv_err(name, e))?;
    for st in instance.students() {
        let mut r = vec![
            st.id.to_string(),
            st.level.to_string(),
            st.sq_school.to_string(),
            u8::from(st.in_group).to_string(),
        ];
        r.extend(levels.iter().map(|l| opt(st.residence_units.get(l))));
        w.write_record(&r).map_err(|e| csv_err(name, e))?;
    }
    w.flush().map_err(|e| Error::io(name, e))?;

    let name = "distances.csv";
    let mut w = writer(dir, name)?;
    w.write_record(["student_id", "school_id", "miles"]).map_err(|e| csv_err(name, e))?;
    for st in instance.students() {
        for (school, d) in &st.distances {
            w.write_record([st.id.to_string(), school.to_string(), d.to_string()])
                .map_err(|e| csv_err(name, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(name, e))?;

    let name = "adjacency.csv";
    let mut w = writer(dir, name)?;
    w.write_record(["level", "unit_a", "unit_b", "shared_boundary_len"])
        .map_err(|e| csv_err(name, e))?;
    for (level, e) in instance.adjacency().all_edges() {
        w.write_record([level.to_string(), e.a.to_string(), e.b.to_string(), opt(e.shared_boundary_len)])
            .map_err(|e| csv_err(name, e))?;
    }
    w.flush().map_err(|e| Error::io(name, e))?;

    if !instance.geometry().is_empty() {
        let features: Vec<_> = instance
            .geometry()
            .iter()
            .map(|(id, shape)| {
                json!({
                    "type": "Feature",
                    "properties": { "unit_id": id.0 },
                    "geometry": shape_to_geometry(shape),
                })
            })
            .collect();
        let doc = json!({ "type": "FeatureCollection", "features": features });
        let path = dir.join("units.geojson");
        let text = serde_json::to_string_pretty(&doc).expect("geojson serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
