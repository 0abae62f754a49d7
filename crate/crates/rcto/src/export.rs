//! Export bundle: the final design as CSV tables, a legacy-ASCII VTK grid
//! and the normalized config, all in one directory.
//!
//! Every file opens with the schema tag and the normalized config that
//! produced it. Reals are written with 17 significant digits so parsing a
//! CSV back gives the in-memory values bit for bit. Column layouts are in
//! `docs/export.md`.

use std::fmt::Write as _;
use std::path::Path;

use rcto_core::optimizer::{IterationRecord, RunResult, VtsThicknessField};
use rcto_core::{Mesh, Mode};

use crate::config::ConfigDoc;
use crate::error::{Error, Result};

/// Schema tag written at the top of every file.
pub const SCHEMA: &str = "rcto-export/1";

/// File names inside a bundle directory.
pub mod files {
    /// Normalized config.
    pub const CONFIG: &str = "config.toml";
    /// Per-element densities.
    pub const DENSITY: &str = "density.csv";
    /// Truss node positions.
    pub const NODES: &str = "truss_nodes.csv";
    /// Truss members.
    pub const MEMBERS: &str = "truss_members.csv";
    /// Outer iteration log.
    pub const LOG: &str = "log.csv";
    /// Geometry for viewers.
    pub const VTK: &str = "design.vtk";
}

const VTK_QUAD: u8 = 9;
const VTK_LINE: u8 = 3;

/// Final member state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportMember {
    /// End nodes.
    pub nodes: [usize; 2],
    /// Cross-section area.
    pub area: f64,
    /// Sizing variable `x_t`.
    pub sizing: f64,
}

/// Everything written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportBundle {
    /// Normalized config.
    pub config: ConfigDoc,
    /// Continuum mesh.
    pub mesh: Mesh,
    /// Design mode.
    pub mode: Mode,
    /// Physical density per element.
    pub densities: Vec<f64>,
    /// VTS thickness reading.
    pub thickness: Option<VtsThicknessField>,
    /// Final truss node positions.
    pub nodes: Vec<[f64; 2]>,
    /// Final members.
    pub members: Vec<ExportMember>,
    /// Iteration log.
    pub log: Vec<IterationRecord>,
}

impl ExportBundle {
    /// Collects a finished run; `config` must be the document that built it.
    pub fn from_run(config: &ConfigDoc, result: &RunResult) -> Result<Self> {
        let config = config.normalized()?;
        let problem = config.build()?;
        let members = result
            .ground
            .members
            .iter()
            .zip(&result.design.x_t)
            .map(|(m, &x)| ExportMember {
                nodes: m.nodes,
                area: m.area,
                sizing: x,
            })
            .collect();
        Ok(ExportBundle {
            mode: problem.config.mode,
            mesh: problem.mesh,
            config,
            densities: result.densities.clone(),
            thickness: result.thickness.clone(),
            nodes: result.design.positions.clone(),
            members,
            log: result.log.clone(),
        })
    }

    fn header(&self, kind: &str) -> String {
        let mut s = format!("# schema: {SCHEMA}\n# file: {kind}\n# config:\n");
        for line in self.config.to_toml().lines() {
            s.push_str("#   ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    /// `density.csv` contents.
    pub fn density_csv(&self) -> String {
        let mut s = self.header("density");
        s.push_str("element,i,j,x,y,density");
        if self.thickness.is_some() {
            s.push_str(",thickness,sub_minimum");
        }
        s.push('\n');
        let ny = self.mesh.ny();
        for (e, &rho) in self.densities.iter().enumerate() {
            let c = self.mesh.element_center(e);
            write!(
                s,
                "{e},{},{},{},{},{}",
                e / ny,
                e % ny,
                real(c[0]),
                real(c[1]),
                real(rho)
            )
            .unwrap();
            if let Some(t) = &self.thickness {
                write!(s, ",{},{}", real(t.thickness[e]), t.sub_minimum[e]).unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// `truss_nodes.csv` contents.
    pub fn nodes_csv(&self) -> String {
        let mut s = self.header("truss_nodes");
        s.push_str("node,x,y\n");
        for (k, p) in self.nodes.iter().enumerate() {
            writeln!(s, "{k},{},{}", real(p[0]), real(p[1])).unwrap();
        }
        s
    }

    /// `truss_members.csv` contents.
    pub fn members_csv(&self) -> String {
        let mut s = self.header("truss_members");
        s.push_str("member,node_a,node_b,x_a,y_a,x_b,y_b,area,sizing\n");
        for (k, m) in self.members.iter().enumerate() {
            let [a, b] = m.nodes;
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            writeln!(
                s,
                "{k},{a},{b},{},{},{},{},{},{}",
                real(pa[0]),
                real(pa[1]),
                real(pb[0]),
                real(pb[1]),
                real(m.area),
                real(m.sizing)
            )
            .unwrap();
        }
        s
    }

    /// `log.csv` contents.
    pub fn log_csv(&self) -> String {
        let mut s = self.header("log");
        s.push_str(LOG_COLUMNS);
        s.push('\n');
        for r in &self.log {
            let beta = r.beta.map(real).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.iteration,
                real(r.compliance),
                real(r.concrete_volume),
                real(r.steel_volume),
                real(r.concrete_fraction),
                real(r.steel_fraction),
                real(r.max_change),
                r.inner_iterations,
                r.labels_consistent,
                real(r.ratio),
                beta,
                r.splits,
                r.members,
                real(r.kkt_residual)
            )
            .unwrap();
        }
        s
    }

    /// `config.toml` contents.
    pub fn config_toml(&self) -> String {
        format!(
            "# schema: {SCHEMA}\n# file: config\n{}",
            self.config.to_toml()
        )
    }

    /// Legacy-ASCII unstructured grid: quads then member lines. Truss nodes
    /// sitting exactly on a mesh node share its point.
    pub fn vtk(&self) -> String {
        let mesh = &self.mesh;
        let mut points: Vec<[f64; 2]> = (0..mesh.node_count())
            .map(|n| mesh.node_coords(n))
            .collect();
        let truss_point: Vec<usize> = self
            .nodes
            .iter()
            .map(|&p| match lattice_node(mesh, p) {
                Some(n) => n,
                None => {
                    points.push(p);
                    points.len() - 1
                }
            })
            .collect();
        let nq = mesh.element_count();
        let nl = self.members.len();
        let mode = match self.mode {
            Mode::Binary => "binary",
            Mode::Vts => "vts",
        };
        let mut s = String::new();
        s.push_str("# vtk DataFile Version 3.0\n");
        writeln!(s, "{SCHEMA} {mode} design").unwrap();
        s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
        let cfg = self.config_toml();
        s.push_str("FIELD FieldData 1\n");
        writeln!(s, "config 1 {} unsigned_char", cfg.len()).unwrap();
        for chunk in cfg.as_bytes().chunks(20) {
            let row: Vec<String> = chunk.iter().map(|b| b.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        writeln!(s, "POINTS {} double", points.len()).unwrap();
        for p in &points {
            writeln!(s, "{} {} 0", real(p[0]), real(p[1])).unwrap();
        }
        writeln!(s, "CELLS {} {}", nq + nl, 5 * nq + 3 * nl).unwrap();
        for e in 0..nq {
            let [a, b, c, d] = mesh.element_nodes(e);
            writeln!(s, "4 {a} {b} {c} {d}").unwrap();
        }
        for m in &self.members {
            writeln!(
                s,
                "2 {} {}",
                truss_point[m.nodes[0]], truss_point[m.nodes[1]]
            )
            .unwrap();
        }
        writeln!(s, "CELL_TYPES {}", nq + nl).unwrap();
        for _ in 0..nq {
            writeln!(s, "{VTK_QUAD}").unwrap();
        }
        for _ in 0..nl {
            writeln!(s, "{VTK_LINE}").unwrap();
        }
        writeln!(s, "CELL_DATA {}", nq + nl).unwrap();
        let mut scalar = |name: &str, quad: &dyn Fn(usize) -> f64, line: &dyn Fn(usize) -> f64| {
            writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
            for e in 0..nq {
                writeln!(s, "{}", real(quad(e))).unwrap();
            }
            for m in 0..nl {
                writeln!(s, "{}", real(line(m))).unwrap();
            }
        };
        scalar("density", &|e| self.densities[e], &|_| 0.0);
        scalar("member_size", &|_| 0.0, &|m| self.members[m].sizing);
        scalar("member_area", &|_| 0.0, &|m| self.members[m].area);
        if let Some(t) = &self.thickness {
            scalar("thickness", &|e| t.thickness[e], &|_| 0.0);
        }
        s
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_csv(dir)?;
        self.write_vtk(dir)
    }

    /// Writes the config and the CSV tables.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join(files::CONFIG), &self.config_toml())?;
        write(&dir.join(files::DENSITY), &self.density_csv())?;
        write(&dir.join(files::NODES), &self.nodes_csv())?;
        write(&dir.join(files::MEMBERS), &self.members_csv())?;
        write(&dir.join(files::LOG), &self.log_csv())
    }

    /// Writes `design.vtk`.
    pub fn write_vtk(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join(files::VTK), &self.vtk())
    }

    /// Reads a bundle back from its config and CSV files.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let config = ConfigDoc::load(&dir.join(files::CONFIG))?;
        let problem = config.build().map_err(|e| e.at(&dir.join(files::CONFIG)))?;
        let mesh = problem.mesh;
        let mode = problem.config.mode;

        let path = dir.join(files::DENSITY);
        let vts = mode == Mode::Vts;
        let expected: &[&str] = if vts {
            &[
                "element",
                "i",
                "j",
                "x",
                "y",
                "density",
                "thickness",
                "sub_minimum",
            ]
        } else {
            &["element", "i", "j", "x", "y", "density"]
        };
        let rows = read_table(&path, expected)?;
        if rows.len() != mesh.element_count() {
            return Err(Error::format(
                &path,
                format!(
                    "expected {} rows, found {}",
                    mesh.element_count(),
                    rows.len()
                ),
            ));
        }
        let mut densities = Vec::with_capacity(rows.len());
        let mut thickness = Vec::new();
        let mut sub_minimum = Vec::new();
        for (e, row) in rows.iter().enumerate() {
            if parse::<usize>(&path, &row[0])? != e {
                return Err(Error::format(&path, format!("row {e} is out of order")));
            }
            densities.push(parse(&path, &row[5])?);
            if vts {
                thickness.push(parse(&path, &row[6])?);
                sub_minimum.push(parse(&path, &row[7])?);
            }
        }
        let thickness = vts.then(|| VtsThicknessField {
            thickness,
            sub_minimum,
            t_max: problem.config.thickness,
        });

        let path = dir.join(files::NODES);
        let nodes = read_table(&path, &["node", "x", "y"])?
            .iter()
            .map(|r| Ok([parse(&path, &r[1])?, parse(&path, &r[2])?]))
            .collect::<Result<Vec<_>>>()?;

        let path = dir.join(files::MEMBERS);
        let cols = [
            "member", "node_a", "node_b", "x_a", "y_a", "x_b", "y_b", "area", "sizing",
        ];
        let members = read_table(&path, &cols)?
            .iter()
            .map(|r| {
                Ok(ExportMember {
                    nodes: [parse(&path, &r[1])?, parse(&path, &r[2])?],
                    area: parse(&path, &r[7])?,
                    sizing: parse(&path, &r[8])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(m) = members
            .iter()
            .find(|m| m.nodes.iter().any(|&n| n >= nodes.len()))
        {
            return Err(Error::format(
                &path,
                format!(
                    "member references node {:?} beyond {}",
                    m.nodes,
                    nodes.len()
                ),
            ));
        }

        let path = dir.join(files::LOG);
        let columns: Vec<&str> = LOG_COLUMNS.split(',').collect();
        let log = read_table(&path, &columns)?
            .iter()
            .map(|r| {
                Ok(IterationRecord {
                    iteration: parse(&path, &r[0])?,
                    compliance: parse(&path, &r[1])?,
                    concrete_volume: parse(&path, &r[2])?,
                    steel_volume: parse(&path, &r[3])?,
                    concrete_fraction: parse(&path, &r[4])?,
                    steel_fraction: parse(&path, &r[5])?,
                    max_change: parse(&path, &r[6])?,
                    inner_iterations: parse(&path, &r[7])?,
                    labels_consistent: parse(&path, &r[8])?,
                    ratio: parse(&path, &r[9])?,
                    beta: if r[10].is_empty() {
                        None
                    } else {
                        Some(parse(&path, &r[10])?)
                    },
                    splits: parse(&path, &r[11])?,
                    members: parse(&path, &r[12])?,
                    kkt_residual: parse(&path, &r[13])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(ExportBundle {
            config,
            mesh,
            mode,
            densities,
            thickness,
            nodes,
            members,
            log,
        })
    }
}

const LOG_COLUMNS: &str =
    "iteration,compliance,concrete_volume,steel_volume,concrete_fraction,steel_fraction,\
max_change,inner_iterations,labels_consistent,ratio,beta,splits,members,kkt_residual";

/// 17 significant digits.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn lattice_node(mesh: &Mesh, p: [f64; 2]) -> Option<usize> {
    let h = mesh.element_size();
    let (i, j) = ((p[0] / h).round(), (p[1] / h).round());
    if i < 0.0 || j < 0.0 || i > mesh.nx() as f64 || j > mesh.ny() as f64 {
        return None;
    }
    let n = mesh.node_index(i as usize, j as usize);
    (mesh.node_coords(n) == p).then_some(n)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse<T: std::str::FromStr>(path: &Path, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::format(path, format!("cannot parse \"{field}\"")))
}

/// Data rows of a CSV file after its comment header, checking the column line.
fn read_table(path: &Path, columns: &[&str]) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "missing column header"))?;
    let found: Vec<&str> = header.split(',').collect();
    if found != columns {
        return Err(Error::format(
            path,
            format!("expected columns {}, found {header}", columns.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for line in lines {
        let row: Vec<String> = line.split(',').map(str::to_owned).collect();
        if row.len() != columns.len() {
            return Err(Error::format(
                path,
                format!("row \"{line}\" has {} fields", row.len()),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}
