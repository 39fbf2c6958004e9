//! Resolution of a parsed scenario into geometry objects.

use std::collections::BTreeMap;
use std::sync::Arc;

use riemap_core::geodesic::{clairaut_monitor, decompose_velocity, integrate_geodesic, push_forward_curve, GeodesicTrace, SourceCurve};
use riemap_core::kaehler::ComplexStructure;
use riemap_core::soliton::{Leaf, LeafKind};
use riemap_core::{parse, ChartedManifold, Expr, SampleSpec, ScalarField, SmoothMap, SymbolTable, VectorField};

use crate::error::{CliError, CliResult};
use crate::schema::{CurveText, GeodesicBlock, LeafKindText, Scenario, Term};

/// Overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub literal_metric: bool,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub manifold: String,
    pub field: ScalarField,
}

#[derive(Debug, Clone)]
pub struct Field {
    pub manifold: String,
    pub field: VectorField,
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub manifold: String,
    pub points: Vec<Vec<f64>>,
}

/// Geodesic spec with every name resolved and every member of a family expanded.
#[derive(Debug, Clone)]
pub struct CurveSpec {
    pub name: String,
    pub manifold: String,
    pub map: Option<String>,
    pub source_curve: Option<SourceCurve>,
    pub start: Vec<f64>,
    pub velocity: Vec<f64>,
    pub anchor: Option<Vec<f64>>,
    pub g: Option<String>,
    pub t_end: f64,
    pub step: f64,
    pub record_every: usize,
}

/// Integrated curve, decomposed when a map is attached.
#[derive(Debug, Clone)]
pub struct Curve {
    pub spec: CurveSpec,
    pub trace: GeodesicTrace,
    pub drift: Option<f64>,
}

#[derive(Debug)]
pub struct Model {
    pub name: String,
    pub seed: u64,
    pub tolerance: f64,
    pub nonconformant: bool,
    pub notes: Vec<String>,
    pub manifolds: BTreeMap<String, Arc<ChartedManifold>>,
    pub maps: BTreeMap<String, Arc<SmoothMap>>,
    pub functions: BTreeMap<String, Function>,
    pub fields: BTreeMap<String, Field>,
    pub structures: BTreeMap<String, (String, ComplexStructure)>,
    pub leaves: BTreeMap<String, (String, Leaf)>,
    pub samples: BTreeMap<String, SampleSet>,
    pub curves: Vec<CurveSpec>,
    /// Family name to member names.
    pub families: BTreeMap<String, Vec<String>>,
}

fn table(coords: &[String], constants: &BTreeMap<String, f64>) -> SymbolTable {
    SymbolTable::new(coords).with_constants(constants)
}

fn expr(term: &Term, symbols: &SymbolTable, context: &str) -> CliResult<Expr> {
    let text = term.text();
    parse(&text, symbols).map_err(|e| CliError::Invalid(format!("{context}: '{text}': {e}")))
}

fn square(rows: &[Vec<Term>], n: usize, symbols: &SymbolTable, context: &str) -> CliResult<Vec<Vec<Expr>>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Invalid(format!("{context}: expected a {n}x{n} matrix")));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, t)| expr(t, symbols, &format!("{context}[{i}][{j}]"))).collect())
        .collect()
}

fn unique<'a>(kind: &str, names: impl Iterator<Item = &'a String>) -> CliResult<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(CliError::Invalid(format!("duplicate {kind} name '{n}'")));
        }
    }
    Ok(())
}

impl Model {
    pub fn build(s: &Scenario, opts: &RunOptions) -> CliResult<Model> {
        unique("manifold", s.manifolds.iter().map(|b| &b.name))?;
        unique("map", s.maps.iter().map(|b| &b.name))?;
        unique("function", s.functions.iter().map(|b| &b.name))?;
        unique("field", s.fields.iter().map(|b| &b.name))?;
        unique("complex structure", s.structures.iter().map(|b| &b.name))?;
        unique("leaf", s.leaves.iter().map(|b| &b.name))?;
        unique("sample set", s.samples.iter().map(|b| &b.name))?;
        unique("geodesic", s.geodesics.iter().map(|b| &b.name))?;
        unique("check", s.checks.iter().map(|b| &b.name))?;

        let seed = opts.seed.unwrap_or(s.seed);
        let mut m = Model {
            name: s.name.clone(),
            seed,
            tolerance: opts.tolerance.unwrap_or(s.tolerance),
            nonconformant: false,
            notes: s.notes.clone(),
            manifolds: BTreeMap::new(),
            maps: BTreeMap::new(),
            functions: BTreeMap::new(),
            fields: BTreeMap::new(),
            structures: BTreeMap::new(),
            leaves: BTreeMap::new(),
            samples: BTreeMap::new(),
            curves: Vec::new(),
            families: BTreeMap::new(),
        };
        if !(m.tolerance > 0.0) {
            return Err(CliError::Invalid(format!("tolerance must be positive, got {}", m.tolerance)));
        }

        for b in &s.manifolds {
            let ctx = format!("manifold '{}'", b.name);
            let n = b.coords.len();
            if b.dim.is_some_and(|d| d != n) {
                return Err(CliError::Invalid(format!("{ctx}: dim {} but {n} coordinates", b.dim.unwrap())));
            }
            unique("coordinate", b.coords.iter())?;
            let symbols = table(&b.coords, &s.constants);
            let literal = opts.literal_metric && b.literal_metric.is_some();
            let man = if literal {
                m.nonconformant = true;
                let mut consts = s.constants.clone();
                consts.extend(b.literal_bindings.iter().map(|(k, v)| (k.clone(), *v)));
                let rows = square(b.literal_metric.as_ref().unwrap(), n, &table(&b.coords, &consts), &format!("{ctx} literal_metric"))?;
                ChartedManifold::new(&b.name, b.coords.clone(), rows)
            } else if let Some(rows) = &b.metric {
                ChartedManifold::new(&b.name, b.coords.clone(), square(rows, n, &symbols, &format!("{ctx} metric"))?)
            } else {
                Ok(ChartedManifold::euclidean(&b.name, b.coords.clone()))
            }
            .map_err(CliError::geometry(ctx.clone()))?;
            let domain = b.domain.iter().map(|d| expr(&Term::Text(d.clone()), &symbols, &format!("{ctx} domain"))).collect::<CliResult<Vec<_>>>()?;
            m.manifolds.insert(b.name.clone(), Arc::new(man.with_domain(domain)));
        }
        if m.nonconformant {
            m.notes.push("nonconformant: literal metric text with foreign symbols bound to constants; not a tensor on the target".into());
        }

        for b in &s.maps {
            let ctx = format!("map '{}'", b.name);
            let src = m.manifold(&b.source, &ctx)?;
            let tgt = m.manifold(&b.target, &ctx)?;
            let symbols = table(src.coords(), &s.constants);
            let comps = b.components.iter().enumerate().map(|(i, t)| expr(t, &symbols, &format!("{ctx} component {i}"))).collect::<CliResult<Vec<_>>>()?;
            let map = SmoothMap::new(&b.name, src, tgt, comps).map_err(CliError::geometry(ctx))?;
            m.maps.insert(b.name.clone(), Arc::new(map));
        }

        for b in &s.functions {
            let ctx = format!("function '{}'", b.name);
            let man = m.manifold(&b.manifold, &ctx)?;
            let e = expr(&b.expr, &table(man.coords(), &s.constants), &ctx)?;
            m.functions.insert(b.name.clone(), Function { manifold: b.manifold.clone(), field: ScalarField::new(e, man.dim()) });
        }

        for b in &s.fields {
            let ctx = format!("field '{}'", b.name);
            let man = m.manifold(&b.manifold, &ctx)?;
            let field = match (&b.components, &b.gradient) {
                (Some(c), None) => {
                    if c.len() != man.dim() {
                        return Err(CliError::Invalid(format!("{ctx}: expected {} components", man.dim())));
                    }
                    let symbols = table(man.coords(), &s.constants);
                    VectorField::from_components(c.iter().map(|t| expr(t, &symbols, &ctx)).collect::<CliResult<Vec<_>>>()?)
                }
                (None, Some(f)) => VectorField::gradient(m.function(f, &b.manifold, &ctx)?.clone()),
                _ => return Err(CliError::Invalid(format!("{ctx}: give exactly one of 'components' or 'gradient'"))),
            };
            m.fields.insert(b.name.clone(), Field { manifold: b.manifold.clone(), field });
        }

        for b in &s.structures {
            let ctx = format!("complex structure '{}'", b.name);
            let man = m.manifold(&b.manifold, &ctx)?;
            let rows = square(&b.matrix, man.dim(), &table(man.coords(), &s.constants), &ctx)?;
            let j = ComplexStructure::new(&man, rows).map_err(CliError::geometry(ctx))?;
            m.structures.insert(b.name.clone(), (b.manifold.clone(), j));
        }

        for b in &s.leaves {
            let ctx = format!("leaf '{}'", b.name);
            let man = m.manifold(&b.manifold, &ctx)?;
            if b.embedding.len() != man.dim() {
                return Err(CliError::Invalid(format!("{ctx}: embedding needs {} components", man.dim())));
            }
            if b.at.len() != b.params.len() {
                return Err(CliError::Invalid(format!("{ctx}: 'at' needs one value per parameter")));
            }
            let mut vars = b.params.clone();
            vars.extend(man.coords().iter().cloned());
            let symbols = table(&vars, &s.constants);
            let embedding = b.embedding.iter().map(|t| expr(t, &symbols, &ctx)).collect::<CliResult<Vec<_>>>()?;
            let at = b.at.iter().map(|t| expr(t, &symbols, &ctx)).collect::<CliResult<Vec<_>>>()?;
            let kind = match b.kind {
                LeafKindText::Range => LeafKind::Range,
                LeafKindText::Normal => LeafKind::Normal,
            };
            let leaf = Leaf { name: b.name.clone(), kind, params: b.params.clone(), embedding, at };
            m.leaves.insert(b.name.clone(), (b.manifold.clone(), leaf));
        }

        for (idx, b) in s.samples.iter().enumerate() {
            let ctx = format!("sample set '{}'", b.name);
            let man = m.manifold(&b.manifold, &ctx)?;
            let spec = match (&b.points, &b.lo, &b.hi, b.count) {
                (Some(p), None, None, None) => SampleSpec::Points(p.clone()),
                (None, Some(lo), Some(hi), Some(count)) => {
                    SampleSpec::Box { lo: lo.clone(), hi: hi.clone(), count, seed: seed.wrapping_add(idx as u64) }
                }
                _ => return Err(CliError::Invalid(format!("{ctx}: give either 'points' or 'lo', 'hi' and 'count'"))),
            };
            let points = spec.points(man.dim(), |p| man.in_domain(p)).map_err(CliError::geometry(ctx.clone()))?;
            if points.is_empty() {
                return Err(CliError::Invalid(format!("{ctx}: no admissible points")));
            }
            m.samples.insert(b.name.clone(), SampleSet { manifold: b.manifold.clone(), points });
        }

        for (idx, b) in s.geodesics.iter().enumerate() {
            let members = m.expand_geodesic(b, seed.wrapping_add(1000 + idx as u64))?;
            if b.count.is_some() {
                m.families.insert(b.name.clone(), members.iter().map(|c| c.name.clone()).collect());
            }
            m.curves.extend(members);
        }
        unique("geodesic", m.curves.iter().map(|c| &c.name))?;
        Ok(m)
    }

    pub fn manifold(&self, name: &str, context: &str) -> CliResult<Arc<ChartedManifold>> {
        self.manifolds.get(name).cloned().ok_or_else(|| CliError::reference("manifold", name, context))
    }

    pub fn map(&self, name: &str, context: &str) -> CliResult<Arc<SmoothMap>> {
        self.maps.get(name).cloned().ok_or_else(|| CliError::reference("map", name, context))
    }

    /// A function that must live on `manifold`.
    pub fn function(&self, name: &str, manifold: &str, context: &str) -> CliResult<&ScalarField> {
        let f = self.functions.get(name).ok_or_else(|| CliError::reference("function", name, context))?;
        if f.manifold != manifold {
            return Err(CliError::Invalid(format!("{context}: function '{name}' lives on '{}', expected '{manifold}'", f.manifold)));
        }
        Ok(&f.field)
    }

    pub fn field(&self, name: &str, manifold: &str, context: &str) -> CliResult<&VectorField> {
        let f = self.fields.get(name).ok_or_else(|| CliError::reference("field", name, context))?;
        if f.manifold != manifold {
            return Err(CliError::Invalid(format!("{context}: field '{name}' lives on '{}', expected '{manifold}'", f.manifold)));
        }
        Ok(&f.field)
    }

    pub fn structure(&self, name: &str, manifold: &str, context: &str) -> CliResult<&ComplexStructure> {
        let (on, j) = self.structures.get(name).ok_or_else(|| CliError::reference("complex structure", name, context))?;
        if on != manifold {
            return Err(CliError::Invalid(format!("{context}: complex structure '{name}' lives on '{on}', expected '{manifold}'")));
        }
        Ok(j)
    }

    pub fn leaf(&self, name: &str, manifold: &str, context: &str) -> CliResult<&Leaf> {
        let (on, leaf) = self.leaves.get(name).ok_or_else(|| CliError::reference("leaf", name, context))?;
        if on != manifold {
            return Err(CliError::Invalid(format!("{context}: leaf '{name}' lives on '{on}', expected '{manifold}'")));
        }
        Ok(leaf)
    }

    pub fn samples(&self, name: &str, manifold: &str, context: &str) -> CliResult<&[Vec<f64>]> {
        let s = self.samples.get(name).ok_or_else(|| CliError::reference("sample set", name, context))?;
        if s.manifold != manifold {
            return Err(CliError::Invalid(format!("{context}: sample set '{name}' lives on '{}', expected '{manifold}'", s.manifold)));
        }
        Ok(&s.points)
    }

    /// Curve names referenced by a check, with families expanded.
    pub fn curve_names(&self, names: &[String], context: &str) -> CliResult<Vec<String>> {
        let mut out = Vec::new();
        for n in names {
            if let Some(members) = self.families.get(n) {
                out.extend(members.iter().cloned());
            } else if self.curves.iter().any(|c| &c.name == n) {
                out.push(n.clone());
            } else {
                return Err(CliError::reference("geodesic", n, context));
            }
        }
        Ok(out)
    }

    fn expand_geodesic(&self, b: &GeodesicBlock, seed: u64) -> CliResult<Vec<CurveSpec>> {
        let ctx = format!("geodesic '{}'", b.name);
        if let Some(map) = &b.map {
            self.map(map, &ctx)?;
        }
        let manifold = match (&b.manifold, &b.source_curve, &b.map) {
            (Some(man), None, _) => man.clone(),
            (None, Some(_), Some(map)) => self.maps[map].target().name().to_string(),
            _ => return Err(CliError::Invalid(format!("{ctx}: give 'manifold', or 'source_curve' together with 'map'"))),
        };
        let man = self.manifold(&manifold, &ctx)?;
        if let Some(g) = &b.g {
            self.function(g, &manifold, &ctx)?;
            if b.map.is_none() {
                return Err(CliError::Invalid(format!("{ctx}: the invariant of 'g' needs a 'map' to measure the angle")));
            }
        }
        if !(b.step > 0.0 && b.t_end > 0.0) || b.record_every == 0 {
            return Err(CliError::Invalid(format!("{ctx}: step, t_end and record_every must be positive")));
        }
        let source_curve = b.source_curve.map(|c| match c {
            CurveText::Geodesic => SourceCurve::Geodesic,
            CurveText::Line => SourceCurve::Line,
        });
        // pushed-forward curves start and move in the source
        let start_dim = if source_curve.is_some() { self.maps[b.map.as_ref().unwrap()].source().dim() } else { man.dim() };
        let image_start = |anchor: &[f64]| -> CliResult<Vec<f64>> {
            let map = b.map.as_ref().ok_or_else(|| CliError::Invalid(format!("{ctx}: 'anchor' needs 'map'")))?;
            self.maps[map].apply(anchor).map_err(CliError::geometry(ctx.clone()))
        };
        let base = CurveSpec {
            name: b.name.clone(),
            manifold: manifold.clone(),
            map: b.map.clone(),
            source_curve,
            start: Vec::new(),
            velocity: Vec::new(),
            anchor: b.anchor.clone(),
            g: b.g.clone(),
            t_end: b.t_end,
            step: b.step,
            record_every: b.record_every,
        };
        let check_len = |v: &[f64], what: &str| -> CliResult<()> {
            if v.len() != start_dim {
                return Err(CliError::Invalid(format!("{ctx}: {what} has length {}, expected {start_dim}", v.len())));
            }
            Ok(())
        };
        let Some(count) = b.count else {
            let start = match (&b.start, &b.anchor, source_curve) {
                (Some(s), _, _) => s.clone(),
                (None, Some(a), None) => image_start(a)?,
                _ => return Err(CliError::Invalid(format!("{ctx}: missing 'start'"))),
            };
            let velocity = b.velocity.clone().ok_or_else(|| CliError::Invalid(format!("{ctx}: missing 'velocity'")))?;
            check_len(&start, "start")?;
            check_len(&velocity, "velocity")?;
            return Ok(vec![CurveSpec { start, velocity, ..base }]);
        };
        let draw = |lo: &Option<Vec<f64>>, hi: &Option<Vec<f64>>, seed: u64, accept: &dyn Fn(&[f64]) -> bool| -> CliResult<Option<Vec<Vec<f64>>>> {
            match (lo, hi) {
                (Some(lo), Some(hi)) => {
                    let spec = SampleSpec::Box { lo: lo.clone(), hi: hi.clone(), count, seed };
                    spec.points(start_dim, accept).map(Some).map_err(CliError::geometry(ctx.clone()))
                }
                (None, None) => Ok(None),
                _ => Err(CliError::Invalid(format!("{ctx}: give both bounds of a box"))),
            }
        };
        let starts = match draw(&b.start_lo, &b.start_hi, seed, &|p| source_curve.is_some() || man.in_domain(p))? {
            Some(s) => s,
            None => {
                let one = match (&b.start, &b.anchor, source_curve) {
                    (Some(s), _, _) => s.clone(),
                    (None, Some(a), None) => image_start(a)?,
                    _ => return Err(CliError::Invalid(format!("{ctx}: a family needs 'start', 'anchor' or a start box"))),
                };
                vec![one; count]
            }
        };
        let velocities = draw(&b.velocity_lo, &b.velocity_hi, seed ^ 0x5eed, &|v| v.iter().any(|x| *x != 0.0))?
            .ok_or_else(|| CliError::Invalid(format!("{ctx}: a family needs 'velocity_lo' and 'velocity_hi'")))?;
        Ok(starts
            .into_iter()
            .zip(velocities)
            .enumerate()
            .map(|(k, (start, velocity))| CurveSpec { name: format!("{}_{k}", b.name), start, velocity, ..base.clone() })
            .collect())
    }

    /// Integrates (or pushes forward) one curve and attaches decomposition and invariant.
    pub fn integrate(&self, spec: &CurveSpec) -> CliResult<Curve> {
        let ctx = format!("geodesic '{}'", spec.name);
        let man = self.manifold(&spec.manifold, &ctx)?;
        let map = spec.map.as_ref().map(|n| self.maps[n].clone());
        let mut trace = match spec.source_curve {
            Some(kind) => push_forward_curve(map.as_ref().unwrap(), kind, &spec.start, &spec.velocity, spec.t_end, spec.step),
            None => integrate_geodesic(&man, &spec.start, &spec.velocity, spec.t_end, spec.step),
        }
        .map_err(CliError::geometry(ctx.clone()))?;
        if spec.source_curve.is_none() {
            if map.is_some() {
                let anchor = match &spec.anchor {
                    Some(a) => a.clone(),
                    None => return Err(CliError::Invalid(format!("{ctx}: decomposing a target geodesic needs 'anchor'"))),
                };
                trace = trace.with_anchor(&anchor);
            }
        }
        if spec.record_every > 1 {
            trace = thin(trace, spec.record_every);
        }
        let mut drift = None;
        if let Some(map) = &map {
            decompose_velocity(map, &mut trace).map_err(CliError::geometry(ctx.clone()))?;
            if let Some(g) = &spec.g {
                let f = self.function(g, &spec.manifold, &ctx)?;
                drift = Some(clairaut_monitor(&mut trace, f).map_err(CliError::geometry(ctx.clone()))?.drift);
            }
        }
        Ok(Curve { spec: spec.clone(), trace, drift })
    }
}

fn thin(t: GeodesicTrace, every: usize) -> GeodesicTrace {
    fn pick<T: Clone>(v: &[T], every: usize) -> Vec<T> {
        v.iter().step_by(every).cloned().collect()
    }
    GeodesicTrace {
        times: pick(&t.times, every),
        points: pick(&t.points, every),
        velocities: pick(&t.velocities, every),
        accelerations: pick(&t.accelerations, every),
        anchors: pick(&t.anchors, every),
        anchor_velocities: pick(&t.anchor_velocities, every),
        range_component: pick(&t.range_component, every),
        normal_component: pick(&t.normal_component, every),
        omega: pick(&t.omega, every),
        invariant: pick(&t.invariant, every),
    }
}
