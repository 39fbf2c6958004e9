//! Dispatch of check blocks to the verification routines.

use std::collections::BTreeMap;

use riemap_core::clairaut::{certify, check_harmonicity};
use riemap_core::geodesic::{clairaut_monitor, geodesic_condition_residuals, GeodesicTrace};
use riemap_core::kaehler::{
    anti_invariance_check, anti_invariant_geodesic_residuals, bc_decompose, clairaut_anti_invariant_check, kaehler_check,
    theorem_4_6_check, theorem_4_8_dichotomy,
};
use riemap_core::linalg::{inner, norm};
use riemap_core::soliton::{
    conformal_killing_theorem_check, einstein_leaf_check, ricci_decomposition_check, scalar_curvature_theorems, soliton_residual,
    solve_lambda_report, trace_lemma_check, LambdaSpec,
};
use riemap_core::{CheckReport, GeomError, SmoothMap};

use crate::error::{CliError, CliResult};
use crate::model::{Curve, Model};
use crate::schema::{CheckBlock, CheckKind, LambdaText};

/// Everything a check may read.
pub struct Context<'a> {
    pub model: &'a Model,
    pub curves: &'a BTreeMap<String, Result<Curve, String>>,
}

impl Context<'_> {
    fn curves(&self, block: &CheckBlock, ctx: &str) -> CliResult<Vec<&Curve>> {
        if block.geodesics.is_empty() {
            return Err(CliError::Invalid(format!("{ctx}: 'geodesics' is empty")));
        }
        self.model
            .curve_names(&block.geodesics, ctx)?
            .iter()
            .map(|n| match &self.curves[n] {
                Ok(c) => Ok(c),
                Err(e) => Err(CliError::Invalid(format!("{ctx}: geodesic '{n}' unavailable: {e}"))),
            })
            .collect()
    }
}

fn need<'b>(v: &'b Option<String>, field: &str, ctx: &str) -> CliResult<&'b str> {
    v.as_deref().ok_or_else(|| CliError::Invalid(format!("{ctx}: missing '{field}'")))
}

fn lambda(v: &Option<LambdaText>, default: Option<LambdaSpec>, ctx: &str) -> CliResult<LambdaSpec> {
    match v {
        Some(LambdaText::Value(x)) => Ok(LambdaSpec::Value(*x)),
        Some(LambdaText::Word(w)) if w == "fit" => Ok(LambdaSpec::Fit),
        Some(LambdaText::Word(w)) => Err(CliError::Invalid(format!("{ctx}: lambda must be a number or \"fit\", got '{w}'"))),
        None => default.ok_or_else(|| CliError::Invalid(format!("{ctx}: missing 'lambda'"))),
    }
}

fn geom(ctx: &str) -> impl FnOnce(GeomError) -> CliError {
    CliError::geometry(ctx.to_string())
}

/// Runs one block; reports carry the block's notes.
pub fn run_check(cx: &Context, block: &CheckBlock, tol: f64) -> CliResult<Vec<CheckReport>> {
    let ctx = format!("check '{}'", block.name);
    let m = cx.model;
    let ctx = ctx.as_str();

    let map = |ctx: &str| -> CliResult<std::sync::Arc<SmoothMap>> { m.map(need(&block.map, "map", ctx)?, ctx) };
    let map_samples = |map: &SmoothMap| -> CliResult<Vec<Vec<f64>>> {
        Ok(m.samples(need(&block.samples, "samples", ctx)?, map.source().name(), ctx)?.to_vec())
    };
    let target_g = |map: &SmoothMap| -> CliResult<riemap_core::ScalarField> {
        Ok(m.function(need(&block.g, "g", ctx)?, map.target().name(), ctx)?.clone())
    };
    let leaf = |name: &Option<String>, map: &SmoothMap| -> CliResult<Option<riemap_core::soliton::Leaf>> {
        name.as_ref().map(|n| m.leaf(n, map.target().name(), ctx).cloned()).transpose()
    };

    let reports = match block.kind {
        CheckKind::RiemannianMap => {
            let f = map(ctx)?;
            vec![f.check_riemannian(&map_samples(&f)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::SecondFundamentalForm => {
            let f = map(ctx)?;
            vec![second_fundamental_form(&f, &map_samples(&f)?, block.coefficient, tol).map_err(geom(ctx))?]
        }
        CheckKind::Umbilical => {
            let f = map(ctx)?;
            vec![f.umbilical_check(&map_samples(&f)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::Tension => {
            let f = map(ctx)?;
            vec![tension(&f, &map_samples(&f)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::ClairautCertificate => {
            let f = map(ctx)?;
            let cert = certify(&f, &target_g(&f)?, &map_samples(&f)?, tol).map_err(geom(ctx))?;
            cert.reports().into_iter().cloned().collect()
        }
        CheckKind::Harmonicity => {
            let f = map(ctx)?;
            vec![check_harmonicity(&f, &target_g(&f)?, &map_samples(&f)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::ClairautInvariant => vec![invariant(cx, block, tol, ctx)?],
        CheckKind::GeodesicConditions => vec![geodesic_conditions(cx, block, tol, ctx)?],
        CheckKind::Killing => {
            let man = m.manifold(need(&block.manifold, "manifold", ctx)?, ctx)?;
            let z = m.field(need(&block.field, "field", ctx)?, man.name(), ctx)?;
            vec![man.killing_check(z, m.samples(need(&block.samples, "samples", ctx)?, man.name(), ctx)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::Soliton | CheckKind::SolitonFit | CheckKind::TraceLemma => {
            let man = m.manifold(need(&block.manifold, "manifold", ctx)?, ctx)?;
            let z = m.field(need(&block.field, "field", ctx)?, man.name(), ctx)?;
            let pts = m.samples(need(&block.samples, "samples", ctx)?, man.name(), ctx)?;
            let value = || match lambda(&block.lambda, None, ctx)? {
                LambdaSpec::Value(x) => Ok(x),
                LambdaSpec::Fit => Err(CliError::Invalid(format!("{ctx}: this kind needs a numeric lambda"))),
            };
            let r = match block.kind {
                CheckKind::Soliton => soliton_residual(&man, z, value()?, pts, tol),
                CheckKind::SolitonFit => solve_lambda_report(&man, z, pts, tol),
                _ => trace_lemma_check(&man, z, value()?, pts, tol),
            };
            vec![r.map_err(geom(ctx))?]
        }
        CheckKind::RicciDecomposition => {
            let f = map(ctx)?;
            let (rl, nl) = (leaf(&block.range_leaf, &f)?, leaf(&block.normal_leaf, &f)?);
            vec![ricci_decomposition_check(&f, &target_g(&f)?, rl.as_ref(), nl.as_ref(), &map_samples(&f)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::ScalarCurvature => {
            let f = map(ctx)?;
            let (rl, nl) = (leaf(&block.range_leaf, &f)?, leaf(&block.normal_leaf, &f)?);
            let lr = lambda(&block.lambda_range, Some(LambdaSpec::Fit), ctx)?;
            let ln = lambda(&block.lambda_normal, Some(LambdaSpec::Fit), ctx)?;
            let (a, b) = scalar_curvature_theorems(&f, &target_g(&f)?, rl.as_ref(), nl.as_ref(), lr, ln, &map_samples(&f)?, tol)
                .map_err(geom(ctx))?;
            vec![a, b]
        }
        CheckKind::EinsteinLeaf => {
            let f = map(ctx)?;
            let v = m.field(need(&block.field, "field", ctx)?, f.target().name(), ctx)?;
            let rl = leaf(&block.range_leaf, &f)?;
            let l = lambda(&block.lambda, Some(LambdaSpec::Fit), ctx)?;
            vec![einstein_leaf_check(&f, &target_g(&f)?, v, l, rl.as_ref(), &map_samples(&f)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::ConformalKilling => {
            let f = map(ctx)?;
            let z = m.field(need(&block.field, "field", ctx)?, f.target().name(), ctx)?;
            let (rl, nl) = (leaf(&block.range_leaf, &f)?, leaf(&block.normal_leaf, &f)?);
            let l = lambda(&block.lambda, Some(LambdaSpec::Fit), ctx)?;
            vec![conformal_killing_theorem_check(&f, &target_g(&f)?, z, l, rl.as_ref(), nl.as_ref(), &map_samples(&f)?, tol)
                .map_err(geom(ctx))?]
        }
        CheckKind::Kaehler => {
            let man = m.manifold(need(&block.manifold, "manifold", ctx)?, ctx)?;
            let j = m.structure(need(&block.structure, "structure", ctx)?, man.name(), ctx)?;
            vec![kaehler_check(&man, j, m.samples(need(&block.samples, "samples", ctx)?, man.name(), ctx)?, tol).map_err(geom(ctx))?]
        }
        CheckKind::AntiInvariance | CheckKind::BcDecomposition | CheckKind::Dichotomy | CheckKind::RangeTotallyGeodesic => {
            let f = map(ctx)?;
            let j = m.structure(need(&block.structure, "structure", ctx)?, f.target().name(), ctx)?;
            let pts = map_samples(&f)?;
            let r = match block.kind {
                CheckKind::AntiInvariance => anti_invariance_check(&f, j, &pts, tol),
                CheckKind::BcDecomposition => bc_report(&f, j, &pts, tol),
                CheckKind::Dichotomy => theorem_4_8_dichotomy(&f, j, &target_g(&f)?, &pts, tol),
                _ => theorem_4_6_check(&f, j, &target_g(&f)?, &pts, tol),
            };
            vec![r.map_err(geom(ctx))?]
        }
        CheckKind::AntiInvariantGeodesic => vec![anti_invariant_geodesics(cx, block, tol, ctx)?],
        CheckKind::ClairautAntiInvariant => {
            let f = map(ctx)?;
            let j = m.structure(need(&block.structure, "structure", ctx)?, f.target().name(), ctx)?;
            let traces: Vec<GeodesicTrace> = cx.curves(block, ctx)?.into_iter().map(|c| c.trace.clone()).collect();
            vec![clairaut_anti_invariant_check(&f, j, &target_g(&f)?, &traces, &map_samples(&f)?, tol).map_err(geom(ctx))?]
        }
    };
    Ok(reports
        .into_iter()
        .map(|mut r| {
            r.notes.extend(block.notes.iter().cloned());
            r
        })
        .collect())
}

/// Symmetry and normality of `(nabla F*)` on the horizontal frame, and the
/// coefficient `b` of `(nabla F*)(X,X)` along the first normal vector.
fn second_fundamental_form(map: &SmoothMap, samples: &[Vec<f64>], expected: Option<f64>, tol: f64) -> riemap_core::Result<CheckReport> {
    let mut r = CheckReport::new("second_fundamental_form", "Eq (2.3): (nabla F*)(X,Y) in (rangeF*)^perp; (nabla F*)(X,X) = b e2'");
    let (mut sym, mut normal, mut coeff, mut form, mut bs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for p in samples {
        let s = map.split(p)?;
        for x in &s.horizontal {
            for y in &s.horizontal {
                let xy = map.sff_raw(p, x, y)?;
                sym.push(norm(&s.g2, &(&xy - map.sff_raw(p, y, x)?)));
                normal.push(norm(&s.g2, &s.range_part(&xy)));
            }
        }
        let (Some(x), Some(e)) = (s.horizontal.first(), s.normal.first()) else { continue };
        let xx = map.sff_raw(p, x, x)?;
        let b = inner(&s.g2, &xx, e);
        form.push(norm(&s.g2, &(&xx - e * b)));
        bs.push(b);
        if let Some(b0) = expected {
            coeff.push(b - b0);
        }
    }
    r.residual("symmetry", &sym, tol);
    r.residual("normality", &normal, tol);
    r.residual("form_along_first_normal", &form, tol);
    if expected.is_some() {
        r.residual("coefficient", &coeff, tol);
    }
    if let Some(b) = bs.first() {
        r.value("b", *b);
        r.value("b_min", bs.iter().cloned().fold(f64::INFINITY, f64::min));
        r.value("b_max", bs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(r.finish())
}

fn tension(map: &SmoothMap, samples: &[Vec<f64>], tol: f64) -> riemap_core::Result<CheckReport> {
    let mut r = CheckReport::new("tension", "Lemma 3.2: tau(F) = -m1 F*(mu^kerF*) + m2 H2");
    let (mut diff, mut size) = (Vec::new(), Vec::new());
    for p in samples {
        let t = map.tension_field(p)?;
        let g2 = map.target().metric_at(&map.apply(p)?)?;
        diff.push(norm(&g2, &(&t.direct - &t.lemma)));
        size.push(norm(&g2, &t.direct));
    }
    r.residual("direct_minus_lemma", &diff, tol);
    r.value("tension_max", size.iter().cloned().fold(0.0, f64::max));
    Ok(r.finish())
}

fn bc_report(map: &SmoothMap, j: &riemap_core::kaehler::ComplexStructure, samples: &[Vec<f64>], tol: f64) -> riemap_core::Result<CheckReport> {
    let mut r = CheckReport::new("bc_decomposition", "Eq (4.2): JV = BV + CV, (rangeF*)^perp = J(rangeF*) + mu");
    let mut defect = Vec::new();
    let mut lagrangian = true;
    let mut mu_dim = 0;
    for (i, p) in samples.iter().enumerate() {
        let d = bc_decompose(map, j, p)?;
        defect.push(d.reconstruction_defect());
        lagrangian &= d.lagrangian;
        mu_dim = mu_dim.max(d.mu.len());
        if i == 0 {
            for (k, (b, c)) in d.b.iter().zip(&d.c).enumerate() {
                r.value(format!("b_norm_{k}"), norm(&d.g, b));
                r.value(format!("c_norm_{k}"), norm(&d.g, c));
            }
        }
    }
    r.residual("reconstruction", &defect, tol);
    r.value("mu_dim", mu_dim as f64);
    r.label("lagrangian", lagrangian.to_string());
    Ok(r.finish())
}

fn invariant(cx: &Context, block: &CheckBlock, tol: f64, ctx: &str) -> CliResult<CheckReport> {
    let mut r = CheckReport::new("clairaut_invariant", "Definition 3.2: exp(g(beta)) sin(omega) is constant along geodesics");
    let mut drifts = Vec::new();
    for c in cx.curves(block, ctx)? {
        let drift = match &block.g {
            Some(g) => {
                let f = cx.model.function(g, &c.spec.manifold, ctx)?;
                let mut t = c.trace.clone();
                clairaut_monitor(&mut t, f).map_err(geom(ctx))?.drift
            }
            None => c.drift.ok_or_else(|| CliError::Invalid(format!("{ctx}: geodesic '{}' has no 'g'", c.spec.name)))?,
        };
        r.value(format!("drift_{}", c.spec.name), drift);
        drifts.push(drift);
    }
    r.residual("relative_drift", &drifts, tol);
    Ok(r.finish())
}

fn geodesic_conditions(cx: &Context, block: &CheckBlock, tol: f64, ctx: &str) -> CliResult<CheckReport> {
    let mut r = CheckReport::new("geodesic_conditions", "Section 3 Lemma: beta = F o alpha is geodesic iff both decomposition conditions hold");
    let (mut normal, mut range, mut acc) = (Vec::new(), Vec::new(), Vec::new());
    for c in cx.curves(block, ctx)? {
        let map = cx.model.map(c.spec.map.as_deref().ok_or_else(|| CliError::Invalid(format!("{ctx}: geodesic '{}' has no map", c.spec.name)))?, ctx)?;
        let res = geodesic_condition_residuals(&map, &c.trace).map_err(geom(ctx))?;
        normal.extend(res.normal_condition);
        range.extend(res.range_condition);
        acc.extend(res.acceleration);
    }
    r.residual("normal_condition", &normal, tol);
    r.residual("range_condition", &range, tol);
    let conditions = r.passed_residuals();
    let direct = acc.iter().fold(0.0f64, |a, b| a.max(*b)) < tol;
    r.value("acceleration_max", acc.iter().cloned().fold(0.0, f64::max));
    r.label("direct_integration", if direct == conditions { "agrees" } else { "disagrees" });
    Ok(r.finish_with(conditions && direct))
}

fn anti_invariant_geodesics(cx: &Context, block: &CheckBlock, tol: f64, ctx: &str) -> CliResult<CheckReport> {
    let m = cx.model;
    let map = m.map(need(&block.map, "map", ctx)?, ctx)?;
    let j = m.structure(need(&block.structure, "structure", ctx)?, map.target().name(), ctx)?;
    let mut r = CheckReport::new("anti_invariant_geodesic", "Section 4 Lemma: geodesic conditions for anti-invariant Riemannian maps");
    let (mut range, mut normal, mut acc) = (Vec::new(), Vec::new(), Vec::new());
    for c in cx.curves(block, ctx)? {
        match anti_invariant_geodesic_residuals(&map, j, &c.trace, tol) {
            Ok(res) => {
                range.extend(res.range_condition);
                normal.extend(res.normal_condition);
                acc.extend(res.acceleration);
            }
            Err(GeomError::RequiresKaehler(d)) => {
                r.value("nabla_j", d);
                return Ok(r.hypothesis_not_met("target complex structure is not parallel"));
            }
            Err(e) => return Err(geom(ctx)(e)),
        }
    }
    r.residual("range_condition", &range, tol);
    r.residual("normal_condition", &normal, tol);
    let conditions = r.passed_residuals();
    let direct = acc.iter().fold(0.0f64, |a, b| a.max(*b)) < tol;
    r.value("acceleration_max", acc.iter().cloned().fold(0.0, f64::max));
    r.label("direct_integration", if direct == conditions { "agrees" } else { "disagrees" });
    Ok(r.finish_with(conditions && direct))
}
