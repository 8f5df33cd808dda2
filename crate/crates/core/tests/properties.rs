//! Randomized invariants of the local IFE spaces and the cut geometry.

use approx::assert_abs_diff_eq;
use ppife::geometry::{cut_cells, sub_areas, CutSegment, Side, Vec2};
use ppife::ife3d::{
    build_ife_basis_3d, reference_tet, regular_tet, volume, Plane3, TangentPlaneCut, Vec3,
};
use ppife::ife_space::build_ife_basis;
use proptest::prelude::*;

fn tri() -> [Vec2; 3] {
    [
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(0.0, 1.0),
    ]
}

fn area(t: &[Vec2; 3]) -> f64 {
    let (a, b) = (t[1] - t[0], t[2] - t[0]);
    0.5 * (a.x * b.y - a.y * b.x).abs()
}

/// A cut through two edges of the reference triangle, separating vertex `k`.
fn cut(k: usize, s: f64, t: f64, plus_isolated: bool) -> CutSegment {
    let v = tri();
    let (a, b) = ((k + 1) % 3, (k + 2) % 3);
    let d = v[k] + (v[a] - v[k]) * s;
    let e = v[k] + (v[b] - v[k]) * t;
    let plus = if plus_isolated { v[k] } else { v[a] };
    CutSegment::new(d, e, plus)
}

fn ratio() -> impl Strategy<Value = (f64, f64)> {
    (-5.0..5.0f64, any::<bool>()).prop_map(|(p, flip)| {
        let r = 10f64.powf(p);
        if flip {
            (1.0, r)
        } else {
            (r, 1.0)
        }
    })
}

proptest! {
    #[test]
    fn basis_2d_is_nodal_and_satisfies_jump_conditions(
        k in 0..3usize,
        s in 0.05..0.95f64,
        t in 0.05..0.95f64,
        plus_isolated in any::<bool>(),
        (bp, bm) in ratio(),
    ) {
        let tri = tri();
        let cut = cut(k, s, t, plus_isolated);
        let b = build_ife_basis(&tri, &cut, bp, bm).unwrap();
        for (i, f) in b.functions.iter().enumerate() {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(f.eval(tri[j], b.nodal_sides[j]), want, epsilon = 1e-10);
            }
            for p in [cut.d, cut.e] {
                assert_abs_diff_eq!(f.plus.eval(p), f.minus.eval(p), epsilon = 1e-10);
            }
            let scale = bp * f.plus.grad.norm() + bm * f.minus.grad.norm();
            let flux = bp * f.plus.grad.dot(&cut.normal) - bm * f.minus.grad.dot(&cut.normal);
            assert_abs_diff_eq!(flux / scale.max(1.0), 0.0, epsilon = 1e-10);
        }
        for side in [Side::Plus, Side::Minus] {
            let x = tri.iter().sum::<Vec2>() / 3.0;
            let sum: f64 = b.functions.iter().map(|f| f.eval(x, side)).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn cut_cells_partition_the_triangle(
        k in 0..3usize,
        s in 0.01..0.99f64,
        t in 0.01..0.99f64,
        plus_isolated in any::<bool>(),
    ) {
        let tri = tri();
        let cut = cut(k, s, t, plus_isolated);
        let (ap, am) = sub_areas(&tri, &cut);
        assert_abs_diff_eq!(ap + am, area(&tri), epsilon = 1e-14);
        let mut by_side = (0.0, 0.0);
        for (c, side) in cut_cells(&tri, &cut) {
            match side {
                Side::Plus => by_side.0 += area(&c),
                Side::Minus => by_side.1 += area(&c),
            }
        }
        assert_abs_diff_eq!(by_side.0, ap, epsilon = 1e-14);
        assert_abs_diff_eq!(by_side.1, am, epsilon = 1e-14);
    }

    #[test]
    fn basis_3d_is_nodal_and_satisfies_jump_conditions(
        regular in any::<bool>(),
        w in (0.1..1.0f64, 0.1..1.0f64, 0.1..1.0f64, 0.1..1.0f64),
        theta in 0.0..std::f64::consts::PI,
        phi in 0.0..std::f64::consts::TAU,
        (bp, bm) in ratio(),
    ) {
        let tet = if regular { regular_tet() } else { reference_tet() };
        let total = w.0 + w.1 + w.2 + w.3;
        let point = (tet[0] * w.0 + tet[1] * w.1 + tet[2] * w.2 + tet[3] * w.3) / total;
        let normal = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let Ok(cut) = TangentPlaneCut::from_plane(&tet, &Plane3::new(point, normal)) else {
            return Ok(());
        };
        let b = build_ife_basis_3d(&tet, &cut, bp, bm).unwrap();
        for (i, f) in b.functions.iter().enumerate() {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(f.eval(tet[j], cut.vertex_sides[j]), want, epsilon = 1e-10);
            }
            for x in [cut.anchor, cut.anchor + cut.t1, cut.anchor - 0.5 * cut.t2] {
                assert_abs_diff_eq!(f.jump(x), 0.0, epsilon = 1e-10);
            }
            let scale = bp * f.plus.grad.norm() + bm * f.minus.grad.norm();
            let flux = f.flux_jump(cut.normal, bp, bm);
            assert_abs_diff_eq!(flux / scale.max(1.0), 0.0, epsilon = 1e-10);
        }
        let (vp, vm) = cut.plane_volumes(&tet);
        assert_abs_diff_eq!(vp + vm, volume(&tet), epsilon = 1e-14);
    }
}
