//! Force elements and their vector-Jacobian products.
//!
//! Springs and node–ground contact have hand-written adjoints (they dominate
//! the cost). The two ellipse contacts are written over [`Real`] and
//! differentiated with dual numbers.

use serde::{Deserialize, Serialize};

use super::real::{Dual, Real};
use super::Vec2;

/// Smoothed penalty contact.
///
/// Penetration `p` enters as `δ·softplus(p/δ)`; the normal force is
/// `stiffness·δ·softplus(p/δ) − damping·σ(p/δ)·v_n` and friction is
/// `−friction·f_el·tanh(v_t / slip_velocity)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactModel {
    pub stiffness: f64,
    pub damping: f64,
    pub friction: f64,
    pub smoothing: f64,
    pub slip_velocity: f64,
}

/// Below this value of `p/δ` a contact is treated as open.
pub(crate) const CONTACT_CUTOFF: f64 = -30.0;

/// Force on node `i` from a spring between `i` and `j` (node `j` gets the
/// negation).
#[allow(clippy::too_many_arguments)]
pub fn spring_force<R: Real>(xi: [R; 2], xj: [R; 2], vi: [R; 2], vj: [R; 2], rest: R, k: R, damping: f64, act: R) -> [R; 2] {
    let d = [xj[0] - xi[0], xj[1] - xi[1]];
    let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let n = [d[0] / l, d[1] / l];
    let e = l - rest * (act + 1.0);
    let vr = (vj[0] - vi[0]) * n[0] + (vj[1] - vi[1]) * n[1];
    let f = k * e + vr * damping;
    [n[0] * f, n[1] * f]
}

pub(crate) struct SpringGrad {
    pub xi: Vec2,
    pub xj: Vec2,
    pub vi: Vec2,
    pub vj: Vec2,
    pub rest: f64,
    pub k: f64,
    pub act: f64,
}

/// Adjoint of [`spring_force`] given the adjoint `g` of the force on node `i`
/// minus the adjoint of the force on node `j`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn spring_vjp(xi: Vec2, xj: Vec2, vi: Vec2, vj: Vec2, rest: f64, k: f64, damping: f64, act: f64, g: Vec2) -> SpringGrad {
    let d = [xj[0] - xi[0], xj[1] - xi[1]];
    let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let n = [d[0] / l, d[1] / l];
    let e = l - rest * (1.0 + act);
    let dv = [vj[0] - vi[0], vj[1] - vi[1]];
    let vr = dv[0] * n[0] + dv[1] * n[1];
    let f = k * e + damping * vr;

    let g_f = g[0] * n[0] + g[1] * n[1];
    let mut g_n = [f * g[0], f * g[1]];
    let g_e = g_f * k;
    let g_vr = g_f * damping;
    g_n[0] += g_vr * dv[0];
    g_n[1] += g_vr * dv[1];
    let gnn = g_n[0] * n[0] + g_n[1] * n[1];
    let g_d = [
        (g_n[0] - gnn * n[0]) / l + g_e * n[0],
        (g_n[1] - gnn * n[1]) / l + g_e * n[1],
    ];
    SpringGrad {
        xi: [-g_d[0], -g_d[1]],
        xj: g_d,
        vi: [-g_vr * n[0], -g_vr * n[1]],
        vj: [g_vr * n[0], g_vr * n[1]],
        rest: -g_e * (1.0 + act),
        k: g_f * e,
        act: -g_e * rest,
    }
}

/// Ground reaction on a node at height `x[1]` over a floor at `h`.
pub fn ground_force<R: Real>(x: [R; 2], v: [R; 2], h: f64, c: &ContactModel) -> [R; 2] {
    let z = (-x[1] + h) / c.smoothing;
    let sp = z.softplus() * c.smoothing;
    let s = z.sigmoid();
    let f_el = sp * c.stiffness;
    let fy = f_el - s * v[1] * c.damping;
    let fx = -(f_el * (v[0] / c.slip_velocity).tanh()) * c.friction;
    [fx, fy]
}

/// Adjoint of [`ground_force`]: returns `(g_x, g_v)`.
pub(crate) fn ground_vjp(x: Vec2, v: Vec2, h: f64, c: &ContactModel, g: Vec2) -> (Vec2, Vec2) {
    let z = (h - x[1]) / c.smoothing;
    let sp = z.softplus() * c.smoothing;
    let s = z.sigmoid();
    let f_el = c.stiffness * sp;
    let th = (v[0] / c.slip_velocity).tanh();

    let g_fel = g[1] - g[0] * c.friction * th;
    let g_vx = -g[0] * c.friction * f_el * (1.0 - th * th) / c.slip_velocity;
    let g_s = -g[1] * c.damping * v[1];
    let g_vy = -g[1] * c.damping * s;
    // dsp/dp = s, ds/dp = s(1-s)/δ
    let g_p = g_fel * c.stiffness * s + g_s * s * (1.0 - s) / c.smoothing;
    ([0.0, -g_p], [g_vx, g_vy])
}

/// Contact between a node and the ellipse. Returns the force on the node and
/// the torque on the ellipse; the ellipse receives the opposite force.
#[allow(clippy::too_many_arguments)]
pub fn node_ellipse_contact<R: Real>(
    x: [R; 2],
    v: [R; 2],
    center: [R; 2],
    angle: R,
    vc: [R; 2],
    omega: R,
    semi_major: f64,
    semi_minor: f64,
    c: &ContactModel,
) -> ([R; 2], R) {
    let zero = R::cst(0.0);
    let r = [x[0] - center[0], x[1] - center[1]];
    let (sn, cs) = (angle.sin(), angle.cos());
    let q = [cs * r[0] + sn * r[1], -(sn * r[0]) + cs * r[1]];
    let a2 = semi_major * semi_major;
    let b2 = semi_minor * semi_minor;
    let rho = (q[0] * q[0] / a2 + q[1] * q[1] / b2).sqrt();
    let z = (-rho + 1.0) * (semi_minor / c.smoothing);
    if z.val() < CONTACT_CUTOFF || rho.val() == 0.0 {
        return ([zero, zero], zero);
    }
    let sp = z.softplus() * c.smoothing;
    let s = z.sigmoid();

    let gl = [q[0] / a2, q[1] / b2];
    let gn = (gl[0] * gl[0] + gl[1] * gl[1]).sqrt();
    let nl = [gl[0] / gn, gl[1] / gn];
    let n = [cs * nl[0] - sn * nl[1], sn * nl[0] + cs * nl[1]];
    let t = [-n[1], n[0]];

    let vs = [vc[0] - omega * r[1], vc[1] + omega * r[0]];
    let vrel = [v[0] - vs[0], v[1] - vs[1]];
    let vn = vrel[0] * n[0] + vrel[1] * n[1];
    let vt = vrel[0] * t[0] + vrel[1] * t[1];

    let f_el = sp * c.stiffness;
    let fn_ = f_el - s * vn * c.damping;
    let ft = -(f_el * (vt / c.slip_velocity).tanh()) * c.friction;
    let f = [fn_ * n[0] + ft * t[0], fn_ * n[1] + ft * t[1]];
    // torque of -f applied at the node position
    let tau = -(r[0] * f[1] - r[1] * f[0]);
    (f, tau)
}

/// Contact between the ellipse's lowest point and the ground. Returns force
/// and torque on the ellipse.
#[allow(clippy::too_many_arguments)]
pub fn body_ground_contact<R: Real>(
    center: [R; 2],
    angle: R,
    vc: [R; 2],
    omega: R,
    semi_major: f64,
    semi_minor: f64,
    h: f64,
    c: &ContactModel,
) -> ([R; 2], R) {
    let (sn, cs) = (angle.sin(), angle.cos());
    let a2 = semi_major * semi_major;
    let b2 = semi_minor * semi_minor;
    let depth = (sn * sn * a2 + cs * cs * b2).sqrt();
    let r = [sn * cs * (b2 - a2) / depth, -depth];
    let z = (-center[1] + depth + h) / c.smoothing;
    let sp = z.softplus() * c.smoothing;
    let s = z.sigmoid();
    let vp = [vc[0] - omega * r[1], vc[1] + omega * r[0]];
    let f_el = sp * c.stiffness;
    let fy = f_el - s * vp[1] * c.damping;
    let fx = -(f_el * (vp[0] / c.slip_velocity).tanh()) * c.friction;
    let tau = r[0] * fy - r[1] * fx;
    ([fx, fy], tau)
}

pub(crate) struct EllipseContactGrad {
    pub x: Vec2,
    pub v: Vec2,
    pub center: Vec2,
    pub angle: f64,
    pub vc: Vec2,
    pub omega: f64,
}

/// Adjoint of [`node_ellipse_contact`] for output adjoints `(g_f, g_tau)`,
/// where `g_f` is the adjoint of the force on the node net of the reaction on
/// the ellipse.
#[allow(clippy::too_many_arguments)]
pub(crate) fn node_ellipse_vjp(
    x: Vec2,
    v: Vec2,
    center: Vec2,
    angle: f64,
    vc: Vec2,
    omega: f64,
    semi_major: f64,
    semi_minor: f64,
    c: &ContactModel,
    g_f: Vec2,
    g_tau: f64,
) -> Option<EllipseContactGrad> {
    // cheap open-contact test before paying for the dual evaluation
    let (f0, tau) = node_ellipse_contact(x, v, center, angle, vc, omega, semi_major, semi_minor, c);
    if f0 == [0.0, 0.0] && tau == 0.0 {
        return None;
    }
    type D = Dual<10>;
    let (f, t) = node_ellipse_contact(
        [D::var(x[0], 0), D::var(x[1], 1)],
        [D::var(v[0], 2), D::var(v[1], 3)],
        [D::var(center[0], 4), D::var(center[1], 5)],
        D::var(angle, 6),
        [D::var(vc[0], 7), D::var(vc[1], 8)],
        D::var(omega, 9),
        semi_major,
        semi_minor,
        c,
    );
    let mut g = [0.0; 10];
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = g_f[0] * f[0].d[i] + g_f[1] * f[1].d[i] + g_tau * t.d[i];
    }
    Some(EllipseContactGrad {
        x: [g[0], g[1]],
        v: [g[2], g[3]],
        center: [g[4], g[5]],
        angle: g[6],
        vc: [g[7], g[8]],
        omega: g[9],
    })
}

/// Adjoint of [`body_ground_contact`]: `(g_center, g_angle, g_vc, g_omega)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn body_ground_vjp(
    center: Vec2,
    angle: f64,
    vc: Vec2,
    omega: f64,
    semi_major: f64,
    semi_minor: f64,
    h: f64,
    c: &ContactModel,
    g_f: Vec2,
    g_tau: f64,
) -> (Vec2, f64, Vec2, f64) {
    type D = Dual<6>;
    let (f, t) = body_ground_contact(
        [D::var(center[0], 0), D::var(center[1], 1)],
        D::var(angle, 2),
        [D::var(vc[0], 3), D::var(vc[1], 4)],
        D::var(omega, 5),
        semi_major,
        semi_minor,
        h,
        c,
    );
    let mut g = [0.0; 6];
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = g_f[0] * f[0].d[i] + g_f[1] * f[1].d[i] + g_tau * t.d[i];
    }
    ([g[0], g[1]], g[2], [g[3], g[4]], g[5])
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: ContactModel = ContactModel { stiffness: 2e4, damping: 50.0, friction: 0.6, smoothing: 5e-3, slip_velocity: 0.15 };

    #[test]
    fn hooke_law_at_twice_rest_length() {
        let k = 300.0;
        let r = 0.5;
        let f = spring_force([0.0, 0.0], [2.0 * r, 0.0], [0.0; 2], [0.0; 2], r, k, 0.0, 0.0);
        assert!((f[0] - k * r).abs() < 1e-12);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn spring_vjp_matches_dual() {
        type D = Dual<11>;
        let (xi, xj, vi, vj) = ([0.1, 0.2], [0.9, -0.3], [0.5, -1.0], [-0.2, 0.7]);
        let (rest, k, damp, act) = (0.8, 1500.0, 12.0, 0.13);
        let g = [0.7, -1.3];
        let f = spring_force(
            [D::var(xi[0], 0), D::var(xi[1], 1)],
            [D::var(xj[0], 2), D::var(xj[1], 3)],
            [D::var(vi[0], 4), D::var(vi[1], 5)],
            [D::var(vj[0], 6), D::var(vj[1], 7)],
            D::var(rest, 8),
            D::var(k, 9),
            damp,
            D::var(act, 10),
        );
        let want: Vec<f64> = (0..11).map(|i| g[0] * f[0].d[i] + g[1] * f[1].d[i]).collect();
        let got = spring_vjp(xi, xj, vi, vj, rest, k, damp, act, g);
        let flat = [
            got.xi[0], got.xi[1], got.xj[0], got.xj[1], got.vi[0], got.vi[1], got.vj[0], got.vj[1], got.rest, got.k, got.act,
        ];
        for (a, b) in flat.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn ground_vjp_matches_dual() {
        type D = Dual<4>;
        for &(y, vy) in &[(0.001, -0.3), (-0.004, 0.2), (0.05, 0.0)] {
            let (x, v) = ([0.3, y], [0.08, vy]);
            let g = [1.1, -0.4];
            let f = ground_force([D::var(x[0], 0), D::var(x[1], 1)], [D::var(v[0], 2), D::var(v[1], 3)], 0.0, &C);
            let (gx, gv) = ground_vjp(x, v, 0.0, &C, g);
            let got = [gx[0], gx[1], gv[0], gv[1]];
            for i in 0..4 {
                let want = g[0] * f[0].d[i] + g[1] * f[1].d[i];
                assert!((got[i] - want).abs() <= 1e-9 * (1.0 + want.abs()), "{i}: {} vs {want}", got[i]);
            }
        }
    }

    #[test]
    fn ellipse_contact_pushes_outward() {
        // node just inside the right tip of an axis-aligned ellipse
        let (f, tau) = node_ellipse_contact([0.99, 0.0], [0.0; 2], [0.0; 2], 0.0, [0.0; 2], 0.0, 1.0, 0.5, &C);
        assert!(f[0] > 0.0);
        assert!(f[1].abs() < 1e-9);
        assert!(tau.abs() < 1e-9);
        let (f, _) = node_ellipse_contact([3.0, 0.0], [0.0; 2], [0.0; 2], 0.0, [0.0; 2], 0.0, 1.0, 0.5, &C);
        assert_eq!(f, [0.0, 0.0]);
    }

    #[test]
    fn ellipse_ground_support_point() {
        let depth = crate::sim::RigidEllipse::support_depth(1.0, 0.5, 0.3);
        let (f, _) = body_ground_contact([0.0, depth], 0.3, [0.0; 2], 0.0, 1.0, 0.5, 0.0, &C);
        // touching: softplus(0) · δ · k
        assert!((f[1] - C.stiffness * C.smoothing * 2f64.ln()).abs() < 1e-9);
    }
}
