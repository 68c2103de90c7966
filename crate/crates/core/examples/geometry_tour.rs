//! The spectrahedron quotient geometry on a single factor: tangent and
//! horizontal projections, the Lyapunov system and the retraction.

use trace_completion::spectrahedron::{
    horizontal_lambda, metric, project_horizontal, project_tangent, random_point, random_tangent, retract,
};

fn main() -> trace_completion::Result<()> {
    let u = random_point(8, 3, 42);
    println!("||U||_F = {:.15}", u.matrix().norm());

    let z = random_tangent(&u, 1) * 2.0 + u.matrix() * 0.5;
    let xi = project_tangent(&u, &z)?;
    println!("tr(xi^T U) after projection: {:.2e}", metric(&xi, u.matrix()));

    let sol = horizontal_lambda(&u, &xi)?;
    let (g, utxi) = (u.matrix().transpose() * u.matrix(), u.matrix().transpose() * &xi);
    let residual = &g * &sol.lambda + &sol.lambda * &g - (&utxi - utxi.transpose());
    println!("Lyapunov residual: {:.2e}", residual.norm());
    let h = project_horizontal(&u, &xi)?;
    let asym = h.transpose() * u.matrix() - u.matrix().transpose() * &h;
    println!("||xi_h^T U - U^T xi_h||: {:.2e}", asym.norm());

    for t in [1e-1, 1e-2, 1e-3] {
        let step = retract(&u, &(&h * t))?;
        let gap = (step.matrix() - (u.matrix() + &h * t)).norm();
        println!("t = {t:e}: ||R(t xi) - (U + t xi)|| = {gap:.2e}, ||R|| = {:.15}", step.matrix().norm());
    }
    Ok(())
}
