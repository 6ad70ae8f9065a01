#include "uavcast/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "uavcast/csv.hpp"

namespace uavcast::convex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_entry(const Vector& g) { return g.size() == 0 ? -kInf : g.maxCoeff(); }

bool all_finite(const Vector& v) { return v.allFinite(); }

double eq_residual(const SmoothConvexProgram& prog, const Vector& x) {
  if (prog.num_equalities() == 0) return 0.0;
  return (prog.eq_matrix() * x - prog.eq_rhs()).lpNorm<Eigen::Infinity>();
}

// Factorization of A A^T, shared by the projection and the dual estimate.
class NormalEquations {
 public:
  explicit NormalEquations(const SparseMatrix& a) : a_(a) {
    SparseMatrix aat = a * SparseMatrix(a.transpose());
    double scale = 0.0;
    for (int i = 0; i < aat.rows(); ++i) scale = std::max(scale, aat.coeff(i, i));
    ldlt_.compute(aat);
    if (ldlt_.info() != Eigen::Success) {
      SparseMatrix reg(aat.rows(), aat.cols());
      reg.setIdentity();
      ldlt_.compute(aat + 1e-12 * std::max(scale, 1.0) * reg);
    }
  }
  Vector solve(const Vector& rhs) const { return ldlt_.solve(rhs); }

 private:
  const SparseMatrix& a_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

// Minimum-norm correction onto A x = b.
Vector project_onto_equalities(const SmoothConvexProgram& prog, const Vector& x) {
  if (prog.num_equalities() == 0) return x;
  const SparseMatrix& a = prog.eq_matrix();
  NormalEquations ne(a);
  Vector y = x;
  for (int pass = 0; pass < 3; ++pass) {
    const Vector r = a * y - prog.eq_rhs();
    if (r.lpNorm<Eigen::Infinity>() == 0.0) break;
    y -= a.transpose() * ne.solve(r);
  }
  return y;
}

// Solves [H A^T; A 0] [dx; w] = [-grad; -r] after symmetric diagonal scaling
// of H. Escalating diagonal regularization is used when H is not numerically
// positive definite.
bool dense_direction(const Matrix& h, const Vector& grad, const SparseMatrix& a_sparse, const Vector& r, Vector& dx,
                     Vector& w) {
  const Eigen::Index n = h.rows();
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hii = h(i, i);
    d(i) = hii > 0.0 && std::isfinite(hii) ? 1.0 / std::sqrt(hii) : 1.0;
  }
  const Matrix hs = d.asDiagonal() * h * d.asDiagonal();
  const Vector gs = d.cwiseProduct(grad);

  Eigen::LLT<Matrix> llt;
  double reg = 0.0;
  for (int attempt = 0;; ++attempt) {
    if (reg > 0.0) {
      Matrix hr = hs;
      hr.diagonal().array() += reg;
      llt.compute(hr);
    } else {
      llt.compute(hs);
    }
    if (llt.info() == Eigen::Success) break;
    if (attempt == 11) return false;
    reg = reg == 0.0 ? 1e-14 : reg * 100.0;
  }

  if (a_sparse.rows() == 0) {
    dx = -d.cwiseProduct(llt.solve(gs));
    w.resize(0);
  } else {
    const Matrix as = Matrix(a_sparse) * d.asDiagonal();
    const Matrix y = llt.solve(as.transpose());
    const Matrix s = as * y;
    const Vector hg = llt.solve(gs);
    w = s.ldlt().solve(r - as * hg);
    dx = -d.cwiseProduct(hg + y * w);
  }
  return dx.allFinite();
}

// Same system with H = S + sum_r c_r z_r z_r^T, S sparse. The rank-one terms
// are bordered in as extra rows y_r = sqrt(c_r) z_r^T dx, which keeps the
// KKT matrix sparse and quasi-definite. After equilibration it is factored by
// LDL^T with a small primal/dual regularization that iterative refinement
// against the exact matrix removes.
bool sparse_direction(int n, const HessianTerms& terms, const Vector& grad, const SparseMatrix& a, const Vector& r,
                      Vector& dx, Vector& w) {
  const int p = static_cast<int>(a.rows());
  std::vector<Eigen::Triplet<double>> trip = terms.entries;
  int extra = 0;
  for (const auto& [c, z] : terms.rank_one) {
    if (!(c > 0.0)) continue;
    const double sc = std::sqrt(c);
    const int row = n + p + extra;
    for (int j = 0; j < n; ++j) {
      if (z(j) != 0.0) {
        trip.emplace_back(j, row, sc * z(j));
        trip.emplace_back(row, j, sc * z(j));
      }
    }
    trip.emplace_back(row, row, -1.0);
    ++extra;
  }
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      trip.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      trip.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
    }
  }
  const int size = n + p + extra;
  // Explicit zero diagonal so the regularization has a slot to go into.
  for (int i = 0; i < size; ++i) trip.emplace_back(i, i, 0.0);
  SparseMatrix kkt(size, size);
  kkt.setFromTriplets(trip.begin(), trip.end());

  Vector scale = Vector::Zero(size);
  for (int k = 0; k < kkt.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(kkt, k); it; ++it) {
      scale(it.row()) = std::max(scale(it.row()), std::abs(it.value()));
    }
  }
  for (int i = 0; i < size; ++i) scale(i) = scale(i) > 0.0 ? 1.0 / std::sqrt(scale(i)) : 1.0;
  kkt = scale.asDiagonal() * kkt * scale.asDiagonal();

  Vector rhs = Vector::Zero(size);
  rhs.head(n) = -grad;
  if (p > 0) rhs.segment(n, p) = -r;
  rhs = scale.cwiseProduct(rhs);

  Vector signs = Vector::Constant(size, -1.0);
  signs.head(n).setOnes();
  // Regularization too small makes the unpivoted factorization unstable; too
  // large and refinement stops converging.
  auto refine = [&](const auto& solver, Vector& sol) {
    for (int it = 0; it < 30 && sol.allFinite(); ++it) {
      const Vector res = rhs - kkt * sol;
      if (res.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1e-300, rhs.lpNorm<Eigen::Infinity>())) return true;
      sol += solver.solve(res);
    }
    return sol.allFinite() && (rhs - kkt * sol).lpNorm<Eigen::Infinity>() <=
                                  1e-9 * std::max(1e-300, rhs.lpNorm<Eigen::Infinity>());
  };
  auto finish = [&](Vector sol) {
    sol = scale.cwiseProduct(sol);
    dx = sol.head(n);
    w = sol.segment(n, p);
    return true;
  };

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  for (double delta : {1e-8, 1e-9, 1e-7, 1e-10}) {
    SparseMatrix reg = kkt;
    for (int i = 0; i < size; ++i) reg.coeffRef(i, i) += delta * signs(i);
    ldlt.compute(reg);
    if (ldlt.info() != Eigen::Success) continue;
    Vector sol = ldlt.solve(rhs);
    if (refine(ldlt, sol)) return finish(std::move(sol));
  }
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success) return false;
  Vector sol = lu.solve(rhs);
  if (!refine(lu, sol)) return false;
  return finish(std::move(sol));
}

// Newton system assembled from the program at x: the Hessian uses weights
// (hw, hu), the right-hand side gradient is `grad`.
bool newton_direction(const SmoothConvexProgram& prog, const Vector& x, double obj_scale, const Vector& grad,
                      const Vector& hw, const Vector& hu, const Vector& r, Vector& dx, Vector& w) {
  const int n = prog.dimension();
  Vector scratch = Vector::Zero(n);
  if (prog.has_sparse_hessian()) {
    HessianTerms terms;
    prog.objective_hessian_sparse(x, obj_scale, terms);
    prog.accumulate_constraints_sparse(x, hw, hu, scratch, terms);
    return sparse_direction(n, terms, grad, prog.eq_matrix(), r, dx, w);
  }
  Matrix hess(n, n);
  prog.objective_derivatives(x, scratch, &hess);
  hess *= obj_scale;
  scratch.setZero();
  prog.accumulate_constraints(x, hw, &hu, scratch, &hess);
  return dense_direction(hess, grad, prog.eq_matrix(), r, dx, w);
}

enum class Verdict { proceed, stop_feasible, stop_infeasible };

struct BarrierOutcome {
  Vector x;
  double t = 1.0;
  int newton_iterations = 0;
  int stages = 0;
  bool centering_failed = false;
  bool hit_iteration_limit = false;
  Verdict verdict = Verdict::proceed;
  std::vector<double> stage_objectives;
  std::vector<TraceRow> trace;
  Vector lambda;  // primal-dual only
  Vector nu;
  bool converged = false;
};

using EarlyStop = std::function<Verdict(const Vector& x, double t, bool centered)>;

// Barrier term -sum log(-g_i); +inf outside the strict interior.
double log_barrier(const Vector& g) {
  double phi = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!(g(i) < 0.0)) return kInf;
    phi -= std::log(-g(i));
  }
  return phi;
}

BarrierOutcome run_barrier(const SmoothConvexProgram& prog, Vector x, const Tolerances& tol,
                           const EarlyStop& early_stop) {
  const int n = prog.dimension();
  const int m = prog.num_inequalities();
  const SparseMatrix& a = prog.eq_matrix();
  const int p = prog.num_equalities();

  BarrierOutcome out;
  double t = tol.t0;
  Vector g(m), grad(n), dx(n), w, gnew(m), weights(m), weights_sq(m);

  for (int stage = 0; stage < tol.max_stages; ++stage) {
    ++out.stages;
    for (int it = 0;; ++it) {
      if (it >= tol.max_newton_per_stage) {
        out.hit_iteration_limit = true;
        break;
      }
      prog.constraint_values(x, g);
      for (int i = 0; i < m; ++i) {
        weights(i) = -1.0 / g(i);
        weights_sq(i) = weights(i) * weights(i);
      }
      const Vector r = p > 0 ? Vector(a * x - prog.eq_rhs()) : Vector();
      prog.objective_derivatives(x, grad, nullptr);
      grad *= t;
      prog.accumulate_constraints(x, weights, nullptr, grad, nullptr);
      const bool ok = newton_direction(prog, x, t, grad, weights, weights_sq, r, dx, w);
      if (!ok) {
        out.centering_failed = true;
        break;
      }
      const double slope = grad.dot(dx);
      const double decrement = -0.5 * slope;
      const double f0 = prog.objective(x);
      if (tol.record_trace) out.trace.push_back({stage, out.newton_iterations, f0, decrement});
      if (!(decrement > tol.newton)) break;

      // Backtracking on t f + phi. The comparison is done on differences so
      // large t does not swamp the decrease in roundoff.
      const double phi0 = log_barrier(g);
      const double scale = std::abs(t * f0) + std::abs(phi0) + 1.0;
      double step = 1.0;
      bool accepted = false;
      Vector xn(n);
      for (int ls = 0; ls < 80; ++ls) {
        xn = x + step * dx;
        prog.constraint_values(xn, gnew);
        if (all_finite(gnew) && max_entry(gnew) < 0.0) {
          double dphi = 0.0;
          for (int i = 0; i < m; ++i) dphi -= std::log(gnew(i) / g(i));
          const double df = t * (prog.objective(xn) - f0) + dphi;
          if (df <= tol.ls_alpha * step * slope + 1e-13 * scale) {
            accepted = true;
            break;
          }
        }
        step *= tol.ls_beta;
      }
      ++out.newton_iterations;
      if (!accepted) {
        out.centering_failed = true;
        break;
      }
      x = xn;
      if (early_stop) {
        const Verdict v = early_stop(x, t, false);
        if (v != Verdict::proceed) {
          out.verdict = v;
          out.x = x;
          out.t = t;
          return out;
        }
      }
    }
    out.stage_objectives.push_back(prog.objective(x));
    if (early_stop) {
      const Verdict v = early_stop(x, t, true);
      if (v != Verdict::proceed) {
        out.verdict = v;
        break;
      }
    }
    if (out.centering_failed || out.hit_iteration_limit) break;
    if (m == 0 || static_cast<double>(m) / t <= tol.gap) break;
    t *= tol.barrier_factor;
  }
  out.x = x;
  out.t = t;
  return out;
}

// Primal-dual interior-point iterations on the perturbed KKT conditions
// r_dual = grad f + Dg^T lambda + A^T nu, r_cent = -lambda o g - 1/t,
// r_pri = A x - b, with t = mu m / eta for the surrogate gap
// eta = -g^T lambda. Steps keep lambda > 0 and g < 0 and must decrease the
// residual norm.
BarrierOutcome run_primal_dual(const SmoothConvexProgram& prog, Vector x, const Tolerances& tol,
                               const EarlyStop& early_stop) {
  const int n = prog.dimension();
  const int m = prog.num_inequalities();
  const int p = prog.num_equalities();
  const SparseMatrix& a = prog.eq_matrix();

  BarrierOutcome out;
  Vector g(m);
  prog.constraint_values(x, g);
  Vector lambda(m);
  for (int i = 0; i < m; ++i) lambda(i) = 1.0 / (tol.t0 * -g(i));
  Vector nu = Vector::Zero(p);

  auto dual_residual = [&](const Vector& xv, const Vector& lam, const Vector& nuv) {
    Vector rd(n);
    prog.objective_derivatives(xv, rd, nullptr);
    prog.accumulate_constraints(xv, lam, nullptr, rd, nullptr);
    if (p > 0) rd += a.transpose() * nuv;
    return rd;
  };
  auto residual_norm = [&](const Vector& rd, const Vector& gv, const Vector& lam, const Vector& rp, double t) {
    double sq = rd.squaredNorm() + rp.squaredNorm();
    for (int i = 0; i < m; ++i) {
      const double rc = -lam(i) * gv(i) - 1.0 / t;
      sq += rc * rc;
    }
    return std::sqrt(sq);
  };

  Vector grad(n), dx(n), nu_next, jd(m), dlam(m), hu(m), gnew(m), xn(n), lam_n(m), nu_n(p);
  double t = tol.t0;
  double last_step = 1.0;
  for (int it = 0;; ++it) {
    const double eta = m > 0 ? -g.dot(lambda) : 0.0;
    const Vector rd = dual_residual(x, lambda, nu);
    const Vector rp = p > 0 ? Vector(a * x - prog.eq_rhs()) : Vector();
    const double rd_inf = rd.lpNorm<Eigen::Infinity>();
    const double rp_inf = p > 0 ? rp.lpNorm<Eigen::Infinity>() : 0.0;
    // After a short step, or while the dual residual lags the gap, aim at the
    // current central point before pushing t.
    const bool lagging = rd_inf > std::max(tol.feasibility, eta);
    const double factor = last_step < 0.1 || lagging ? 1.0 : tol.barrier_factor;
    t = m > 0 ? factor * m / eta : 1.0;
    if (tol.record_trace) out.trace.push_back({0, out.newton_iterations, prog.objective(x), eta});

    if (early_stop && it > 0) {
      const bool certified = rd_inf <= tol.feasibility && rp_inf <= tol.equality;
      const Verdict v = early_stop(x, m > 0 ? m / eta : kInf, certified);
      if (v != Verdict::proceed) {
        out.verdict = v;
        break;
      }
    }
    if (rd_inf <= tol.feasibility && rp_inf <= tol.equality && eta <= tol.gap) {
      out.converged = true;
      break;
    }
    if (it >= tol.max_iterations) {
      out.hit_iteration_limit = true;
      break;
    }

    prog.objective_derivatives(x, grad, nullptr);
    Vector w_grad(m);
    for (int i = 0; i < m; ++i) {
      w_grad(i) = 1.0 / (t * -g(i));
      hu(i) = lambda(i) / -g(i);
    }
    prog.accumulate_constraints(x, w_grad, nullptr, grad, nullptr);
    if (!newton_direction(prog, x, 1.0, grad, lambda, hu, rp, dx, nu_next)) {
      out.centering_failed = true;
      break;
    }
    const Vector dnu = p > 0 ? Vector(nu_next - nu) : Vector();
    prog.constraint_directional(x, dx, jd);
    double step = 1.0;
    for (int i = 0; i < m; ++i) {
      dlam(i) = -lambda(i) + (1.0 / t + lambda(i) * jd(i)) / -g(i);
      if (dlam(i) < 0.0) step = std::min(step, -lambda(i) / dlam(i));
    }
    step *= 0.99;

    const double r0 = residual_norm(rd, g, lambda, rp, t);
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      xn = x + step * dx;
      prog.constraint_values(xn, gnew);
      if (all_finite(gnew) && max_entry(gnew) < 0.0) {
        lam_n = lambda + step * dlam;
        if (p > 0) nu_n = nu + step * dnu;
        const Vector rpn = p > 0 ? Vector(a * xn - prog.eq_rhs()) : Vector();
        const double r1 = residual_norm(dual_residual(xn, lam_n, nu_n), gnew, lam_n, rpn, t);
        if (r1 <= (1.0 - tol.ls_alpha * step) * r0) {
          accepted = true;
          break;
        }
      }
      step *= tol.ls_beta;
    }
    ++out.newton_iterations;
    if (!accepted) {
      out.centering_failed = true;
      break;
    }
    last_step = step;
    x = xn;
    g = gnew;
    lambda = lam_n;
    if (p > 0) nu = nu_n;
  }
  out.x = x;
  out.t = m > 0 ? m / -g.dot(lambda) : kInf;
  out.lambda = lambda;
  out.nu = nu;
  return out;
}

BarrierOutcome run_path(const SmoothConvexProgram& prog, const Vector& x, const Tolerances& tol,
                        const EarlyStop& early_stop) {
  return tol.method == Method::primal_dual ? run_primal_dual(prog, x, tol, early_stop)
                                           : run_barrier(prog, x, tol, early_stop);
}

// Phase-one problem: minimize s over (x, s) subject to g_i(x) <= s and
// s >= -1 (constraints are expected to be normalized to unit scale).
class PhaseOneProgram : public SmoothConvexProgram {
 public:
  explicit PhaseOneProgram(const SmoothConvexProgram& inner) : inner_(inner), n_(inner.dimension()) {
    if (inner.num_equalities() > 0) {
      SparseMatrix a = inner.eq_matrix();
      a.conservativeResize(a.rows(), n_ + 1);
      set_equalities(std::move(a), inner.eq_rhs());
    }
  }

  int dimension() const override { return n_ + 1; }
  int num_inequalities() const override { return inner_.num_inequalities() + 1; }
  double objective(const Vector& x) const override { return x(n_); }
  void objective_derivatives(const Vector&, Vector& grad, Matrix* hess) const override {
    grad = Vector::Zero(n_ + 1);
    grad(n_) = 1.0;
    if (hess) hess->setZero(n_ + 1, n_ + 1);
  }
  void constraint_values(const Vector& x, Vector& g) const override {
    const int m = inner_.num_inequalities();
    Vector gi(m);
    inner_.constraint_values(x.head(n_), gi);
    g.resize(m + 1);
    g.head(m) = gi.array() - x(n_);
    g(m) = -x(n_) - 1.0;
  }
  void accumulate_constraints(const Vector& x, const Vector& w, const Vector* u, Vector& grad,
                              Matrix* hess) const override {
    const int m = inner_.num_inequalities();
    const Vector xi = x.head(n_);
    const Vector wi = w.head(m);
    Vector gx = grad.head(n_);
    if (hess) {
      const Vector ui = u->head(m);
      Matrix hxx = hess->topLeftCorner(n_, n_);
      inner_.accumulate_constraints(xi, wi, &ui, gx, &hxx);
      hess->topLeftCorner(n_, n_) = hxx;
      Vector cross = Vector::Zero(n_);
      inner_.accumulate_constraints(xi, ui, nullptr, cross, nullptr);
      hess->col(n_).head(n_) -= cross;
      hess->row(n_).head(n_) -= cross.transpose();
      (*hess)(n_, n_) += ui.sum() + (*u)(m);
    } else {
      inner_.accumulate_constraints(xi, wi, nullptr, gx, nullptr);
    }
    grad.head(n_) = gx;
    grad(n_) -= wi.sum() + w(m);
  }

  void constraint_directional(const Vector& x, const Vector& d, Vector& out) const override {
    const int m = inner_.num_inequalities();
    Vector inner_out(m);
    inner_.constraint_directional(x.head(n_), d.head(n_), inner_out);
    out.resize(m + 1);
    out.head(m) = inner_out.array() - d(n_);
    out(m) = -d(n_);
  }

  bool has_sparse_hessian() const override { return inner_.has_sparse_hessian(); }
  void objective_hessian_sparse(const Vector&, double, HessianTerms&) const override {}
  void accumulate_constraints_sparse(const Vector& x, const Vector& w, const Vector& u, Vector& grad,
                                     HessianTerms& terms) const override {
    const int m = inner_.num_inequalities();
    const Vector xi = x.head(n_);
    const Vector wi = w.head(m);
    const Vector ui = u.head(m);
    Vector gx = grad.head(n_);
    const std::size_t first_rank_one = terms.rank_one.size();
    inner_.accumulate_constraints_sparse(xi, wi, ui, gx, terms);
    for (std::size_t r = first_rank_one; r < terms.rank_one.size(); ++r) {
      Vector& z = terms.rank_one[r].second;
      z.conservativeResize(n_ + 1);
      z(n_) = 0.0;
    }
    Vector cross = Vector::Zero(n_);
    inner_.accumulate_constraints(xi, ui, nullptr, cross, nullptr);
    for (int j = 0; j < n_; ++j) {
      if (cross(j) != 0.0) {
        terms.add(j, n_, -cross(j));
        terms.add(n_, j, -cross(j));
      }
    }
    terms.add(n_, n_, ui.sum() + u(m));
    grad.head(n_) = gx;
    grad(n_) -= wi.sum() + w(m);
  }

 private:
  const SmoothConvexProgram& inner_;
  int n_;
};

}  // namespace

// ---------------------------------------------------------------------------

void SmoothConvexProgram::accumulate_constraints_sparse(const Vector& x, const Vector& w, const Vector& u,
                                                        Vector& grad, HessianTerms& terms) const {
  Matrix h = Matrix::Zero(dimension(), dimension());
  accumulate_constraints(x, w, &u, grad, &h);
  for (int j = 0; j < h.cols(); ++j) {
    for (int i = 0; i < h.rows(); ++i) {
      if (h(i, j) != 0.0) terms.add(i, j, h(i, j));
    }
  }
}

void SmoothConvexProgram::objective_hessian_sparse(const Vector& x, double scale, HessianTerms& terms) const {
  Vector grad(dimension());
  Matrix h(dimension(), dimension());
  objective_derivatives(x, grad, &h);
  for (int j = 0; j < h.cols(); ++j) {
    for (int i = 0; i < h.rows(); ++i) {
      if (h(i, j) != 0.0) terms.add(i, j, scale * h(i, j));
    }
  }
}

Vector SmoothConvexProgram::constraint_gradient(const Vector& x, int i) const {
  Vector w = Vector::Zero(num_inequalities());
  w(i) = 1.0;
  Vector grad = Vector::Zero(dimension());
  accumulate_constraints(x, w, nullptr, grad, nullptr);
  return grad;
}

void SmoothConvexProgram::constraint_directional(const Vector& x, const Vector& d, Vector& out) const {
  out.resize(num_inequalities());
  for (int i = 0; i < num_inequalities(); ++i) out(i) = constraint_gradient(x, i).dot(d);
}

void ExplicitProgram::objective_derivatives(const Vector& x, Vector& grad, Matrix* hess) const {
  grad = objective_.gradient(x);
  if (hess) *hess = objective_.hessian(x);
}

void ExplicitProgram::constraint_values(const Vector& x, Vector& g) const {
  g.resize(num_inequalities());
  for (int i = 0; i < num_inequalities(); ++i) {
    const double v = constraints_[i].value(x);
    g(i) = std::isnan(v) ? kInf : v;
  }
}

void ExplicitProgram::accumulate_constraints(const Vector& x, const Vector& w, const Vector* u, Vector& grad,
                                             Matrix* hess) const {
  for (int i = 0; i < num_inequalities(); ++i) {
    if (w(i) == 0.0 && (!hess || (*u)(i) == 0.0)) continue;
    const Vector gi = constraints_[i].gradient(x);
    grad += w(i) * gi;
    if (hess) {
      *hess += w(i) * constraints_[i].hessian(x);
      *hess += (*u)(i) * gi * gi.transpose();
    }
  }
}

Vector ExplicitProgram::constraint_gradient(const Vector& x, int i) const { return constraints_[i].gradient(x); }

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::max_iter:
      return "max_iter";
    case SolveStatus::inaccurate:
      return "inaccurate";
  }
  return "unknown";
}

PhaseOneResult phase_one(const SmoothConvexProgram& program, const Vector& hint, const Tolerances& tol) {
  PhaseOneResult result;
  const int m = program.num_inequalities();
  Vector g(m);
  program.constraint_values(hint, g);
  if (eq_residual(program, hint) <= tol.equality && all_finite(g) && max_entry(g) < 0.0) {
    result.feasible = true;
    result.x = hint;
    result.max_violation = max_entry(g);
    return result;
  }

  const Vector x0 = project_onto_equalities(program, hint);
  result.x = x0;
  if (eq_residual(program, x0) > std::max(tol.equality, 1e-9)) return result;  // A x = b inconsistent
  program.constraint_values(x0, g);
  result.max_violation = max_entry(g);
  if (!all_finite(g)) return result;  // hint outside the constraint domain
  if (max_entry(g) < 0.0) {
    result.feasible = true;
    return result;
  }

  PhaseOneProgram aux(program);
  Vector z(program.dimension() + 1);
  z.head(program.dimension()) = x0;
  z(program.dimension()) = max_entry(g) + 1.0;

  const int n = program.dimension();
  const int m_aux = m + 1;
  const EarlyStop stop = [n, m_aux](const Vector& xs, double t, bool centered) {
    const double s = xs(n);
    if (s <= -1e-4) return Verdict::stop_feasible;
    if (centered && s < 0.0) return Verdict::stop_feasible;
    // s - s* <= m / t on the central path, so s* > 0 certifies infeasibility.
    if (centered && s - static_cast<double>(m_aux) / t > 0.0) return Verdict::stop_infeasible;
    return Verdict::proceed;
  };
  Tolerances aux_tol = tol;
  aux_tol.record_trace = false;
  const BarrierOutcome run = run_path(aux, z, aux_tol, stop);
  result.newton_iterations = run.newton_iterations;
  result.x = run.x.head(n);
  program.constraint_values(result.x, g);
  result.max_violation = max_entry(g);
  result.feasible = all_finite(g) && max_entry(g) < 0.0;
  return result;
}

SolveReport solve(const SmoothConvexProgram& program, const Vector& start, const Tolerances& tol) {
  SolveReport report;
  const int m = program.num_inequalities();
  const int n = program.dimension();

  const PhaseOneResult ph = phase_one(program, start, tol);
  report.phase_one_iterations = ph.newton_iterations;
  report.newton_iterations = ph.newton_iterations;
  if (!ph.feasible) {
    report.x = ph.x;
    report.status = SolveStatus::infeasible;
    report.objective = program.objective(ph.x);
    report.max_violation = ph.max_violation;
    report.eq_residual = eq_residual(program, ph.x);
    return report;
  }

  BarrierOutcome run = run_path(program, ph.x, tol, nullptr);
  report.x = run.x;
  report.newton_iterations += run.newton_iterations;
  report.barrier_stages = run.stages;
  report.stage_objectives = std::move(run.stage_objectives);
  report.trace = std::move(run.trace);
  report.objective = program.objective(run.x);

  Vector g(m);
  program.constraint_values(run.x, g);
  report.max_violation = max_entry(g);
  report.eq_residual = eq_residual(program, run.x);

  Vector stationarity(n);
  program.objective_derivatives(run.x, stationarity, nullptr);
  double complementarity = 0.0;
  if (tol.method == Method::primal_dual) {
    report.inequality_duals = run.lambda;
    program.accumulate_constraints(run.x, report.inequality_duals, nullptr, stationarity, nullptr);
    if (program.num_equalities() > 0) {
      report.equality_duals = run.nu;
      stationarity += program.eq_matrix().transpose() * report.equality_duals;
    }
    for (int i = 0; i < m; ++i) complementarity = std::max(complementarity, run.lambda(i) * -g(i));
  } else {
    // Central-path duals 1 / (t |g_i|), corrected by one more Newton step so
    // that roundoff in nearly active g_i does not dominate the estimate.
    report.inequality_duals.resize(m);
    Vector w(m), w_sq(m);
    for (int i = 0; i < m; ++i) {
      w(i) = 1.0 / -g(i);
      w_sq(i) = w(i) * w(i);
      report.inequality_duals(i) = w(i) / run.t;
    }
    Vector grad(n), dx(n), nu;
    program.objective_derivatives(run.x, grad, nullptr);
    grad *= run.t;
    program.accumulate_constraints(run.x, w, nullptr, grad, nullptr);
    const Vector r = program.num_equalities() > 0 ? Vector(program.eq_matrix() * run.x - program.eq_rhs()) : Vector();
    if (m > 0 && newton_direction(program, run.x, run.t, grad, w, w_sq, r, dx, nu)) {
      Vector jd(m);
      program.constraint_directional(run.x, dx, jd);
      for (int i = 0; i < m; ++i) {
        report.inequality_duals(i) = std::max(0.0, w(i) * (1.0 + jd(i) * w(i)) / run.t);
      }
    }
    program.accumulate_constraints(run.x, report.inequality_duals, nullptr, stationarity, nullptr);
    if (program.num_equalities() > 0) {
      const SparseMatrix& a = program.eq_matrix();
      NormalEquations ne(a);
      report.equality_duals = ne.solve(-(a * stationarity));
      stationarity += a.transpose() * report.equality_duals;
    }
    for (int i = 0; i < m; ++i) complementarity = std::max(complementarity, report.inequality_duals(i) * -g(i));
  }
  report.kkt_residual = std::max(stationarity.lpNorm<Eigen::Infinity>(), complementarity);

  const bool gap_closed = m == 0 || static_cast<double>(m) / run.t <= tol.gap;
  if (run.hit_iteration_limit || (!gap_closed && !run.centering_failed)) {
    report.status = SolveStatus::max_iter;
  } else if (report.kkt_residual <= tol.kkt && report.eq_residual <= tol.equality && gap_closed) {
    report.status = SolveStatus::optimal;
  } else {
    report.status = SolveStatus::inaccurate;
  }
  return report;
}

double check_gradients(const SmoothConvexProgram& program, const Vector& x, double h) {
  const int n = program.dimension();
  const int m = program.num_inequalities();
  auto rel = [](const Vector& analytic, const Vector& numeric) {
    const double an = analytic.lpNorm<Eigen::Infinity>();
    const double diff = (analytic - numeric).lpNorm<Eigen::Infinity>();
    return diff / std::max(an, 1.0);
  };

  Vector grad(n);
  program.objective_derivatives(x, grad, nullptr);
  Vector fd(n);
  Matrix jac_fd(m, n);
  Vector gp(m), gm(m);
  Vector xp = x, xm = x;
  for (int j = 0; j < n; ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    fd(j) = (program.objective(xp) - program.objective(xm)) / (2.0 * h);
    program.constraint_values(xp, gp);
    program.constraint_values(xm, gm);
    jac_fd.col(j) = (gp - gm) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  double worst = rel(grad, fd);
  for (int i = 0; i < m; ++i) {
    worst = std::max(worst, rel(program.constraint_gradient(x, i), jac_fd.row(i).transpose()));
  }
  return worst;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  CsvWriter csv(os);
  csv.row("stage", "newton_iter", "objective", "residual");
  for (const auto& r : trace) csv.row(r.stage, r.newton_iter, r.objective, r.residual);
}

}  // namespace uavcast::convex
