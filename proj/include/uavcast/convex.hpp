#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace uavcast::convex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Hessian contribution in structured form: sparse entries (duplicates are
/// summed) plus weighted outer products sum_r c_r z_r z_r^T with c_r >= 0.
struct HessianTerms {
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<std::pair<double, Vector>> rank_one;

  void add(int i, int j, double v) { entries.emplace_back(i, j, v); }
};

/// minimize f(x) subject to g_i(x) <= 0 (i = 0..m-1) and A x = b, with f and
/// every g_i convex and twice differentiable on the strictly feasible region.
///
/// Constraint derivatives are exposed in aggregated form so that programs
/// with structured Hessians never materialize per-constraint matrices.
/// Implementations must be reentrant: all callbacks are const and may be
/// invoked concurrently on distinct inputs.
class SmoothConvexProgram {
 public:
  virtual ~SmoothConvexProgram() = default;

  virtual int dimension() const = 0;
  virtual int num_inequalities() const = 0;

  virtual double objective(const Vector& x) const = 0;
  /// Overwrites grad; overwrites *hess when non-null.
  virtual void objective_derivatives(const Vector& x, Vector& grad, Matrix* hess) const = 0;

  /// g_i(x) for every i. Points outside the domain of any g_i must report
  /// +infinity for it.
  virtual void constraint_values(const Vector& x, Vector& g) const = 0;

  /// grad += sum_i w_i grad g_i. When hess is non-null,
  /// hess += sum_i (w_i hess g_i + u_i grad g_i grad g_i^T); u may be null
  /// only when hess is null.
  virtual void accumulate_constraints(const Vector& x, const Vector& w, const Vector* u, Vector& grad,
                                      Matrix* hess) const = 0;

  /// Gradient of one constraint. The default goes through
  /// accumulate_constraints with a unit weight.
  virtual Vector constraint_gradient(const Vector& x, int i) const;

  /// out_i = grad g_i(x)^T d for every i. The default loops over
  /// constraint_gradient.
  virtual void constraint_directional(const Vector& x, const Vector& d, Vector& out) const;

  /// Programs with a sparse-plus-low-rank Hessian override the two methods
  /// below; the solver then factors a sparse bordered KKT system instead of
  /// a dense one.
  virtual bool has_sparse_hessian() const { return false; }
  /// Same contract as accumulate_constraints with the Hessian written to
  /// `terms`. Gradient contributions still go to grad.
  virtual void accumulate_constraints_sparse(const Vector& x, const Vector& w, const Vector& u, Vector& grad,
                                             HessianTerms& terms) const;
  /// Appends scale * (objective Hessian). The default densifies.
  virtual void objective_hessian_sparse(const Vector& x, double scale, HessianTerms& terms) const;

  const SparseMatrix& eq_matrix() const { return eq_matrix_; }
  const Vector& eq_rhs() const { return eq_rhs_; }
  int num_equalities() const { return static_cast<int>(eq_matrix_.rows()); }

 protected:
  void set_equalities(SparseMatrix a, Vector b) {
    eq_matrix_ = std::move(a);
    eq_matrix_.makeCompressed();
    eq_rhs_ = std::move(b);
  }

 private:
  SparseMatrix eq_matrix_;
  Vector eq_rhs_;
};

/// One explicitly specified smooth function R^n -> R.
struct SmoothFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

/// Program assembled from closures; convenient for small problems and tests.
class ExplicitProgram : public SmoothConvexProgram {
 public:
  ExplicitProgram(int dim, SmoothFunction objective) : dim_(dim), objective_(std::move(objective)) {}

  void add_inequality(SmoothFunction g) { constraints_.push_back(std::move(g)); }
  void set_linear_equalities(const Matrix& a, Vector b) { set_equalities(a.sparseView(), std::move(b)); }

  int dimension() const override { return dim_; }
  int num_inequalities() const override { return static_cast<int>(constraints_.size()); }
  double objective(const Vector& x) const override { return objective_.value(x); }
  void objective_derivatives(const Vector& x, Vector& grad, Matrix* hess) const override;
  void constraint_values(const Vector& x, Vector& g) const override;
  void accumulate_constraints(const Vector& x, const Vector& w, const Vector* u, Vector& grad,
                              Matrix* hess) const override;
  Vector constraint_gradient(const Vector& x, int i) const override;

 private:
  int dim_;
  SmoothFunction objective_;
  std::vector<SmoothFunction> constraints_;
};

enum class Method {
  barrier,      // centering by primal Newton steps, t multiplied per stage
  primal_dual,  // primal-dual steps with t set from the surrogate gap
};

struct Tolerances {
  Method method = Method::primal_dual;
  double gap = 1e-8;          // stop once m / t (or the surrogate gap) <= gap
  double kkt = 1e-6;          // required KKT residual for status optimal
  double equality = 1e-8;     // required |A x - b|_inf for status optimal
  double newton = 1e-10;      // centering stops when lambda^2 / 2 <= newton
  double t0 = 1.0;
  double barrier_factor = 10.0;  // t growth per stage, or mu in t = mu m / eta
  int max_newton_per_stage = 200;
  int max_stages = 60;
  int max_iterations = 400;   // primal-dual iteration cap
  double feasibility = 1e-9;  // primal-dual residual target for |r_dual|_inf
  double ls_alpha = 0.25;
  double ls_beta = 0.5;
  bool record_trace = false;
};

enum class SolveStatus { optimal, infeasible, max_iter, inaccurate };

std::string to_string(SolveStatus status);

struct TraceRow {
  int stage = 0;
  int newton_iter = 0;
  double objective = 0.0;
  double residual = 0.0;  // barrier: Newton decrement lambda^2 / 2; primal-dual: surrogate gap
};

struct SolveReport {
  Vector x;
  double objective = 0.0;
  double max_violation = 0.0;   // max_i g_i(x); negative when strictly feasible
  double eq_residual = 0.0;     // |A x - b|_inf
  double kkt_residual = 0.0;    // max(|stationarity|_inf, max_i lambda_i |g_i|)
  int newton_iterations = 0;
  int barrier_stages = 0;
  int phase_one_iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  Vector inequality_duals;      // barrier: lambda_i = 1 / (t |g_i|)
  Vector equality_duals;
  std::vector<double> stage_objectives;
  std::vector<TraceRow> trace;
};

/// Interior-point solve with infeasible-start Newton steps on A x = b (see
/// Method). When `start` is not strictly feasible a phase-one problem is
/// solved first. stage_objectives and barrier_stages are filled by the
/// barrier method only.
SolveReport solve(const SmoothConvexProgram& program, const Vector& start, const Tolerances& tol = {});

struct PhaseOneResult {
  bool feasible = false;
  Vector x;
  double max_violation = 0.0;
  int newton_iterations = 0;
};

/// Returns `hint` unchanged when it is already strictly feasible and on
/// A x = b; otherwise minimizes a common slack s over g_i(x) <= s.
PhaseOneResult phase_one(const SmoothConvexProgram& program, const Vector& hint, const Tolerances& tol = {});

/// Largest error between analytic gradients (objective and every constraint)
/// and central differences with step h, per function relative to
/// max(|analytic gradient|_inf, 1).
double check_gradients(const SmoothConvexProgram& program, const Vector& x, double h);

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace uavcast::convex
