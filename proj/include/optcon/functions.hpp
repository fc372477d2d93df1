#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace optcon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// (x - c)^T Q (x - c) + b^T x + r, with Q symmetric PSD.
struct Quadratic {
  Mat Q;
  Vec c;
  Vec b;
  double r = 0.0;
};

/// a^T x + b.
struct Affine {
  Vec a;
  double b = 0.0;
};

/// ||x - c||^2 - r^2, r > 0.
struct Ball {
  Vec c;
  double r = 1.0;
};

class ScalarField;

struct Sum {
  std::vector<ScalarField> terms;
};

/// Convex, twice continuously differentiable field drawn from a closed
/// catalog. Values are immutable once built; the factory functions check
/// the catalog invariants and throw `ParseError` on violation.
class ScalarField {
 public:
  using Repr = std::variant<Quadratic, Affine, Ball, Sum>;

  static ScalarField quadratic(Mat Q, Vec c, Vec b, double r = 0.0);
  /// Quadratic with zero linear part and offset.
  static ScalarField quadratic(Mat Q, Vec c);
  static ScalarField affine(Vec a, double b);
  static ScalarField ball(Vec c, double r);
  static ScalarField sum(std::vector<ScalarField> terms);

  const Repr& repr() const { return repr_; }
  Eigen::Index dim() const { return dim_; }

  double eval(const Vec& x) const;
  Vec grad(const Vec& x) const;
  Mat hess(const Vec& x) const;

  friend bool operator==(const ScalarField& a, const ScalarField& b);

 private:
  ScalarField(Repr repr, Eigen::Index dim) : repr_(std::move(repr)), dim_(dim) {}
  void check_dim(const Vec& x) const;

  Repr repr_;
  Eigen::Index dim_;
};

/// Largest relative discrepancy between the analytic gradient/Hessian and
/// central differences with step `h`. Each entry is scaled by
/// max(1, |analytic entry|).
double finite_diff_check(const ScalarField& f, const Vec& x, double h);

/// Tolerance on the minimum eigenvalue for accepting a quadratic as PSD.
inline constexpr double kPsdTolerance = 1e-10;

}  // namespace optcon
