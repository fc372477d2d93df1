#include "optcon/functions.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "optcon/error.hpp"

namespace optcon {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

template <class Derived>
bool finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace

ScalarField ScalarField::quadratic(Mat Q, Vec c, Vec b, double r) {
  const auto m = c.size();
  if (m == 0) throw ParseError("quadratic: dimension must be positive");
  if (Q.rows() != m || Q.cols() != m)
    throw ParseError(fmt::format("quadratic: Q is {}x{} but c has {} entries", Q.rows(),
                                 Q.cols(), m));
  if (b.size() != m)
    throw ParseError(fmt::format("quadratic: b has {} entries, expected {}", b.size(), m));
  if (!finite(Q) || !finite(c) || !finite(b) || !std::isfinite(r))
    throw ParseError("quadratic: non-finite coefficient");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > kPsdTolerance)
    throw ParseError("quadratic: Q is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -kPsdTolerance)
    throw ParseError(fmt::format("quadratic: Q is not positive semidefinite (min eigenvalue {})",
                                 es.eigenvalues()(0)));
  return ScalarField(Quadratic{std::move(Q), std::move(c), std::move(b), r}, m);
}

ScalarField ScalarField::quadratic(Mat Q, Vec c) {
  const auto m = c.size();
  return quadratic(std::move(Q), std::move(c), Vec::Zero(m), 0.0);
}

ScalarField ScalarField::affine(Vec a, double b) {
  const auto m = a.size();
  if (m == 0) throw ParseError("affine: dimension must be positive");
  if (!finite(a) || !std::isfinite(b)) throw ParseError("affine: non-finite coefficient");
  return ScalarField(Affine{std::move(a), b}, m);
}

ScalarField ScalarField::ball(Vec c, double r) {
  const auto m = c.size();
  if (m == 0) throw ParseError("ball: dimension must be positive");
  if (!(r > 0.0) || !std::isfinite(r))
    throw ParseError(fmt::format("ball: radius must be positive, got {}", r));
  if (!finite(c)) throw ParseError("ball: non-finite center");
  return ScalarField(Ball{std::move(c), r}, m);
}

ScalarField ScalarField::sum(std::vector<ScalarField> terms) {
  if (terms.empty()) throw ParseError("sum: needs at least one term");
  const auto m = terms.front().dim();
  for (const auto& t : terms)
    if (t.dim() != m)
      throw ParseError(fmt::format("sum: term of dimension {} mixed with dimension {}",
                                   t.dim(), m));
  return ScalarField(Sum{std::move(terms)}, m);
}

void ScalarField::check_dim(const Vec& x) const {
  if (x.size() != dim_)
    throw std::invalid_argument(
        fmt::format("point has dimension {}, field expects {}", x.size(), dim_));
}

double ScalarField::eval(const Vec& x) const {
  check_dim(x);
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) {
            const Vec d = x - q.c;
            return d.dot(q.Q * d) + q.b.dot(x) + q.r;
          },
          [&](const Affine& a) { return a.a.dot(x) + a.b; },
          [&](const Ball& b) { return (x - b.c).squaredNorm() - b.r * b.r; },
          [&](const Sum& s) {
            double v = 0.0;
            for (const auto& t : s.terms) v += t.eval(x);
            return v;
          },
      },
      repr_);
}

Vec ScalarField::grad(const Vec& x) const {
  check_dim(x);
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) -> Vec { return 2.0 * q.Q * (x - q.c) + q.b; },
          [&](const Affine& a) -> Vec { return a.a; },
          [&](const Ball& b) -> Vec { return 2.0 * (x - b.c); },
          [&](const Sum& s) -> Vec {
            Vec g = Vec::Zero(dim_);
            for (const auto& t : s.terms) g += t.grad(x);
            return g;
          },
      },
      repr_);
}

Mat ScalarField::hess(const Vec& x) const {
  check_dim(x);
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) -> Mat { return 2.0 * q.Q; },
          [&](const Affine&) -> Mat { return Mat::Zero(dim_, dim_); },
          [&](const Ball&) -> Mat { return 2.0 * Mat::Identity(dim_, dim_); },
          [&](const Sum& s) -> Mat {
            Mat h = Mat::Zero(dim_, dim_);
            for (const auto& t : s.terms) h += t.hess(x);
            return h;
          },
      },
      repr_);
}

bool operator==(const ScalarField& a, const ScalarField& b) {
  if (a.dim_ != b.dim_ || a.repr_.index() != b.repr_.index()) return false;
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) {
            const auto& o = std::get<Quadratic>(b.repr_);
            return q.Q == o.Q && q.c == o.c && q.b == o.b && q.r == o.r;
          },
          [&](const Affine& f) {
            const auto& o = std::get<Affine>(b.repr_);
            return f.a == o.a && f.b == o.b;
          },
          [&](const Ball& f) {
            const auto& o = std::get<Ball>(b.repr_);
            return f.c == o.c && f.r == o.r;
          },
          [&](const Sum& s) { return s.terms == std::get<Sum>(b.repr_).terms; },
      },
      a.repr_);
}

double finite_diff_check(const ScalarField& f, const Vec& x, double h) {
  const auto m = f.dim();
  const Vec g = f.grad(x);
  const Mat H = f.hess(x);
  double worst = 0.0;
  auto record = [&](double analytic, double numeric) {
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
  };
  for (Eigen::Index k = 0; k < m; ++k) {
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    record(g(k), (f.eval(xp) - f.eval(xm)) / (2.0 * h));
    const Vec dg = (f.grad(xp) - f.grad(xm)) / (2.0 * h);
    for (Eigen::Index j = 0; j < m; ++j) record(H(j, k), dg(j));
  }
  return worst;
}

}  // namespace optcon
