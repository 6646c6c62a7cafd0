#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mscale/common.hpp"

namespace mscale {

// Geometry of an argmin set. Projection, support function, membership and
// normal-cone tests are exact (up to factorization roundoff) per variant.
class ArgminSet {
 public:
  enum class Kind { Affine, Box, Singleton, WholeSpace };

  static ArgminSet affine(Mat A, Vec b);
  static ArgminSet box(Vec lo, Vec hi);
  static ArgminSet singleton(Vec z);
  static ArgminSet whole_space(Eigen::Index dim);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }

  Vec project(const Vec& x) const;
  bool contains(const Vec& x, double tol = 1e-10) const;
  // sigma_C(y) = sup_{x in C} <y, x>; +inf along unbounded directions.
  double support(const Vec& y) const;
  // p in N_C(z)? z must already lie in C.
  bool normal_cone_contains(const Vec& z, const Vec& p) const;

  const Mat& affine_matrix() const { return A_; }
  const Vec& affine_rhs() const { return b_; }
  const Vec& box_lo() const { return lo_; }
  const Vec& box_hi() const { return hi_; }
  const Vec& point() const { return z_; }

  ArgminSet translated(const Vec& shift) const;

 private:
  ArgminSet() = default;
  Kind kind_ = Kind::WholeSpace;
  Eigen::Index dim_ = 0;
  Mat A_;        // Affine: {x : Ax = b}
  Vec b_;
  Vec x0_;       // Affine: min-norm feasible point
  Vec lo_, hi_;  // Box
  Vec z_;        // Singleton
};

// Catalog + combinator descriptor for closed proper convex functions.
// Handles are immutable values; copying shares the underlying node.
class ConvexFunction {
 public:
  struct QuadraticForm {
    Mat G;  // symmetric PSD
    Vec g;
    double r = 0.0;
  };

  // catalog
  static ConvexFunction zero(Eigen::Index dim);
  static ConvexFunction quadratic(Mat Q, Vec c, double r = 0.0);
  static ConvexFunction absolute_sum(Eigen::Index dim);
  static ConvexFunction indicator_affine(Mat A, Vec b);
  static ConvexFunction indicator_box(Vec lo, Vec hi);
  static ConvexFunction sq_dist_to_affine(Mat A, Vec b);
  static ConvexFunction sq_dist_to_box(Vec lo, Vec hi);
  static ConvexFunction support_of_ball(Eigen::Index dim, double radius);
  // conjugate partner of support_of_ball; also the conjugate of the
  // Euclidean-norm family in general
  static ConvexFunction indicator_ball(Eigen::Index dim, double radius);

  // combinators
  static ConvexFunction sum(ConvexFunction f, ConvexFunction g);
  static ConvexFunction separable(std::vector<ConvexFunction> blocks);
  static ConvexFunction precompose(ConvexFunction f, Mat L);
  static ConvexFunction scale(ConvexFunction f, double c);
  static ConvexFunction translate(ConvexFunction f, Vec shift);

  // 1/2 |Ax - b|^2 as precompose(translate-style quadratic, A)
  static ConvexFunction least_squares(const Mat& A, const Vec& b);

  Eigen::Index dim() const;
  bool has_closed_conjugate() const;
  bool has_argmin_set() const;
  const std::optional<ArgminSet>& argmin_set() const;
  const std::optional<QuadraticForm>& quadratic_form() const;

  struct Node;
  const Node& node() const { return *node_; }

 private:
  explicit ConvexFunction(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct ProxResult {
  Vec point;
  double residual = 0.0;  // inner-splitting residual; 0 for closed forms
};

double eval(const ConvexFunction& f, const Vec& x);
ProxResult prox_detailed(const ConvexFunction& f, double lambda, const Vec& x);
Vec prox(const ConvexFunction& f, double lambda, const Vec& x);
// prox of the Fenchel conjugate, from independent per-variant formulas
Vec prox_of_conjugate(const ConvexFunction& f, double lambda, const Vec& x);
double conjugate(const ConvexFunction& f, const Vec& y);
// grid-refined maximization fallback; dim <= 2 only
double conjugate_numeric(const ConvexFunction& f, const Vec& y);
double support_of_argmin(const ConvexFunction& f, const Vec& y);
Vec project_argmin(const ConvexFunction& f, const Vec& x);
bool normal_cone_contains(const ConvexFunction& f, const Vec& z, const Vec& p);

// Psi(x1, x2) = 1/2 |L1 x1 - L2 x2|^2 with argmin set {L1 x1 = L2 x2}
ConvexFunction build_coupling(const Mat& L1, const Mat& L2);

}  // namespace mscale
